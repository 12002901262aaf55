"""Figure rendering: deformation preview panels and area-distribution charts.

Class indices are drawn through a fixed display palette (distinct from any
dataset palette); IGNORE pixels render as gray with a diagonal hatch so
holes are visually unmistakable.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .analysis import AreaReport, interval_labels
from .augment import OmegaSet, SamplePair, derive_stream
from .fields import generate_displacement_field
from .warp import IGNORE, WarpSpec, warp_label

__all__ = ["DISPLAY_PALETTE", "mask_to_rgb", "overlay_pair", "render_preview", "render_area_figure"]

# Fixed display palette for class indices 0..11 (cycled beyond that).
DISPLAY_PALETTE = (
    (31, 119, 180),
    (255, 127, 14),
    (44, 160, 44),
    (214, 39, 40),
    (148, 103, 189),
    (140, 86, 75),
    (227, 119, 194),
    (127, 127, 127),
    (188, 189, 34),
    (23, 190, 207),
    (174, 199, 232),
    (255, 187, 120),
)

_IGNORE_GRAY = 128
_IGNORE_HATCH_GRAY = 64


def mask_to_rgb(values: np.ndarray) -> np.ndarray:
    """Color a class-index grid; IGNORE becomes hatched gray."""
    h, w = values.shape
    rgb = np.zeros((h, w, 3), dtype=np.uint8)
    for class_index in np.unique(values):
        if class_index == IGNORE:
            continue
        rgb[values == class_index] = DISPLAY_PALETTE[class_index % len(DISPLAY_PALETTE)]
    holes = values == IGNORE
    if holes.any():
        yy, xx = np.nonzero(holes)
        shade = np.where((yy + xx) % 6 < 2, _IGNORE_HATCH_GRAY, _IGNORE_GRAY)
        rgb[yy, xx] = shade[:, np.newaxis]
    return rgb


def overlay_pair(image: np.ndarray, mask_rgb: np.ndarray, alpha: float = 0.55) -> np.ndarray:
    """Blend a colored mask over an image."""
    if image.ndim == 3 and image.shape[2] == 1:
        image = np.repeat(image, 3, axis=2)
    elif image.ndim == 2:
        image = np.stack([image] * 3, axis=2)
    blended = (1.0 - alpha) * image.astype(np.float64) + alpha * mask_rgb.astype(np.float64)
    return np.clip(blended + 0.5, 0, 255).astype(np.uint8)


def render_preview(
    sample: SamplePair,
    omega: OmegaSet,
    seed: int = 0,
    warp_spec: WarpSpec = WarpSpec(),
):
    """Panel grid: the original pair, then one deformed-label cell per pair.

    Cell k draws its field from the stream derived from (seed, k, 0), so
    the figure is fully reproducible.
    """
    panels = [("original", sample.mask)]
    for k, params in enumerate(omega.pairs):
        rng = derive_stream(seed, k, 0)
        field = generate_displacement_field(sample.mask.width, sample.mask.height, params, rng)
        warped = warp_label(sample.mask, field, warp_spec)
        panels.append((f"alpha={params.alpha:g} sigma={params.sigma:g}", warped))

    ncols = min(4, len(panels))
    nrows = (len(panels) + ncols - 1) // ncols
    fig, axes = plt.subplots(nrows, ncols, figsize=(3.2 * ncols, 3.4 * nrows), squeeze=False)
    for ax in axes.ravel():
        ax.set_axis_off()
    for ax, (title, mask) in zip(axes.ravel(), panels):
        ax.imshow(overlay_pair(sample.image.samples, mask_to_rgb(mask.values)))
        ax.set_title(title, fontsize=9)
        ax.set_axis_on()
        ax.set_xticks([])
        ax.set_yticks([])
    fig.tight_layout()
    return fig


def render_area_figure(report: AreaReport, label: str = ""):
    """Bar chart of component-count proportions per area interval."""
    labels = interval_labels(report.bins)
    counts = report.histogram()
    total = max(sum(counts), 1)
    proportions = [c / total for c in counts]

    fig, ax = plt.subplots(figsize=(1.6 * len(labels) + 2.0, 4.0))
    bars = ax.bar(range(len(labels)), proportions, color="#4878a8")
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=20, ha="right", fontsize=8)
    ax.set_ylabel("proportion of components")
    ax.set_xlabel("component area (pixels)")
    title = "component area distribution"
    if label:
        title += f" ({label})"
    ax.set_title(
        f"{title}\ntiny fraction (< {report.tiny_threshold} px): {report.tiny_fraction:.1%}"
    )
    for bar, prop in zip(bars, proportions):
        ax.annotate(
            f"{prop:.1%}",
            xy=(bar.get_x() + bar.get_width() / 2, bar.get_height()),
            xytext=(0, 2),
            textcoords="offset points",
            ha="center",
            fontsize=8,
        )
    fig.tight_layout()
    return fig
