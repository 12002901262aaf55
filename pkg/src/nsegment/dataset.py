"""Corpus ingestion: image/mask pairs, sliding-window tiling, class remapping.

Mask files are 8-bit single-channel PNGs holding class indices, or 24-bit
RGB PNGs decoded through a user-supplied palette table. Manifests list one
pair per line, image path and mask path separated by a tab; relative paths
resolve against the manifest's directory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
from PIL import Image

from .augment import SamplePair
from .errors import DataError, InvalidInputError, InvalidParameterError
from .warp import IGNORE, ImagePlane, LabelMask

__all__ = [
    "TilingSpec",
    "ClassMap",
    "PaletteTable",
    "ManifestEntry",
    "DatasetManifest",
    "tile_origins",
    "tile_pair",
    "remap_classes",
    "load_mask",
    "load_pair",
    "save_mask",
    "save_image",
    "read_manifest",
    "write_manifest",
]


@dataclass(frozen=True)
class TilingSpec:
    """Sliding-window geometry. ``snap`` adds flush windows at the far edges."""

    tile: int = 512
    stride: int = 256
    edge_policy: str = "snap"

    def __post_init__(self):
        if not 1 <= self.stride <= self.tile:
            raise InvalidParameterError(
                f"stride must satisfy 1 <= stride <= tile, got stride={self.stride} tile={self.tile}"
            )
        if self.edge_policy not in ("snap", "drop"):
            raise InvalidParameterError(
                f"edge_policy must be 'snap' or 'drop', got {self.edge_policy!r}"
            )


def tile_origins(dim: int, spec: TilingSpec) -> list[int]:
    """Window origins along one axis, ascending, deduplicated."""
    if spec.tile > dim:
        if spec.edge_policy == "snap":
            raise InvalidParameterError(
                f"tile {spec.tile} exceeds dimension {dim}; windows must fit"
            )
        return []
    origins = list(range(0, dim - spec.tile + 1, spec.stride))
    if spec.edge_policy == "snap" and origins[-1] != dim - spec.tile:
        origins.append(dim - spec.tile)
    return origins


def tile_pair(sample: SamplePair, spec: TilingSpec) -> list[SamplePair]:
    """Cut a pair into tile windows, row-major by origin.

    Pure windowing: every patch pixel equals the source pixel at
    origin + offset. Patch sample_ids are the row-major patch index; use
    :func:`tile_origins` to recover each patch's origin.
    """
    xs = tile_origins(sample.mask.width, spec)
    ys = tile_origins(sample.mask.height, spec)
    patches = []
    for y0 in ys:
        for x0 in xs:
            window = (slice(y0, y0 + spec.tile), slice(x0, x0 + spec.tile))
            patches.append(
                SamplePair(
                    image=ImagePlane(samples=sample.image.samples[window].copy()),
                    mask=LabelMask(
                        values=sample.mask.values[window].copy(), classes=sample.mask.classes
                    ),
                    sample_id=len(patches),
                    epoch=sample.epoch,
                )
            )
    return patches


@dataclass(frozen=True)
class ClassMap:
    """Remap table from source class indices to dense targets or IGNORE."""

    mapping: dict[int, int]
    class_names: tuple[str, ...] = ()

    def __post_init__(self):
        targets = sorted({t for t in self.mapping.values() if t != IGNORE})
        if targets != list(range(len(targets))):
            raise InvalidParameterError(
                f"targets must be dense 0..C-1 or IGNORE, got {targets}"
            )
        if any(not 0 <= s < IGNORE for s in self.mapping):
            raise InvalidParameterError("source indices must lie in [0, 255)")

    @property
    def num_classes(self) -> int:
        dense = {t for t in self.mapping.values() if t != IGNORE}
        return max(len(dense), 1)

    @classmethod
    def identity(cls, num_classes: int, class_names: Sequence[str] = ()) -> "ClassMap":
        return cls({i: i for i in range(num_classes)}, tuple(class_names))


def remap_classes(mask: LabelMask, class_map: ClassMap) -> LabelMask:
    """Replace class values through the table; IGNORE passes through."""
    lut = np.full(256, 0xFFFF, dtype=np.uint16)
    for src, dst in class_map.mapping.items():
        lut[src] = dst
    lut[IGNORE] = IGNORE
    out = lut[mask.values]
    unmapped = out == 0xFFFF
    if unmapped.any():
        offending = sorted(int(v) for v in np.unique(mask.values[unmapped]))
        raise DataError(f"mask holds unmapped class indices {offending}")
    return LabelMask(values=out.astype(np.uint8), classes=class_map.num_classes)


@dataclass(frozen=True)
class PaletteTable:
    """RGB color -> class index table for color-coded mask files."""

    colors: dict[tuple[int, int, int], int]
    class_names: tuple[str, ...] = ()
    ignore_color: Optional[tuple[int, int, int]] = None

    @property
    def num_classes(self) -> int:
        return max(self.colors.values()) + 1 if self.colors else 1

    @classmethod
    def from_json(cls, path) -> "PaletteTable":
        """Load a palette file: {"classes": [{"index", "name", "rgb"}], "ignore_rgb": [...]}"""
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        try:
            colors = {tuple(int(c) for c in entry["rgb"]): int(entry["index"]) for entry in doc["classes"]}
            names = tuple(str(entry.get("name", "")) for entry in doc["classes"])
            ignore = doc.get("ignore_rgb")
        except (KeyError, TypeError) as exc:
            raise DataError(f"malformed palette file {path}: {exc}") from None
        return cls(colors=colors, class_names=names, ignore_color=tuple(ignore) if ignore else None)

    def decode(self, rgb: np.ndarray) -> np.ndarray:
        """Map an (h, w, 3) color mask to class indices; unknown colors are errors."""
        packed = (
            rgb[:, :, 0].astype(np.int64) << 16
        ) | (rgb[:, :, 1].astype(np.int64) << 8) | rgb[:, :, 2].astype(np.int64)
        out = np.full(packed.shape, -1, dtype=np.int64)
        for (r, g, b), index in self.colors.items():
            out[packed == ((r << 16) | (g << 8) | b)] = index
        if self.ignore_color is not None:
            r, g, b = self.ignore_color
            out[packed == ((r << 16) | (g << 8) | b)] = IGNORE
        if (out < 0).any():
            bad = np.unique(packed[out < 0])
            colors = [f"({v >> 16},{(v >> 8) & 255},{v & 255})" for v in bad[:8]]
            raise DataError(f"mask holds colors missing from the palette: {', '.join(colors)}")
        return out.astype(np.uint8)


def _open_image(path) -> Image.Image:
    try:
        img = Image.open(path)
        img.load()
    except (OSError, SyntaxError) as exc:
        raise DataError(f"cannot decode {path}: {exc}") from None
    return img


def load_mask(
    path,
    palette: Optional[PaletteTable] = None,
    classes: Optional[int] = None,
) -> LabelMask:
    """Decode a mask file to a LabelMask.

    Single-channel files are taken as class indices; RGB files require a
    palette. Without an explicit class count, it is inferred as one more
    than the largest non-IGNORE value.
    """
    img = _open_image(path)
    if img.mode in ("RGB", "RGBA"):
        if palette is None:
            raise DataError(f"{path} is color-coded but no palette table was given")
        values = palette.decode(np.asarray(img.convert("RGB"), dtype=np.uint8))
        classes = classes or palette.num_classes
    elif img.mode in ("L", "P"):
        values = np.asarray(img.convert("L"), dtype=np.uint8)
    else:
        raise DataError(f"{path}: unsupported mask mode {img.mode!r}")
    if classes is None:
        labeled = values[values != IGNORE]
        classes = int(labeled.max()) + 1 if labeled.size else 1
    labeled = values[values != IGNORE]
    if labeled.size and int(labeled.max()) >= classes:
        raise DataError(
            f"{path}: class value {int(labeled.max())} out of range for {classes} classes"
        )
    return LabelMask(values=values, classes=classes)


def load_pair(
    image_path,
    mask_path,
    palette: Optional[PaletteTable] = None,
    classes: Optional[int] = None,
    sample_id: int = 0,
    epoch: int = 0,
) -> SamplePair:
    """Decode an image/mask pair and validate matching dimensions."""
    img = _open_image(image_path)
    if img.mode not in ("L", "RGB"):
        img = img.convert("RGB")
    image = ImagePlane(samples=np.asarray(img, dtype=np.uint8))
    mask = load_mask(mask_path, palette=palette, classes=classes)
    if (image.height, image.width) != (mask.height, mask.width):
        raise InvalidInputError(
            f"{image_path} is {image.width}x{image.height} but {mask_path} is "
            f"{mask.width}x{mask.height}"
        )
    return SamplePair(image=image, mask=mask, sample_id=sample_id, epoch=epoch)


def save_mask(mask: LabelMask, path) -> None:
    Image.fromarray(mask.values, mode="L").save(path)


def save_image(image: ImagePlane, path) -> None:
    samples = image.samples
    if samples.shape[2] == 1:
        Image.fromarray(samples[:, :, 0], mode="L").save(path)
    else:
        Image.fromarray(samples).save(path)


@dataclass(frozen=True)
class ManifestEntry:
    image_path: str
    mask_path: str
    width: int
    height: int


@dataclass
class DatasetManifest:
    entries: list[ManifestEntry] = field(default_factory=list)
    split: str = "train"


def read_manifest(path, split: str = "train", check_dims: bool = True) -> DatasetManifest:
    """Parse a tab-separated manifest; blank lines and #-comments are skipped."""
    base = Path(path).parent
    entries = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise DataError(f"{path}:{lineno}: expected 'image<TAB>mask', got {line!r}")
            image_path = str((base / parts[0]).resolve()) if not Path(parts[0]).is_absolute() else parts[0]
            mask_path = str((base / parts[1]).resolve()) if not Path(parts[1]).is_absolute() else parts[1]
            if check_dims:
                with Image.open(image_path) as img:
                    iw, ih = img.size
                with Image.open(mask_path) as msk:
                    mw, mh = msk.size
                if (iw, ih) != (mw, mh):
                    raise InvalidInputError(
                        f"{path}:{lineno}: image is {iw}x{ih} but mask is {mw}x{mh}"
                    )
            else:
                with Image.open(image_path) as img:
                    iw, ih = img.size
            entries.append(ManifestEntry(image_path, mask_path, iw, ih))
    return DatasetManifest(entries=entries, split=split)


def write_manifest(pairs: Iterable[tuple[str, str]], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for image_path, mask_path in pairs:
            fh.write(f"{image_path}\t{mask_path}\n")
