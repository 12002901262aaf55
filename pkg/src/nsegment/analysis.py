"""Mask statistics: per-class connected-component areas and tiny-mask rates.

Components use 8-connectivity; IGNORE pixels belong to no component. Areas
are counted per class per mask and aggregated across a corpus. The
histogram bins are interpreted as interior cut points: bounds
``[10, 100]`` produce the intervals [0,10), [10,100), [100,inf), so every
component lands in exactly one interval.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy import ndimage

from .errors import InvalidParameterError
from .warp import IGNORE, LabelMask

__all__ = [
    "DEFAULT_BINS",
    "DEFAULT_TINY_THRESHOLD",
    "AreaReport",
    "connected_components",
    "area_report",
    "interval_labels",
]

DEFAULT_BINS = (10, 100, 1000, 10000)
DEFAULT_TINY_THRESHOLD = 10

_EIGHT_CONNECTED = np.ones((3, 3), dtype=np.int8)


def connected_components(mask: LabelMask, class_index: int) -> list[int]:
    """Areas of the maximal 8-connected regions of one class, ascending."""
    if class_index >= mask.classes:
        raise InvalidParameterError(
            f"class {class_index} out of range for {mask.classes} classes"
        )
    labels, count = ndimage.label(mask.values == class_index, structure=_EIGHT_CONNECTED)
    if count == 0:
        return []
    areas = np.bincount(labels.ravel())[1:]
    return sorted(int(a) for a in areas)


def interval_labels(bins: Sequence[int]) -> list[str]:
    bounds = [0, *bins, None]
    return [
        f"[{lo},{hi})" if hi is not None else f"[{lo},inf)"
        for lo, hi in zip(bounds[:-1], bounds[1:])
    ]


@dataclass
class AreaReport:
    """Aggregated component areas, histogram counts, tiny-mask proportions."""

    bins: tuple[int, ...] = DEFAULT_BINS
    tiny_threshold: int = DEFAULT_TINY_THRESHOLD
    class_areas: dict[int, list[int]] = field(default_factory=dict)
    class_names: tuple[str, ...] = ()

    def __post_init__(self):
        if list(self.bins) != sorted(set(self.bins)):
            raise InvalidParameterError(f"bins must be strictly increasing, got {self.bins}")

    def add(self, mask: LabelMask) -> None:
        for class_index in range(mask.classes):
            areas = connected_components(mask, class_index)
            if areas:
                self.class_areas.setdefault(class_index, []).extend(areas)
                self.class_areas[class_index].sort()

    def merge(self, other: "AreaReport") -> "AreaReport":
        """Combine two partial reports; order of aggregation never matters."""
        if other.bins != self.bins or other.tiny_threshold != self.tiny_threshold:
            raise InvalidParameterError("cannot merge reports with different bins or thresholds")
        merged = {k: list(v) for k, v in self.class_areas.items()}
        for k, v in other.class_areas.items():
            merged.setdefault(k, []).extend(v)
            merged[k].sort()
        return AreaReport(
            bins=self.bins,
            tiny_threshold=self.tiny_threshold,
            class_areas=merged,
            class_names=self.class_names or other.class_names,
        )

    def _all_areas(self) -> list[int]:
        out = []
        for areas in self.class_areas.values():
            out.extend(areas)
        return out

    @property
    def total_components(self) -> int:
        return sum(len(v) for v in self.class_areas.values())

    @property
    def tiny_fraction(self) -> float:
        total = self.total_components
        if total == 0:
            return 0.0
        tiny = sum(1 for a in self._all_areas() if a < self.tiny_threshold)
        return tiny / total

    def class_tiny_fraction(self, class_index: int) -> float:
        areas = self.class_areas.get(class_index, [])
        if not areas:
            return 0.0
        return sum(1 for a in areas if a < self.tiny_threshold) / len(areas)

    def histogram(self, class_index: Optional[int] = None) -> list[int]:
        """Component counts per interval; ``None`` aggregates all classes."""
        areas = self.class_areas.get(class_index, []) if class_index is not None else self._all_areas()
        edges = np.asarray(self.bins)
        counts = np.zeros(len(self.bins) + 1, dtype=np.int64)
        if areas:
            slots = np.searchsorted(edges, np.asarray(areas), side="right")
            np.add.at(counts, slots, 1)
        return [int(c) for c in counts]

    def _class_name(self, class_index: int) -> str:
        if class_index < len(self.class_names):
            return self.class_names[class_index]
        return f"class_{class_index}"

    def to_json_dict(self, label: Optional[str] = None) -> dict:
        doc = {
            "bins": list(self.bins),
            "intervals": interval_labels(self.bins),
            "tiny_threshold": self.tiny_threshold,
            "total_components": self.total_components,
            "tiny_fraction": self.tiny_fraction,
            "histogram": self.histogram(),
            "classes": {
                str(ci): {
                    "name": self._class_name(ci),
                    "components": len(areas),
                    "tiny_fraction": self.class_tiny_fraction(ci),
                    "histogram": self.histogram(ci),
                }
                for ci, areas in sorted(self.class_areas.items())
            },
        }
        if label is not None:
            doc["split"] = label
        return doc

    def write_json(self, path, label: Optional[str] = None) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(label), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def write_csv(self, path, label: Optional[str] = None) -> None:
        """One row per class per interval, plus per-class totals."""
        labels = interval_labels(self.bins)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["split", "class_index", "class_name", "interval", "count", "proportion"])
            for ci in sorted(self.class_areas):
                counts = self.histogram(ci)
                total = sum(counts)
                for interval, count in zip(labels, counts):
                    writer.writerow(
                        [
                            label or "",
                            ci,
                            self._class_name(ci),
                            interval,
                            count,
                            f"{count / total:.6f}" if total else "0.000000",
                        ]
                    )


def area_report(
    masks: Iterable[LabelMask],
    bins: Sequence[int] = DEFAULT_BINS,
    tiny_threshold: int = DEFAULT_TINY_THRESHOLD,
    class_names: Sequence[str] = (),
) -> AreaReport:
    """Aggregate per-class component areas over a corpus of masks."""
    report = AreaReport(
        bins=tuple(bins), tiny_threshold=tiny_threshold, class_names=tuple(class_names)
    )
    for mask in masks:
        report.add(mask)
    return report
