import json

import numpy as np
import pytest

from nsegment import (
    AreaReport,
    IGNORE,
    InvalidParameterError,
    LabelMask,
    area_report,
    connected_components,
)
from nsegment.analysis import interval_labels

from conftest import random_mask


def two_component_mask():
    """One 5-pixel plus shape and one 10x10 square of class 1 on IGNORE."""
    values = np.full((24, 24), IGNORE, dtype=np.uint8)
    values[2, 3] = 1
    values[1, 3] = 1
    values[3, 3] = 1
    values[2, 2] = 1
    values[2, 4] = 1
    values[10:20, 10:20] = 1
    return LabelMask(values=values, classes=2)


class TestConnectedComponents:
    def test_empty_mask(self):
        mask = LabelMask(values=np.zeros((8, 8), dtype=np.uint8), classes=3)
        assert connected_components(mask, 1) == []
        assert connected_components(mask, 2) == []

    def test_plus_and_square(self):
        assert connected_components(two_component_mask(), 1) == [5, 100]

    def test_diagonal_pixels_join_under_8_connectivity(self):
        values = np.zeros((4, 4), dtype=np.uint8)
        values[0, 0] = 1
        values[1, 1] = 1
        mask = LabelMask(values=values, classes=2)
        assert connected_components(mask, 1) == [2]

    def test_ignore_pixels_form_no_component(self):
        values = np.full((4, 4), IGNORE, dtype=np.uint8)
        values[0, 0] = 1
        mask = LabelMask(values=values, classes=2)
        assert connected_components(mask, 1) == [1]
        # IGNORE is not a class index and cannot be queried.
        with pytest.raises(InvalidParameterError):
            connected_components(mask, 2)

    def test_areas_ascending(self):
        rng = np.random.default_rng(1)
        mask = random_mask(rng, 32, 32, classes=3)
        for class_index in range(3):
            areas = connected_components(mask, class_index)
            assert areas == sorted(areas)

    def test_area_conservation(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            mask = random_mask(rng, 20, 20, classes=4, ignore_fraction=0.05)
            for class_index in range(4):
                total = sum(connected_components(mask, class_index))
                assert total == int((mask.values == class_index).sum())


class TestAreaReport:
    def test_two_component_fixture(self):
        report = area_report([two_component_mask()], tiny_threshold=10)
        assert report.class_areas[1] == [5, 100]
        assert report.total_components == 2
        assert report.tiny_fraction == 0.5

    def test_histogram_sums_to_total(self):
        rng = np.random.default_rng(3)
        masks = [random_mask(rng, 24, 24, classes=4) for _ in range(10)]
        report = area_report(masks)
        assert sum(report.histogram()) == report.total_components
        for class_index in report.class_areas:
            assert sum(report.histogram(class_index)) == len(report.class_areas[class_index])

    def test_empty_corpus(self):
        report = area_report([])
        assert report.total_components == 0
        assert report.tiny_fraction == 0.0

    def test_all_ignore_corpus(self):
        mask = LabelMask(values=np.full((8, 8), IGNORE, dtype=np.uint8), classes=3)
        report = area_report([mask])
        assert report.total_components == 0
        assert report.tiny_fraction == 0.0

    def test_permutation_invariance(self):
        rng = np.random.default_rng(4)
        masks = [random_mask(rng, 16, 16, classes=3) for _ in range(8)]
        forward = area_report(masks)
        backward = area_report(list(reversed(masks)))
        assert forward.class_areas == backward.class_areas
        assert forward.histogram() == backward.histogram()

    def test_threshold_monotonicity(self):
        rng = np.random.default_rng(5)
        masks = [random_mask(rng, 24, 24, classes=4) for _ in range(5)]
        fractions = [
            area_report(masks, tiny_threshold=t).tiny_fraction for t in (1, 5, 10, 50, 1000)
        ]
        assert fractions == sorted(fractions)

    def test_merge_is_order_free(self):
        rng = np.random.default_rng(6)
        masks = [random_mask(rng, 16, 16, classes=3) for _ in range(6)]
        left = area_report(masks[:3])
        right = area_report(masks[3:])
        assert left.merge(right).class_areas == area_report(masks).class_areas
        assert right.merge(left).class_areas == area_report(masks).class_areas

    def test_merge_rejects_mismatched_bins(self):
        with pytest.raises(InvalidParameterError):
            AreaReport(bins=(10,)).merge(AreaReport(bins=(10, 100)))

    def test_bins_must_increase(self):
        with pytest.raises(InvalidParameterError):
            AreaReport(bins=(100, 10))

    def test_interval_labels(self):
        assert interval_labels((10, 100)) == ["[0,10)", "[10,100)", "[100,inf)"]

    def test_default_intervals_match_bin_edges(self):
        # Component of exactly 10 pixels lands in [10,100), not in tiny.
        values = np.zeros((4, 12), dtype=np.uint8)
        values[1, 1:11] = 1
        report = area_report([LabelMask(values=values, classes=2)])
        assert report.class_areas[1] == [10]
        assert report.tiny_fraction == 0.0
        assert report.histogram(1) == [0, 1, 0, 0, 0]


class TestReportSerialization:
    def test_json_document(self, tmp_path):
        report = area_report([two_component_mask()], class_names=("background", "object"))
        path = tmp_path / "report.json"
        report.write_json(path, label="train")
        doc = json.loads(path.read_text())
        assert doc["split"] == "train"
        assert doc["tiny_fraction"] == 0.5
        assert doc["classes"]["1"]["name"] == "object"
        assert sum(doc["histogram"]) == doc["total_components"]

    def test_csv_rows(self, tmp_path):
        report = area_report([two_component_mask()])
        path = tmp_path / "report.csv"
        report.write_csv(path, label="train")
        lines = path.read_text().strip().splitlines()
        # Header plus one row per class per interval.
        expected_rows = len(report.class_areas) * (len(report.bins) + 1)
        assert len(lines) == 1 + expected_rows
        assert lines[0].startswith("split,class_index,class_name,interval,count")
