import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from satforgery.evaluate import (
    auc,
    auc_from_scores,
    pair_count_auc,
    report_records,
    report_table,
    roc,
    save_curve,
)
from satforgery.evaluate import AucReport


class TestRoc:
    def test_perfect_separation_passes_through_0_1(self):
        scores = [0.1, 0.2, 0.8, 0.9]
        labels = [0, 0, 1, 1]        # forged (positive) scores lower
        curve = roc(scores, labels)
        assert any((f == 0.0 and t == 1.0)
                   for f, t in zip(curve.fpr, curve.tpr))

    def test_constant_scores_two_point_curve(self):
        curve = roc([0.5] * 6, [0, 1, 0, 1, 0, 1])
        assert len(curve.fpr) == 2
        assert (curve.fpr[0], curve.tpr[0]) == (0.0, 0.0)
        assert (curve.fpr[-1], curve.tpr[-1]) == (1.0, 1.0)

    def test_monotone_from_origin_to_corner(self, rng):
        scores = rng.normal(size=200)
        labels = rng.integers(0, 2, size=200)
        labels[:2] = (0, 1)
        curve = roc(scores, labels)
        assert (np.diff(curve.fpr) >= 0).all()
        assert (np.diff(curve.tpr) >= 0).all()
        assert (curve.fpr[0], curve.tpr[0]) == (0.0, 0.0)
        assert (curve.fpr[-1], curve.tpr[-1]) == (1.0, 1.0)

    def test_random_scores_near_diagonal(self):
        rng = np.random.default_rng(0)
        scores = rng.normal(size=10000)
        labels = rng.integers(0, 2, size=10000)
        assert auc_from_scores(scores, labels) == pytest.approx(0.5, abs=0.02)

    def test_single_class_raises(self):
        with pytest.raises(ValueError):
            roc([0.1, 0.2], [1, 1])

    def test_length_mismatch_raises(self):
        with pytest.raises(ValueError):
            roc([0.1, 0.2], [1, 0, 1])


class TestAuc:
    def test_perfect(self):
        assert auc_from_scores([0.0, 0.1, 0.8, 0.9], [0, 0, 1, 1]) == 1.0

    def test_anti_perfect(self):
        assert auc_from_scores([0.9, 0.8, 0.1, 0.0], [0, 0, 1, 1]) == 0.0

    def test_constant_half(self):
        assert auc_from_scores([0.3] * 4, [0, 0, 1, 1]) == 0.5

    def test_matches_pair_counting_oracle(self):
        rng = np.random.default_rng(1)
        for n in (10, 100, 2000):
            scores = rng.normal(size=n).round(1)   # force some ties
            labels = rng.integers(0, 2, size=n)
            labels[:2] = (0, 1)
            got = auc_from_scores(scores, labels)
            want = pair_count_auc(scores, labels)
            assert got == pytest.approx(want, abs=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.floats(-100, 100), min_size=4, max_size=60),
           st.integers(0, 2**31 - 1))
    def test_property_auc_equals_pair_count(self, scores, seed):
        labels = np.random.default_rng(seed).integers(0, 2, size=len(scores))
        labels[:2] = (0, 1)
        got = auc_from_scores(scores, labels)
        want = pair_count_auc(scores, labels)
        assert got == pytest.approx(want, abs=1e-9)

    def test_invariant_under_monotone_transform(self, rng):
        scores = rng.normal(size=300)
        labels = rng.integers(0, 2, size=300)
        labels[:2] = (0, 1)
        base = auc_from_scores(scores, labels)
        for transform in (np.exp, np.arctan, lambda s: 3 * s - 7):
            assert auc_from_scores(transform(scores), labels) == \
                pytest.approx(base, abs=1e-12)

    def test_invariant_under_permutation(self, rng):
        scores = rng.normal(size=100)
        labels = rng.integers(0, 2, size=100)
        labels[:2] = (0, 1)
        perm = rng.permutation(100)
        assert auc_from_scores(scores[perm], labels[perm]) == \
            pytest.approx(auc_from_scores(scores, labels), abs=1e-12)

    def test_ground_truth_as_score(self):
        # feeding the true labels as scores: forged (0) scores lowest
        truth = np.array([0, 0, 1, 1, 1])
        assert auc_from_scores(truth.astype(float), truth) == 1.0
        assert auc_from_scores(1.0 - truth, truth) == 0.0


class TestReports:
    def _reports(self):
        return [AucReport("detection", "large", "gan", 0.972, 5, 5),
                AucReport("localization", "small", "plain", 0.902, 100, 900)]

    def test_table_has_row_per_report(self):
        table = report_table(self._reports())
        lines = table.splitlines()
        assert len(lines) == 2 + 2   # header + rule + rows
        assert "detection" in lines[2] and "gan" in lines[2]

    def test_records_machine_readable(self):
        records = report_records(self._reports())
        first = dict(kv.split("=") for kv in records.splitlines()[0].split())
        assert first["task"] == "detection"
        assert float(first["auc"]) == pytest.approx(0.972)
        assert int(first["n_pos"]) == 5

    def test_curve_dump(self, tmp_path):
        curve = roc([0.1, 0.9], [0, 1])
        path = tmp_path / "curve.txt"
        save_curve(curve, path)
        rows = [line.split() for line in path.read_text().splitlines()]
        assert len(rows) == len(curve.fpr)
        assert float(rows[-1][0]) == 1.0 and float(rows[-1][1]) == 1.0
