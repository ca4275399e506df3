import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from parity_audit.errors import EmptyCell, EmptyGroup, InvalidBinCount, LengthMismatch
from parity_audit.metrics import (
    GroupedDataset,
    PredictionSet,
    base_rates,
    dp_gap,
    full_report,
    group_errors,
    positive_rate_gaps,
    predictive_rate_report,
    report_from_summary,
)


def ds_from(labels, groups):
    return GroupedDataset.from_labels(np.asarray(labels), np.asarray(groups))


def random_rows(rng, n=200):
    y = rng.integers(0, 2, n)
    a = rng.integers(0, 2, n)
    y[:4], a[:4] = [0, 1, 0, 1], [0, 0, 1, 1]
    return ds_from(y, a), PredictionSet(rng.random(n))


rows = st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1), st.floats(0, 1)), min_size=1, max_size=60)


def recount(ds, preds):
    """Brute-force loop oracle for the report fields."""
    out = {}
    for a in (0, 1):
        idx = [i for i in range(len(ds)) if ds.groups[i] == a]
        out[f"br{a}"] = sum(ds.labels[i] for i in idx) / len(idx)
        out[f"err{a}"] = sum(abs(ds.labels[i] - (preds.scores[i] >= 0.5)) for i in idx) / len(idx)
        out[f"pos{a}"] = sum(preds.scores[i] >= 0.5 for i in idx) / len(idx)
        for y in (0, 1):
            cell = [i for i in idx if ds.labels[i] == y]
            out[f"r{a}{y}"] = sum(preds.scores[i] >= 0.5 for i in cell) / len(cell)
    return out


class TestDataset:
    def test_validation(self):
        with pytest.raises(LengthMismatch):
            GroupedDataset(np.zeros((3, 1)), [0, 1, 0], [0, 1])
        with pytest.raises(ValueError):
            ds_from([0, 2], [0, 1])
        with pytest.raises(EmptyGroup):
            ds_from([], [])

    def test_prediction_hard_labels(self):
        p = PredictionSet([0.2, 0.5, 0.9])
        np.testing.assert_array_equal(p.hard, [0, 1, 1])
        with pytest.raises(ValueError):
            PredictionSet([1.2])


class TestBaseRates:
    def test_toy(self):
        assert base_rates(ds_from([1, 0, 1, 1], [0, 0, 1, 1])) == (0.5, 1.0, 0.5, 0.5)

    def test_all_zero(self):
        r = base_rates(ds_from([0, 0, 0], [0, 1, 1]))
        assert r[:3] == (0.0, 0.0, 0.0)

    def test_empty_group(self):
        with pytest.raises(EmptyGroup) as exc:
            base_rates(ds_from([0, 1], [0, 0]))
        assert exc.value.group == 1


class TestErrors:
    def test_perfect(self):
        ds = ds_from([1, 0, 1, 0], [0, 0, 1, 1])
        assert group_errors(ds, PredictionSet([1, 0, 1, 0])) == (0, 0, 0, 0)

    def test_constant_one(self, rng):
        ds, _ = random_rows(rng)
        r = base_rates(ds)
        e = group_errors(ds, PredictionSet(np.ones(len(ds))))
        assert e.err_D0 == pytest.approx(1 - r.base_rate_0)
        assert e.err_D1 == pytest.approx(1 - r.base_rate_1)

    def test_soft(self):
        ds = ds_from([1, 0], [0, 1])
        e = group_errors(ds, PredictionSet([0.75, 0.25]), soft=True)
        assert (e.err_D0, e.err_D1) == (0.25, 0.25)

    def test_length(self):
        with pytest.raises(LengthMismatch):
            group_errors(ds_from([0, 1], [0, 1]), PredictionSet([0.5]))


class TestParity:
    def test_dp_constant_and_group_indicator(self, rng):
        ds, _ = random_rows(rng)
        assert dp_gap(ds, PredictionSet(np.ones(len(ds)))) == 0.0
        assert dp_gap(ds, PredictionSet(ds.groups.astype(float))) == 1.0

    def test_rate_gaps_perfect_and_constant(self, rng):
        ds, _ = random_rows(rng)
        assert positive_rate_gaps(ds, PredictionSet(ds.labels.astype(float))) == (0.0, 0.0)
        assert positive_rate_gaps(ds, PredictionSet(np.ones(len(ds)))) == (0.0, 0.0)

    def test_rate_gaps_recount(self, rng):
        ds, preds = random_rows(rng)
        c = recount(ds, preds)
        tpr, fpr = positive_rate_gaps(ds, preds)
        assert tpr == pytest.approx(abs(c["r01"] - c["r11"]), abs=1e-12)
        assert fpr == pytest.approx(abs(c["r00"] - c["r10"]), abs=1e-12)

    def test_empty_cell(self):
        with pytest.raises(EmptyCell) as exc:
            positive_rate_gaps(ds_from([1, 0, 1], [0, 0, 1]), PredictionSet([1, 0, 1]))
        assert (exc.value.group, exc.value.label) == (1, 0)


class TestPredictiveRate:
    def test_perfect_two_bins(self):
        ds = ds_from([0, 1, 0, 1], [0, 0, 1, 1])
        r = predictive_rate_report(ds, PredictionSet(ds.labels.astype(float)), bins=2)
        assert r.gaps == [0.0, 0.0]

    def test_single_bin_is_base_rate_gap(self, rng):
        ds, preds = random_rows(rng)
        r = predictive_rate_report(ds, preds, bins=1)
        assert r.gaps[0] == pytest.approx(base_rates(ds).delta_BR, abs=1e-12)

    def test_empty_cells_flagged(self):
        ds = ds_from([0, 1], [0, 1])
        r = predictive_rate_report(ds, PredictionSet([0.05, 0.95]), bins=10)
        assert all(g is None for g in r.gaps)
        assert r.bins[0].positive_fraction_0 == 0.0 and r.bins[0].positive_fraction_1 is None
        assert r.max_gap is None

    def test_brute_force_binning(self, rng):
        ds, preds = random_rows(rng, 300)
        r = predictive_rate_report(ds, preds, bins=4)
        for c, b in enumerate(r.bins):
            lo, hi = c / 4, (c + 1) / 4
            inside = [i for i in range(len(ds)) if lo <= preds.scores[i] < hi or (c == 3 and preds.scores[i] == 1)]
            assert b.count == len(inside)
            fr = []
            for a in (0, 1):
                sel = [i for i in inside if ds.groups[i] == a]
                fr.append(np.mean(ds.labels[sel]) if sel else None)
            if None not in fr:
                assert b.gap == pytest.approx(abs(fr[0] - fr[1]), abs=1e-12)
            if inside:
                want = abs(np.mean(preds.scores[inside]) - np.mean(ds.labels[inside]))
                assert b.calibration_error == pytest.approx(want, abs=1e-12)

    def test_bad_bins(self):
        ds = ds_from([0, 1], [0, 1])
        for bins in (0, -1, 2.5):
            with pytest.raises(InvalidBinCount):
                predictive_rate_report(ds, PredictionSet([0.1, 0.9]), bins=bins)


class TestFullReport:
    def test_label_equals_group(self):
        ds = ds_from([0, 0, 1, 1], [0, 0, 1, 1])
        r = full_report(ds, PredictionSet(ds.labels.astype(float)))
        assert r.dp_gap == 1.0 and r.joint_err == 0.0 and r.err_D == 0.0
        assert r.tpr_gap is None and r.fpr_gap is None

    def test_recount(self, rng):
        ds, preds = random_rows(rng)
        r = full_report(ds, preds)
        c = recount(ds, preds)
        assert r.err_D0 == pytest.approx(c["err0"], abs=1e-12)
        assert r.err_D1 == pytest.approx(c["err1"], abs=1e-12)
        assert r.dp_gap == pytest.approx(abs(c["pos0"] - c["pos1"]), abs=1e-12)
        assert r.base_rate_0 == pytest.approx(c["br0"], abs=1e-12)
        assert r.alpha == pytest.approx(np.mean(ds.groups), abs=1e-12)

    def test_to_dict_fields(self, rng):
        ds, preds = random_rows(rng)
        assert set(full_report(ds, preds).to_dict()) == {
            "err_D", "err_D0", "err_D1", "joint_err", "acc_gap", "dp_gap", "base_rate_0",
            "base_rate_1", "delta_BR", "alpha", "tpr_gap", "fpr_gap", "predictive_rate_gaps"}

    @settings(max_examples=150, deadline=None)
    @given(rows, st.booleans())
    def test_invariants(self, data, soft):
        data = [(0, 0, 0.3), (1, 1, 0.7)] + data
        y, a, s = map(np.array, zip(*data))
        ds, preds = ds_from(y, a), PredictionSet(s)
        r = full_report(ds, preds, soft=soft)
        assert r.err_D == pytest.approx((1 - r.alpha) * r.err_D0 + r.alpha * r.err_D1, abs=1e-9)
        for name, v in r.to_dict().items():
            if isinstance(v, float):
                assert 0.0 <= v <= (2.0 if name == "joint_err" else 1.0)
        for g in (0, 1):
            m = a == g
            assert abs(y[m].mean() - preds.hard[m].mean()) <= np.abs(y[m] - preds.hard[m]).mean() + 1e-12
        perm = np.random.default_rng(len(data)).permutation(len(data))
        r_perm = full_report(ds_from(y[perm], a[perm]), PredictionSet(s[perm]), soft=soft)
        r_dup = full_report(ds_from(np.tile(y, 2), np.tile(a, 2)), PredictionSet(np.tile(s, 2)), soft=soft)
        for other in (r_perm, r_dup):
            for k in ("err_D", "joint_err", "dp_gap", "delta_BR", "alpha"):
                assert getattr(other, k) == pytest.approx(getattr(r, k), abs=1e-12)


class TestSummary:
    def test_recovers_group_errors(self):
        r = report_from_summary(joint_err=0.295, dp_gap=0.032, delta_BR=0.197, acc_gap=0.106)
        assert r.err_D0 + r.err_D1 == pytest.approx(0.295)
        assert r.err_D0 - r.err_D1 == pytest.approx(0.106)
        assert math.isnan(r.alpha)
