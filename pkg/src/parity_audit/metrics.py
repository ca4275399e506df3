"""Empirical group-fairness metrics for binary labels and a binary group.

Hard predictions are ``score >= threshold``. Conditional rates with no
supporting rows raise (or are reported as ``None`` in aggregate reports)
instead of silently becoming zero.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .errors import DimensionMismatch, EmptyCell, EmptyGroup, InvalidBinCount, LengthMismatch

DEFAULT_THRESHOLD = 0.5
DEFAULT_BINS = 10


@dataclass(frozen=True, eq=False)
class GroupedDataset:
    """Rows of ``(features, label, group)`` with binary label and group."""

    features: np.ndarray
    labels: np.ndarray
    groups: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.features, dtype=float)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        y = np.asarray(self.labels).astype(int).reshape(-1)
        a = np.asarray(self.groups).astype(int).reshape(-1)
        if len(y) == 0:
            raise EmptyGroup(0)
        if not (len(x) == len(y) == len(a)):
            raise LengthMismatch(f"features/labels/groups lengths {len(x)}/{len(y)}/{len(a)}")
        if x.ndim != 2:
            raise DimensionMismatch("features must be a 2-D array")
        for name, v in (("labels", y), ("groups", a)):
            if np.any((v != 0) & (v != 1)):
                raise ValueError(f"{name} must be 0/1")
        for arr in (x, y, a):
            arr.setflags(write=False)
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "groups", a)

    def __len__(self) -> int:
        return len(self.labels)

    @classmethod
    def from_labels(cls, labels, groups) -> "GroupedDataset":
        """Feature-less dataset, handy for metric-only audits."""
        labels = np.asarray(labels)
        return cls(np.zeros((len(labels), 0)), labels, groups)

    def subset(self, index) -> "GroupedDataset":
        return GroupedDataset(self.features[index], self.labels[index], self.groups[index])


@dataclass(frozen=True, eq=False)
class PredictionSet:
    scores: np.ndarray
    threshold: float = DEFAULT_THRESHOLD

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=float).reshape(-1)
        if np.any((s < 0) | (s > 1)) or np.any(~np.isfinite(s)):
            raise ValueError("scores must lie in [0, 1]")
        s.setflags(write=False)
        object.__setattr__(self, "scores", s)

    def __len__(self) -> int:
        return len(self.scores)

    @property
    def hard(self) -> np.ndarray:
        return (self.scores >= self.threshold).astype(int)

    def values(self, soft: bool) -> np.ndarray:
        return self.scores if soft else self.hard.astype(float)


class BaseRates(NamedTuple):
    base_rate_0: float
    base_rate_1: float
    delta_BR: float
    alpha: float


class GroupErrors(NamedTuple):
    err_D0: float
    err_D1: float
    err_D: float
    joint_err: float


def _mask(ds: GroupedDataset, group: int) -> np.ndarray:
    m = ds.groups == group
    if not m.any():
        raise EmptyGroup(group)
    return m


def _check_lengths(ds: GroupedDataset, preds: PredictionSet) -> None:
    if len(ds) != len(preds):
        raise LengthMismatch(f"dataset has {len(ds)} rows, predictions {len(preds)}")


def base_rates(ds: GroupedDataset) -> BaseRates:
    m0, m1 = _mask(ds, 0), _mask(ds, 1)
    br0 = float(ds.labels[m0].mean())
    br1 = float(ds.labels[m1].mean())
    return BaseRates(br0, br1, abs(br0 - br1), float(m1.mean()))


def group_errors(ds: GroupedDataset, preds: PredictionSet, soft: bool = False) -> GroupErrors:
    """Per-group mean absolute error, its alpha-mixture and the unweighted sum."""
    _check_lengths(ds, preds)
    yhat = preds.values(soft)
    loss = np.abs(ds.labels - yhat)
    m0, m1 = _mask(ds, 0), _mask(ds, 1)
    e0 = float(loss[m0].mean())
    e1 = float(loss[m1].mean())
    alpha = float(m1.mean())
    return GroupErrors(e0, e1, (1 - alpha) * e0 + alpha * e1, e0 + e1)


def positive_rate(ds: GroupedDataset, preds: PredictionSet, group: int) -> float:
    return float(preds.hard[_mask(ds, group)].mean())


def dp_gap(ds: GroupedDataset, preds: PredictionSet) -> float:
    _check_lengths(ds, preds)
    return abs(positive_rate(ds, preds, 0) - positive_rate(ds, preds, 1))


def _conditional_positive_rate(ds, preds, group: int, label: int) -> float:
    m = (ds.groups == group) & (ds.labels == label)
    if not m.any():
        raise EmptyCell(group, label)
    return float(preds.hard[m].mean())


def positive_rate_gaps(ds: GroupedDataset, preds: PredictionSet) -> tuple[float, float]:
    """``(tpr_gap, fpr_gap)`` between the two groups."""
    _check_lengths(ds, preds)
    tpr = [_conditional_positive_rate(ds, preds, a, 1) for a in (0, 1)]
    fpr = [_conditional_positive_rate(ds, preds, a, 0) for a in (0, 1)]
    return abs(tpr[0] - tpr[1]), abs(fpr[0] - fpr[1])


@dataclass(frozen=True)
class ScoreBin:
    lower: float
    upper: float
    count: int
    count_0: int
    count_1: int
    positive_fraction_0: Optional[float]
    positive_fraction_1: Optional[float]
    gap: Optional[float]
    mean_score: Optional[float]
    positive_fraction: Optional[float]
    calibration_error: Optional[float]


@dataclass(frozen=True)
class PredictiveRateReport:
    bins: list[ScoreBin] = field(default_factory=list)

    @property
    def gaps(self) -> list[Optional[float]]:
        return [b.gap for b in self.bins]

    @property
    def max_gap(self) -> Optional[float]:
        known = [g for g in self.gaps if g is not None]
        return max(known) if known else None

    def to_dict(self) -> dict:
        return {"bins": [asdict(b) for b in self.bins]}


def score_bin_index(scores: np.ndarray, bins: int) -> np.ndarray:
    """Equal-width bins over ``[0, 1]``; a score of exactly 1 lands in the last bin."""
    return np.minimum((np.asarray(scores) * bins).astype(int), bins - 1)


def predictive_rate_report(ds: GroupedDataset, preds: PredictionSet, bins: int = DEFAULT_BINS) -> PredictiveRateReport:
    """Per-bin ``|P(Y=1|bin, A=0) - P(Y=1|bin, A=1)|`` and calibration error."""
    if not isinstance(bins, (int, np.integer)) or bins < 1:
        raise InvalidBinCount(f"bins must be a positive integer, got {bins!r}")
    _check_lengths(ds, preds)
    idx = score_bin_index(preds.scores, bins)
    out = []
    for c in range(bins):
        in_bin = idx == c
        fractions = []
        counts = []
        for a in (0, 1):
            m = in_bin & (ds.groups == a)
            counts.append(int(m.sum()))
            fractions.append(float(ds.labels[m].mean()) if m.any() else None)
        gap = None if None in fractions else abs(fractions[0] - fractions[1])
        n = int(in_bin.sum())
        if n:
            mean_score = float(preds.scores[in_bin].mean())
            pos = float(ds.labels[in_bin].mean())
            calib = abs(mean_score - pos)
        else:
            mean_score = pos = calib = None
        out.append(ScoreBin(c / bins, (c + 1) / bins, n, counts[0], counts[1],
                            fractions[0], fractions[1], gap, mean_score, pos, calib))
    return PredictiveRateReport(out)


@dataclass(frozen=True)
class FairnessReport:
    err_D: float
    err_D0: float
    err_D1: float
    joint_err: float
    acc_gap: float
    dp_gap: float
    base_rate_0: float
    base_rate_1: float
    delta_BR: float
    alpha: float
    tpr_gap: Optional[float]
    fpr_gap: Optional[float]
    predictive_rate_gaps: list[Optional[float]]

    def to_dict(self) -> dict:
        return asdict(self)


def full_report(
    ds: GroupedDataset,
    preds: PredictionSet,
    soft: bool = False,
    bins: int = DEFAULT_BINS,
) -> FairnessReport:
    """Aggregate every metric above.

    Unlike :func:`positive_rate_gaps`, an empty (group, label) cell yields
    ``None`` for the affected gap so the rest of the report is still produced.
    """
    rates = base_rates(ds)
    errs = group_errors(ds, preds, soft=soft)
    try:
        tpr_gap, fpr_gap = positive_rate_gaps(ds, preds)
    except EmptyCell:
        tpr_gap = fpr_gap = None
        try:
            tpr_gap = abs(_conditional_positive_rate(ds, preds, 0, 1) - _conditional_positive_rate(ds, preds, 1, 1))
        except EmptyCell:
            pass
        try:
            fpr_gap = abs(_conditional_positive_rate(ds, preds, 0, 0) - _conditional_positive_rate(ds, preds, 1, 0))
        except EmptyCell:
            pass
    return FairnessReport(
        err_D=errs.err_D,
        err_D0=errs.err_D0,
        err_D1=errs.err_D1,
        joint_err=errs.joint_err,
        acc_gap=abs(errs.err_D0 - errs.err_D1),
        dp_gap=dp_gap(ds, preds),
        base_rate_0=rates.base_rate_0,
        base_rate_1=rates.base_rate_1,
        delta_BR=rates.delta_BR,
        alpha=rates.alpha,
        tpr_gap=tpr_gap,
        fpr_gap=fpr_gap,
        predictive_rate_gaps=predictive_rate_report(ds, preds, bins).gaps,
    )


def report_from_summary(
    joint_err: float,
    dp_gap: float,
    delta_BR: float,
    acc_gap: float | None = None,
    err_D: float | None = None,
    alpha: float | None = None,
    base_rate_0: float | None = None,
    base_rate_1: float | None = None,
) -> FairnessReport:
    """Rebuild a report from published aggregate numbers (e.g. rows reported elsewhere).

    Group errors are recovered from ``joint_err`` and ``acc_gap`` as
    ``(joint +/- gap) / 2``; which group carries the larger error is unknown,
    so group 0 is assigned the larger one. Missing fields become NaN.
    """
    nan = float("nan")
    gap = acc_gap if acc_gap is not None else nan
    e_hi = (joint_err + gap) / 2
    e_lo = (joint_err - gap) / 2
    return FairnessReport(
        err_D=err_D if err_D is not None else nan,
        err_D0=e_hi,
        err_D1=e_lo,
        joint_err=joint_err,
        acc_gap=gap,
        dp_gap=dp_gap,
        base_rate_0=base_rate_0 if base_rate_0 is not None else nan,
        base_rate_1=base_rate_1 if base_rate_1 is not None else nan,
        delta_BR=delta_BR,
        alpha=alpha if alpha is not None else nan,
        tpr_gap=None,
        fpr_gap=None,
        predictive_rate_gaps=[],
    )
