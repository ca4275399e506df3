"""Exact ground truth on small finite populations.

A population is a pmf over ``(x, y, a)`` with ``x`` in ``range(n)``. Predictors
are vectors ``q`` with ``q[x] = P(Yhat = 1 | X = x)``; they never see ``a``.

The minimum joint error under a DP-gap budget is an LP over the box
``[0, 1]^n`` cut by the slab ``|sum_x d[x] q[x]| <= budget``. Any vertex of that
polytope has at most one fractional coordinate, so enumerating every
deterministic ``q`` and, per coordinate, the value that puts the signed gap on
a slab face visits every vertex.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .dist import DiscreteDistribution, bernoulli, make_distribution
from .errors import EmptyGroup, LengthMismatch, MassNotNormalized, NegativeMass, TooLarge

DEFAULT_MAX_N = 16
FEAS_TOL = 1e-9
TIE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class FinitePopulation:
    """Exact joint pmf; ``mass[x, y, a]``."""

    mass: np.ndarray

    def __post_init__(self):
        m = np.array(self.mass, dtype=float)
        if m.ndim != 3 or m.shape[1:] != (2, 2) or m.shape[0] == 0:
            raise ValueError(f"mass must have shape (n, 2, 2), got {m.shape}")
        if np.any(m < 0):
            raise NegativeMass("population has negative mass")
        total = float(m.sum())
        if abs(total - 1.0) > 1e-9:
            raise MassNotNormalized(total)
        for a in (0, 1):
            if m[:, :, a].sum() <= 0:
                raise EmptyGroup(a)
        m.setflags(write=False)
        object.__setattr__(self, "mass", m)

    @classmethod
    def from_entries(cls, n: int, entries: Iterable[tuple[int, int, int, float]]) -> "FinitePopulation":
        m = np.zeros((n, 2, 2))
        for x, y, a, w in entries:
            m[x, y, a] += w
        return cls(m)

    @property
    def n(self) -> int:
        return self.mass.shape[0]

    def group_mass(self, a: int) -> float:
        return float(self.mass[:, :, a].sum())

    @property
    def alpha(self) -> float:
        return self.group_mass(1)

    def joint_given(self, a: int) -> np.ndarray:
        """``P(x, y | A=a)`` as an ``(n, 2)`` array."""
        return self.mass[:, :, a] / self.group_mass(a)

    def px_given(self, a: int) -> np.ndarray:
        return self.joint_given(a).sum(axis=1)

    def x_marginal(self, a: int) -> DiscreteDistribution:
        p = self.px_given(a)
        return make_distribution(p / p.sum())

    def base_rate(self, a: int) -> float:
        return float(self.joint_given(a)[:, 1].sum())

    def label_distribution(self, a: int) -> DiscreteDistribution:
        return bernoulli(min(1.0, max(0.0, self.base_rate(a))))

    @property
    def delta_BR(self) -> float:
        return abs(self.base_rate(0) - self.base_rate(1))

    def eta(self, a: int) -> np.ndarray:
        """``P(Y=1 | x, A=a)``; NaN where ``x`` has no group-``a`` mass."""
        j = self.mass[:, :, a]
        tot = j.sum(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(tot > 0, j[:, 1] / np.where(tot > 0, tot, 1.0), np.nan)

    def support(self, a: int) -> np.ndarray:
        return self.mass[:, :, a].sum(axis=1) > 0

    def entries(self) -> list[tuple[int, int, int, float]]:
        return [
            (x, y, a, float(self.mass[x, y, a]))
            for x in range(self.n) for y in (0, 1) for a in (0, 1)
            if self.mass[x, y, a] > 0
        ]


def as_predictor(q, n: int) -> np.ndarray:
    """Validate a randomized predictor ``q`` of length ``n``."""
    arr = np.asarray(q, dtype=float).reshape(-1)
    if len(arr) != n:
        raise LengthMismatch(f"predictor has {len(arr)} entries, population has n={n}")
    if np.any((arr < 0) | (arr > 1)) or np.any(~np.isfinite(arr)):
        raise ValueError("predictor values must lie in [0, 1]")
    return arr


def is_deterministic(q) -> bool:
    q = np.asarray(q)
    return bool(np.all((q == 0) | (q == 1)))


def group_error(pop: FinitePopulation, q, a: int) -> float:
    q = as_predictor(q, pop.n)
    j = pop.joint_given(a)
    return float(j[:, 0] @ q + j[:, 1] @ (1.0 - q))


def joint_error(pop: FinitePopulation, q) -> tuple[float, float, float]:
    """``(err_0, err_1, err_0 + err_1)`` of predictor ``q``."""
    e0 = group_error(pop, q, 0)
    e1 = group_error(pop, q, 1)
    return e0, e1, e0 + e1


def signed_dp_gap(pop: FinitePopulation, q) -> float:
    q = as_predictor(q, pop.n)
    return float((pop.px_given(0) - pop.px_given(1)) @ q)


def dp_gap_exact(pop: FinitePopulation, q) -> float:
    return abs(signed_dp_gap(pop, q))


def all_deterministic(n: int) -> np.ndarray:
    """Every 0/1 vector of length ``n`` in lexicographic order (x=0 most significant)."""
    codes = np.arange(2 ** n, dtype=np.int64)
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    return ((codes[:, None] >> shifts) & 1).astype(float)


@dataclass(frozen=True, eq=False)
class OracleResult:
    min_joint_error: float
    argmin: np.ndarray
    num_vertices_examined: int
    delta_BR: float
    gap_budget: float

    def to_dict(self) -> dict:
        return {
            "min_joint_error": self.min_joint_error,
            "argmin": self.argmin.tolist(),
            "num_vertices_examined": self.num_vertices_examined,
            "delta_BR": self.delta_BR,
            "gap_budget": self.gap_budget,
        }


def check_size(pop: FinitePopulation, max_n: int) -> None:
    if pop.n > max_n:
        raise TooLarge(pop.n, max_n)


def _lp_coefficients(pop: FinitePopulation):
    j0, j1 = pop.joint_given(0), pop.joint_given(1)
    const = float(j0[:, 1].sum() + j1[:, 1].sum())
    w = (j0[:, 0] - j0[:, 1]) + (j1[:, 0] - j1[:, 1])
    d = pop.px_given(0) - pop.px_given(1)
    return const, w, d


def min_joint_error_dp(pop: FinitePopulation, gap_budget: float = 0.0, max_n: int = DEFAULT_MAX_N) -> OracleResult:
    """Exact ``min err_0(q) + err_1(q)`` subject to ``dp_gap_exact(q) <= gap_budget``."""
    if gap_budget < 0:
        raise ValueError("gap_budget must be nonnegative")
    check_size(pop, max_n)
    n = pop.n
    const, w, d = _lp_coefficients(pop)
    bits = all_deterministic(n)
    base_obj = const + bits @ w
    base_gap = bits @ d

    cand_obj = []
    cand_q = []  # (mask rows, coordinate or -1, fractional values)
    feasible = np.abs(base_gap) <= gap_budget + FEAS_TOL
    cand_obj.append(base_obj[feasible])
    cand_q.append((np.flatnonzero(feasible), -1, None))

    signs = (1.0,) if gap_budget == 0 else (1.0, -1.0)
    for x in range(n):
        if abs(d[x]) <= 1e-15:
            continue
        rows = np.flatnonzero(bits[:, x] == 0)  # bit x is overwritten; skip the twin
        rest = base_gap[rows]
        for sign in signs:
            t = (sign * gap_budget - rest) / d[x]
            ok = (t > FEAS_TOL) & (t < 1 - FEAS_TOL)
            if not ok.any():
                continue
            t = t[ok]
            r = rows[ok]
            gap = rest[ok] + d[x] * t
            keep = np.abs(gap) <= gap_budget + FEAS_TOL
            cand_obj.append(base_obj[r[keep]] + w[x] * t[keep])
            cand_q.append((r[keep], x, t[keep]))

    objs = np.concatenate(cand_obj)
    best = float(objs.min())
    # Lexicographically smallest q among (near-)optimal vertices.
    tied = []
    for obj, (r, x, t) in zip(cand_obj, cand_q):
        hit = obj <= best + TIE_TOL
        if not hit.any():
            continue
        qs = bits[r[hit]].copy()
        if x >= 0:
            qs[:, x] = t[hit]
        tied.append(qs)
    tied = np.concatenate(tied)
    order = np.lexsort(tied.T[::-1])
    argmin = tied[order[0]]
    return OracleResult(
        min_joint_error=best,
        argmin=argmin,
        num_vertices_examined=int(objs.size),
        delta_BR=pop.delta_BR,
        gap_budget=float(gap_budget),
    )


def unconstrained_min_joint_error(pop: FinitePopulation) -> float:
    """Best joint error of any predictor of ``x`` alone: per-x minimum of the two labels' pooled mass."""
    j0, j1 = pop.joint_given(0), pop.joint_given(1)
    pooled = j0 + j1
    return float(np.minimum(pooled[:, 0], pooled[:, 1]).sum())


def tightness_instance(p0: float, p1: float, alpha: float = 0.5) -> FinitePopulation:
    """Noiseless, group-separable population with base rates ``(p0, p1)``.

    Each ``x`` carries a single ``(y, a)`` cell, so the optimal DP predictor
    keeps the low-base-rate group perfect and demotes ``|p0 - p1|`` of the
    other group's positives; its joint error equals the lower bound exactly.
    """
    if not (0 <= p0 <= 1 and 0 <= p1 <= 1):
        raise ValueError("base rates must lie in [0, 1]")
    cells = [
        (1, 0, (1 - alpha) * p0),
        (0, 0, (1 - alpha) * (1 - p0)),
        (1, 1, alpha * p1),
        (0, 1, alpha * (1 - p1)),
    ]
    cells = [c for c in cells if c[2] > 0]
    return FinitePopulation.from_entries(len(cells), [(x, y, a, w) for x, (y, a, w) in enumerate(cells)])


def dp_frontier(pop: FinitePopulation, budgets, max_n: int = DEFAULT_MAX_N) -> list[tuple[float, float]]:
    budgets = [float(b) for b in budgets]
    if any(b < 0 for b in budgets):
        raise ValueError("budgets must be nonnegative")
    if budgets != sorted(budgets):
        raise ValueError("budgets must be sorted ascending")
    check_size(pop, max_n)
    return [(b, min_joint_error_dp(pop, b, max_n).min_joint_error) for b in budgets]


@dataclass
class ImpossibilityReport:
    vacuous: bool
    delta_BR: float
    examined: int = 0
    excluded_perfect: int = 0
    excluded_inverted: int = 0
    counterexamples: list[list[int]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "vacuous": self.vacuous,
            "delta_BR": self.delta_BR,
            "examined": self.examined,
            "excluded_perfect": self.excluded_perfect,
            "excluded_inverted": self.excluded_inverted,
            "counterexamples": self.counterexamples,
        }


def _rate(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(den > 0, num / np.where(den > 0, den, 1.0), np.nan)


def _parity(r0: np.ndarray, r1: np.ndarray, tol: float) -> np.ndarray:
    """Equal within ``tol``; undefined on both sides counts as equal, on one side as unequal."""
    n0, n1 = np.isnan(r0), np.isnan(r1)
    close = np.abs(np.nan_to_num(r0) - np.nan_to_num(r1)) <= tol
    return (n0 & n1) | (~n0 & ~n1 & close)


def impossibility_sweep(pop: FinitePopulation, tol: float = 1e-9, max_n: int = DEFAULT_MAX_N) -> ImpossibilityReport:
    """Look for a non-perfect deterministic predictor with both positive-rate
    and predictive-rate parity when base rates differ.

    Besides the perfect predictor, the perfectly inverted one (``h = 1 - Y``
    almost surely) is excluded too: it has zero true-positive rate, unit
    false-positive rate and zero precision in both groups, so it satisfies both
    parities. It can only exist on noiseless populations.
    """
    check_size(pop, max_n)
    report = ImpossibilityReport(vacuous=pop.delta_BR <= tol, delta_BR=pop.delta_BR)
    if report.vacuous:
        return report
    H = all_deterministic(pop.n)
    report.examined = len(H)
    tpr, fpr, ppv, npv, err = [], [], [], [], []
    for a in (0, 1):
        j = pop.joint_given(a)
        pos, neg = j[:, 1], j[:, 0]
        tpr.append(_rate(H @ pos, np.full(len(H), pos.sum())))
        fpr.append(_rate(H @ neg, np.full(len(H), neg.sum())))
        ppv.append(_rate(H @ pos, H @ (pos + neg)))
        npv.append(_rate((1 - H) @ pos, (1 - H) @ (pos + neg)))
        err.append(H @ neg + (1 - H) @ pos)
    perfect = (err[0] <= tol) & (err[1] <= tol)
    inverted = (err[0] >= 1 - tol) & (err[1] >= 1 - tol)
    both = (
        _parity(tpr[0], tpr[1], tol) & _parity(fpr[0], fpr[1], tol)
        & _parity(ppv[0], ppv[1], tol) & _parity(npv[0], npv[1], tol)
    )
    report.excluded_perfect = int(perfect.sum())
    report.excluded_inverted = int(inverted.sum())
    bad = both & ~perfect & ~inverted
    report.counterexamples = H[bad].astype(int).tolist()
    return report
