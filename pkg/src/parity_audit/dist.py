"""Finite discrete distributions and the five f-divergences.

Every divergence is evaluated generically as ``sum_i q_i * f(p_i / q_i)`` from
its generator ``f``; two-outcome closed forms are provided separately so that
the two routes can check each other.

Conventions: ``0 * f(0/0) = 0``. Where ``q_i = 0 < p_i`` the term is the limit
``p_i * lim_{t->inf} f(t)/t``, which is ``+inf`` for KL. Where ``p_i = 0 < q_i``
the term is ``q_i * f(0+)``, which is ``+inf`` for reverse KL.

Jensen-Shannon uses base-2 logarithms so that it lies in ``[0, 1]``. KL and
reverse KL default to natural logarithms; pass ``kl_base`` to change that.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

from .certificate import UPPER, BoundCertificate, certify
from .errors import NegativeMass, NotNormalized, SupportMismatch

SUM_TOL = 1e-9
EQUAL_TOL = 1e-9
INEQUALITY_SLACK = 1e-12
# Beyond this ratio q * f(p/q) is replaced by its limit; relative error < 1e-297.
_LARGE_RATIO = 1e300


class DivergenceKind(str, enum.Enum):
    KL = "kl"
    REVERSE_KL = "reverse_kl"
    JENSEN_SHANNON = "js"
    SQUARED_HELLINGER = "squared_hellinger"
    TOTAL_VARIATION = "tv"

    @property
    def symmetric(self) -> bool:
        return self in (
            DivergenceKind.JENSEN_SHANNON,
            DivergenceKind.SQUARED_HELLINGER,
            DivergenceKind.TOTAL_VARIATION,
        )


ALL_KINDS = tuple(DivergenceKind)


@dataclass(frozen=True, eq=False)
class DiscreteDistribution:
    """A validated probability vector. Build with :func:`make_distribution`."""

    probs: np.ndarray

    def __len__(self) -> int:
        return len(self.probs)

    def __getitem__(self, i):
        return self.probs[i]

    def equals(self, other: "DiscreteDistribution", tol: float = EQUAL_TOL) -> bool:
        return len(self) == len(other) and bool(np.all(np.abs(self.probs - other.probs) <= tol))

    def __repr__(self) -> str:
        return f"DiscreteDistribution({self.probs.tolist()})"


def make_distribution(weights) -> DiscreteDistribution:
    """Validate ``weights`` as a distribution. Never renormalizes."""
    arr = np.array(weights, dtype=float).reshape(-1)
    if arr.size == 0:
        raise NotNormalized(0.0)
    if np.any(~np.isfinite(arr)):
        raise NotNormalized(float(arr.sum()))
    if np.any(arr < 0):
        raise NegativeMass(f"negative entries at {np.flatnonzero(arr < 0).tolist()}")
    total = float(arr.sum())
    if abs(total - 1.0) > SUM_TOL:
        raise NotNormalized(total)
    arr.setflags(write=False)
    return DiscreteDistribution(arr)


def normalize(counts) -> DiscreteDistribution:
    """Turn nonnegative counts (e.g. empirical frequencies) into a distribution."""
    arr = np.asarray(counts, dtype=float).reshape(-1)
    if np.any(arr < 0):
        raise NegativeMass("counts must be nonnegative")
    total = arr.sum()
    if total <= 0:
        raise NotNormalized(float(total), what="counts")
    return make_distribution(arr / total)


def bernoulli(p: float) -> DiscreteDistribution:
    """Two-outcome distribution ``[P(0), P(1)] = [1 - p, p]``."""
    return make_distribution([1.0 - p, p])


# Generators. Each entry is (f on t > 0, f(0+), lim_{t->inf} f(t)/t), natural log
# except Jensen-Shannon which is in bits.

def _kl(t):
    return t * np.log(t)


def _reverse_kl(t):
    return -np.log(t)


def _js(t):
    # t log t - (t+1) log((t+1)/2), rearranged to avoid inf - inf for huge t
    t = np.asarray(t, dtype=float)
    big = t > 1.0
    ratio = np.where(big, 2.0 / (1.0 + 1.0 / np.where(big, t, 1.0)), 2.0 * t / (t + 1.0))
    return 0.5 * (t * np.log2(ratio) + np.log2(2.0 / (t + 1.0)))


def _hellinger(t):
    return (1.0 - np.sqrt(t)) ** 2 / 2.0


def _tv(t):
    return np.abs(t - 1.0) / 2.0


_GENERATORS: dict[DivergenceKind, tuple[Callable, float, float]] = {
    DivergenceKind.KL: (_kl, 0.0, math.inf),
    DivergenceKind.REVERSE_KL: (_reverse_kl, math.inf, 0.0),
    DivergenceKind.JENSEN_SHANNON: (_js, 0.5, 0.5),
    DivergenceKind.SQUARED_HELLINGER: (_hellinger, 0.5, 0.5),
    DivergenceKind.TOTAL_VARIATION: (_tv, 0.5, 0.5),
}


def generator(kind: DivergenceKind) -> Callable:
    return _GENERATORS[DivergenceKind(kind)][0]


def _check_support(p: DiscreteDistribution, q: DiscreteDistribution) -> None:
    if len(p) != len(q):
        raise SupportMismatch(f"outcome counts differ: {len(p)} vs {len(q)}")


def f_divergence(
    kind: DivergenceKind,
    p: DiscreteDistribution,
    q: DiscreteDistribution,
    *,
    kl_base: float = math.e,
) -> float:
    """``D_f(p || q)`` evaluated from the generator of ``kind``.

    Returns a nonnegative float, possibly ``inf`` for the KL pair.
    """
    kind = DivergenceKind(kind)
    _check_support(p, q)
    f, f_at_zero, slope_at_inf = _GENERATORS[kind]
    pv, qv = p.probs, q.probs
    if np.array_equal(pv, qv):
        return 0.0
    total = 0.0
    both = (pv > 0) & (qv > 0)
    if np.any(both):
        with np.errstate(over="ignore", under="ignore"):
            t = pv / np.where(both, qv, 1.0)
        # Ratios that overflow or underflow are taken from the limit of the term,
        # with the log of the ratio recovered exactly where KL needs it.
        over = both & (t > _LARGE_RATIO)
        under = both & (t == 0)
        regular = both & ~over & ~under
        if np.any(regular):
            total += float(np.sum(qv[regular] * f(t[regular])))
        if np.any(over):
            if kind is DivergenceKind.KL:
                total += float(np.sum(pv[over] * (np.log(pv[over]) - np.log(qv[over]))))
            else:
                total += slope_at_inf * float(pv[over].sum())
        if np.any(under):
            if kind is DivergenceKind.REVERSE_KL:
                total += float(np.sum(qv[under] * (np.log(qv[under]) - np.log(pv[under]))))
            else:
                total += f_at_zero * float(qv[under].sum())
    only_q = (pv == 0) & (qv > 0)
    if np.any(only_q):
        total += f_at_zero * float(qv[only_q].sum())
    only_p = (pv > 0) & (qv == 0)
    if np.any(only_p):
        total += slope_at_inf * float(pv[only_p].sum())
    if kind in (DivergenceKind.KL, DivergenceKind.REVERSE_KL):
        total /= math.log(kl_base)
    # Round-off can push a zero divergence a hair below zero.
    return max(total, 0.0)


def _xlogx_over(a: float, b: float) -> float:
    """``a * ln(a / b)`` with the usual conventions."""
    if a == 0.0:
        return 0.0
    if b == 0.0:
        return math.inf
    return a * math.log(a / b)


def _binary_entropy_bits(p: float) -> float:
    return -sum(x * math.log2(x) for x in (p, 1.0 - p) if x > 0.0)


def bernoulli_divergence_closed_form(
    kind: DivergenceKind, p: float, q: float, *, kl_base: float = math.e
) -> float:
    """Divergence between ``Bern(p)`` and ``Bern(q)`` without using generators."""
    kind = DivergenceKind(kind)
    if kind is DivergenceKind.TOTAL_VARIATION:
        return abs(p - q)
    if kind is DivergenceKind.SQUARED_HELLINGER:
        return max(0.0, 1.0 - math.sqrt(p * q) - math.sqrt((1.0 - p) * (1.0 - q)))
    if kind is DivergenceKind.JENSEN_SHANNON:
        m = (p + q) / 2.0
        value = _binary_entropy_bits(m) - (_binary_entropy_bits(p) + _binary_entropy_bits(q)) / 2.0
        return max(0.0, value)
    if kind is DivergenceKind.REVERSE_KL:
        p, q = q, p
    value = _xlogx_over(p, q) + _xlogx_over(1.0 - p, 1.0 - q)
    return max(0.0, value / math.log(kl_base))


def tv_distance(p: DiscreteDistribution, q: DiscreteDistribution) -> float:
    return f_divergence(DivergenceKind.TOTAL_VARIATION, p, q)


def js_distance(p: DiscreteDistribution, q: DiscreteDistribution) -> float:
    return math.sqrt(f_divergence(DivergenceKind.JENSEN_SHANNON, p, q))


def hellinger_distance(p: DiscreteDistribution, q: DiscreteDistribution) -> float:
    return math.sqrt(f_divergence(DivergenceKind.SQUARED_HELLINGER, p, q))


def divergence_table(p: DiscreteDistribution, q: DiscreteDistribution) -> dict[str, float]:
    """All five divergences plus the three derived distances."""
    table = {kind.value: f_divergence(kind, p, q) for kind in ALL_KINDS}
    table["tv_distance"] = tv_distance(p, q)
    table["js_distance"] = js_distance(p, q)
    table["hellinger_distance"] = hellinger_distance(p, q)
    return table


Mapping = Union[Sequence[int], np.ndarray, Callable[[int], int]]


def pushforward(p: DiscreteDistribution, mapping: Mapping, n_out: int | None = None) -> DiscreteDistribution:
    """Distribution of ``mapping(X)`` for ``X ~ p``."""
    if callable(mapping):
        targets = np.array([mapping(i) for i in range(len(p))], dtype=int)
    else:
        targets = np.asarray(mapping, dtype=int)
    if len(targets) != len(p):
        raise SupportMismatch(f"map covers {len(targets)} outcomes, distribution has {len(p)}")
    if np.any(targets < 0):
        raise SupportMismatch("map targets must be nonnegative outcome indices")
    size = int(targets.max()) + 1 if n_out is None else n_out
    out = np.bincount(targets, weights=p.probs, minlength=size)
    return make_distribution(out)


@dataclass(frozen=True, eq=False)
class StochasticKernel:
    """Row-stochastic matrix; row ``i`` is the output distribution for input ``i``."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] == 0 or m.shape[1] == 0:
            raise SupportMismatch("kernel must be a nonempty 2-D matrix")
        if np.any(m < 0):
            raise NegativeMass("kernel has negative entries")
        sums = m.sum(axis=1)
        bad = np.flatnonzero(np.abs(sums - 1.0) > SUM_TOL)
        if bad.size:
            raise NotNormalized(float(sums[bad[0]]), what=f"kernel row {int(bad[0])}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def n_in(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_out(self) -> int:
        return self.matrix.shape[1]

    @classmethod
    def deterministic(cls, mapping: Sequence[int], n_out: int | None = None) -> "StochasticKernel":
        targets = np.asarray(mapping, dtype=int)
        size = int(targets.max()) + 1 if n_out is None else n_out
        m = np.zeros((len(targets), size))
        m[np.arange(len(targets)), targets] = 1.0
        return cls(m)


def apply_kernel(k: StochasticKernel, p: DiscreteDistribution) -> DiscreteDistribution:
    if k.n_in != len(p):
        raise SupportMismatch(f"kernel takes {k.n_in} inputs, distribution has {len(p)}")
    return make_distribution(p.probs @ k.matrix)


def data_processing_certificate(
    kind: DivergenceKind,
    k: StochasticKernel,
    p: DiscreteDistribution,
    q: DiscreteDistribution,
) -> BoundCertificate:
    """Check ``D_f(kp || kq) <= D_f(p || q)`` for one kernel and pair."""
    _check_support(p, q)
    kind = DivergenceKind(kind)
    lhs = f_divergence(kind, apply_kernel(k, p), apply_kernel(k, q))
    rhs = f_divergence(kind, p, q)
    return certify(f"data_processing[{kind.value}]", lhs, rhs, UPPER, slack=INEQUALITY_SLACK)
