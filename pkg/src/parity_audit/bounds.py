"""Certificates for the fairness/utility tradeoff bounds and the
error-decomposition upper bound on accuracy parity.

Lower bounds on the joint error take a :class:`~parity_audit.metrics.FairnessReport`
so they work the same way for sampled datasets, exact populations and
published summary numbers.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, replace

import numpy as np

from .certificate import LOWER, UPPER, BoundCertificate, certify
from .dist import (
    DiscreteDistribution,
    bernoulli,
    hellinger_distance,
    js_distance,
    make_distribution,
    tv_distance,
)
from .errors import EmptyGroup, SupportMismatch, UndefinedOnSupport
from .metrics import FairnessReport, GroupedDataset, PredictionSet, base_rates, full_report, group_errors
from .oracle import FinitePopulation, all_deterministic, check_size, as_predictor, dp_gap_exact, joint_error

DP_TOL = 1e-9
DEFAULT_BINS_PER_DIM = 8
DEFAULT_MAX_CELLS = 4096


def dp_joint_error_certificate(report: FairnessReport, dp_tol: float = DP_TOL) -> BoundCertificate:
    """Joint error >= base-rate gap, for predictors satisfying demographic parity."""
    return certify(
        "dp_joint_error_lower_bound",
        report.joint_err,
        report.delta_BR,
        LOWER,
        assumptions={"demographic_parity": report.dp_gap <= dp_tol},
        details={"dp_gap": report.dp_gap},
    )


def max_group_error_certificate(report: FairnessReport, dp_tol: float = DP_TOL) -> BoundCertificate:
    """Under demographic parity some group errs at least half the base-rate gap."""
    return certify(
        "max_group_error_lower_bound",
        max(report.err_D0, report.err_D1),
        report.delta_BR / 2,
        LOWER,
        assumptions={"demographic_parity": report.dp_gap <= dp_tol},
        details={"dp_gap": report.dp_gap},
    )


def dp_gap_joint_error_certificate(report: FairnessReport) -> BoundCertificate:
    """Joint error >= base-rate gap minus DP gap; holds for every predictor."""
    return certify(
        "dp_gap_joint_error_lower_bound",
        report.joint_err,
        max(0.0, report.delta_BR - report.dp_gap),
        LOWER,
        details={"dp_gap": report.dp_gap, "delta_BR": report.delta_BR},
    )


def tv_error_certificate(
    ds: GroupedDataset, preds: PredictionSet, group: int, soft: bool = True
) -> BoundCertificate:
    """``d_TV(D_a(Y), D_a(Yhat)) <= err_a`` for one group."""
    mask = ds.groups == group
    if not mask.any():
        raise EmptyGroup(group)
    y = ds.labels[mask]
    yhat = preds.values(soft)[mask]
    err = float(np.abs(y - yhat).mean())
    tv = tv_distance(bernoulli(float(y.mean())), bernoulli(float(yhat.mean())))
    return certify(f"tv_error_lower_bound[group={group}]", err, tv, LOWER, details={"soft": soft})


def tv_error_population_certificate(pop: FinitePopulation, q, group: int) -> BoundCertificate:
    q = as_predictor(q, pop.n)
    j = pop.joint_given(group)
    err = float(j[:, 0] @ q + j[:, 1] @ (1 - q))
    pred_rate = float(pop.px_given(group) @ q)
    tv = tv_distance(pop.label_distribution(group), bernoulli(min(1.0, max(0.0, pred_rate))))
    return certify(f"tv_error_lower_bound[group={group}]", err, tv, LOWER)


def representation_certificates(
    label_dists: tuple[DiscreteDistribution, DiscreteDistribution],
    feature_dists: tuple[DiscreteDistribution, DiscreteDistribution],
    report: FairnessReport,
) -> list[BoundCertificate]:
    """Total-variation, Jensen-Shannon and Hellinger lower bounds on joint error.

    Each bound assumes the feature distance between groups does not exceed the
    label distance; when that fails the certificate is vacuous.
    """
    l0, l1 = label_dists
    f0, f1 = feature_dists
    if len(l0) != len(l1) or len(f0) != len(f1):
        raise SupportMismatch("each pair of distributions must share a support")
    out = []
    for name, dist_fn, squared in (
        ("tv", tv_distance, False),
        ("js", js_distance, True),
        ("hellinger", hellinger_distance, True),
    ):
        label_d = dist_fn(l0, l1)
        feature_d = dist_fn(f0, f1)
        diff = label_d - feature_d
        rhs = diff * diff / 2 if squared else diff
        out.append(certify(
            f"representation_{name}_lower_bound",
            report.joint_err,
            rhs,
            LOWER,
            assumptions={f"{name}_feature_distance_le_label_distance": feature_d <= label_d},
            details={"label_distance": label_d, "feature_distance": feature_d},
        ))
    return out


# Discretization of learned / continuous features for the representation bounds.

def discretize_features(
    features: np.ndarray,
    bins_per_dim: int = DEFAULT_BINS_PER_DIM,
    max_cells: int = DEFAULT_MAX_CELLS,
) -> np.ndarray:
    """Cell index per row on a shared equal-frequency grid.

    Quantile edges come from the pooled sample so both groups share the grid.
    The per-dimension bin count shrinks until ``bins ** dim <= max_cells``;
    with many dimensions that can mean a single bin.
    """
    z = np.asarray(features, dtype=float)
    if z.ndim == 1:
        z = z.reshape(-1, 1)
    n, d = z.shape
    if d == 0:
        return np.zeros(n, dtype=np.int64)
    b = bins_per_dim
    while b > 1 and b ** d > max_cells:
        b -= 1
    if b <= 1:
        return np.zeros(n, dtype=np.int64)
    qs = np.linspace(0, 1, b + 1)[1:-1]
    codes = np.zeros(n, dtype=np.int64)
    for k in range(d):
        edges = np.unique(np.quantile(z[:, k], qs))
        codes = codes * b + np.searchsorted(edges, z[:, k], side="right")
    _, cells = np.unique(codes, return_inverse=True)
    return cells.reshape(-1)


def group_cell_distributions(cells: np.ndarray, groups: np.ndarray) -> tuple[DiscreteDistribution, DiscreteDistribution]:
    cells = np.asarray(cells)
    groups = np.asarray(groups)
    size = int(cells.max()) + 1
    out = []
    for a in (0, 1):
        m = groups == a
        if not m.any():
            raise EmptyGroup(a)
        counts = np.bincount(cells[m], minlength=size).astype(float)
        out.append(make_distribution(counts / counts.sum()))
    return out[0], out[1]


def empirical_representation_certificates(
    features: np.ndarray,
    ds: GroupedDataset,
    preds: PredictionSet,
    report: FairnessReport | None = None,
    bins_per_dim: int = DEFAULT_BINS_PER_DIM,
    max_cells: int = DEFAULT_MAX_CELLS,
) -> list[BoundCertificate]:
    """Representation-bound certificates on a sample with learned features ``features``.

    The binned representation is refined by the hard prediction so that the
    prediction is a function of the cell; the bounds then hold exactly on the
    empirical distribution. Errors use hard labels.
    """
    if report is None:
        report = full_report(ds, preds, soft=False)
    cells = discretize_features(features, bins_per_dim, max_cells)
    refined = cells * 2 + preds.hard
    _, refined = np.unique(refined, return_inverse=True)
    fdists = group_cell_distributions(refined.reshape(-1), ds.groups)
    rates = base_rates(ds)
    ldists = (bernoulli(rates.base_rate_0), bernoulli(rates.base_rate_1))
    hard = replace(report, joint_err=group_errors(ds, preds, soft=False).joint_err)
    return representation_certificates(ldists, fdists, hard)


def report_for_population(pop: FinitePopulation, q) -> FairnessReport:
    """Exact population analogue of :func:`metrics.full_report` (no binning)."""
    q = as_predictor(q, pop.n)
    e0, e1, joint = joint_error(pop, q)
    alpha = pop.alpha
    return FairnessReport(
        err_D=(1 - alpha) * e0 + alpha * e1,
        err_D0=e0,
        err_D1=e1,
        joint_err=joint,
        acc_gap=abs(e0 - e1),
        dp_gap=dp_gap_exact(pop, q),
        base_rate_0=pop.base_rate(0),
        base_rate_1=pop.base_rate(1),
        delta_BR=pop.delta_BR,
        alpha=alpha,
        tpr_gap=None,
        fpr_gap=None,
        predictive_rate_gaps=[],
    )


# Error decomposition.

@dataclass(frozen=True, eq=False)
class GroupDecision:
    """Conditional-median decision of one group over all ``x``.

    ``on_support`` marks x-values where the group has mass; elsewhere the value
    is an extension: ``borrowed`` marks values taken from the other group's
    decision, the rest default to 0.
    """

    group: int
    values: np.ndarray
    on_support: np.ndarray
    borrowed: np.ndarray

    def extension_record(self) -> dict:
        return {
            "group": self.group,
            "borrowed_from_other_group": np.flatnonzero(self.borrowed).tolist(),
            "defaulted_to_zero": np.flatnonzero(~self.on_support & ~self.borrowed).tolist(),
        }


def _median_decision(pop: FinitePopulation, a: int) -> np.ndarray:
    eta = pop.eta(a)
    # Ties at exactly 1/2 resolve to 1.
    return np.where(np.isnan(eta), np.nan, (eta >= 0.5).astype(float))


def optimal_group_decision(pop: FinitePopulation, group: int) -> GroupDecision:
    if pop.group_mass(group) <= 0:
        raise EmptyGroup(group)
    own = _median_decision(pop, group)
    other = _median_decision(pop, 1 - group)
    on = ~np.isnan(own)
    borrowed = ~on & ~np.isnan(other)
    values = np.where(on, own, np.where(borrowed, other, 0.0))
    return GroupDecision(group, values.astype(int), on, borrowed)


def group_noise(pop: FinitePopulation, group: int) -> float:
    """Bayes absolute-loss error of the group: ``sum_x P(x|a) min(eta, 1-eta)``."""
    if pop.group_mass(group) <= 0:
        raise EmptyGroup(group)
    j = pop.joint_given(group)
    return float(np.minimum(j[:, 0], j[:, 1]).sum())


def disagreement(pop: FinitePopulation, group: int, h, h_prime) -> float:
    """``E_{D_a}|h(X) - h'(X)|``; NaN entries mark x-values where a predictor is undefined."""
    h = np.asarray(h, dtype=float)
    hp = np.asarray(h_prime, dtype=float)
    if len(h) != pop.n or len(hp) != pop.n:
        raise UndefinedOnSupport("predictors must cover every x-value")
    support = pop.support(group)
    if np.any(np.isnan(h[support])) or np.any(np.isnan(hp[support])):
        raise UndefinedOnSupport(f"predictor undefined on group-{group} support")
    px = pop.px_given(group)
    diff = np.abs(np.nan_to_num(h) - np.nan_to_num(hp))
    return float(px[support] @ diff[support])


@dataclass(frozen=True)
class DecompositionTerms:
    noise_0: float
    noise_1: float
    input_tv: float
    min_disagreement: float
    rhs_total: float

    def to_dict(self) -> dict:
        return asdict(self)


def decomposition_terms(pop: FinitePopulation) -> tuple[DecompositionTerms, dict]:
    h0 = optimal_group_decision(pop, 0)
    h1 = optimal_group_decision(pop, 1)
    n0, n1 = group_noise(pop, 0), group_noise(pop, 1)
    tv = tv_distance(pop.x_marginal(0), pop.x_marginal(1))
    md = min(disagreement(pop, 0, h0.values, h1.values), disagreement(pop, 1, h0.values, h1.values))
    terms = DecompositionTerms(n0, n1, tv, md, n0 + n1 + tv + md)
    ext = {"h0_star": h0.extension_record(), "h1_star": h1.extension_record()}
    return terms, ext


def error_gap_certificate(pop: FinitePopulation, h) -> tuple[DecompositionTerms, BoundCertificate]:
    """``|err_0(h) - err_1(h)| <= noise_0 + noise_1 + d_TV(X) + min disagreement``."""
    q = np.asarray(h, dtype=float)
    if len(q) != pop.n or np.any(np.isnan(q)):
        raise UndefinedOnSupport("h must be defined on every x-value")
    q = as_predictor(q, pop.n)
    terms, ext = decomposition_terms(pop)
    e0, e1, _ = joint_error(pop, q)
    cert = certify(
        "error_gap_decomposition",
        abs(e0 - e1),
        terms.rhs_total,
        UPPER,
        details={"terms": terms.to_dict(), "extension": ext},
    )
    return terms, cert


@dataclass(frozen=True)
class ErrorGapSweep:
    predictors_checked: int
    violations: int
    worst_margin: float
    worst_predictor: list[int]
    terms: DecompositionTerms

    def to_dict(self) -> dict:
        d = asdict(self)
        d["terms"] = self.terms.to_dict()
        return d


def error_gap_exhaustive(pop: FinitePopulation, max_n: int = 16, slack: float = 1e-9) -> ErrorGapSweep:
    """Check the decomposition bound for all ``2^n`` deterministic predictors."""
    check_size(pop, max_n)
    terms, _ = decomposition_terms(pop)
    H = all_deterministic(pop.n)
    errs = []
    for a in (0, 1):
        j = pop.joint_given(a)
        errs.append(H @ j[:, 0] + (1 - H) @ j[:, 1])
    lhs = np.abs(errs[0] - errs[1])
    margin = terms.rhs_total - lhs
    worst = int(np.argmin(margin))
    return ErrorGapSweep(
        predictors_checked=len(H),
        violations=int((margin < -slack).sum()),
        worst_margin=float(margin[worst]),
        worst_predictor=H[worst].astype(int).tolist(),
        terms=terms,
    )


def is_noiseless(pop: FinitePopulation, tol: float = 0.0) -> bool:
    return group_noise(pop, 0) <= tol and group_noise(pop, 1) <= tol


__all__ = [
    "dp_joint_error_certificate",
    "max_group_error_certificate",
    "dp_gap_joint_error_certificate",
    "tv_error_certificate",
    "tv_error_population_certificate",
    "representation_certificates",
    "empirical_representation_certificates",
    "discretize_features",
    "group_cell_distributions",
    "report_for_population",
    "GroupDecision",
    "optimal_group_decision",
    "group_noise",
    "disagreement",
    "DecompositionTerms",
    "decomposition_terms",
    "error_gap_certificate",
    "ErrorGapSweep",
    "error_gap_exhaustive",
    "is_noiseless",
]
