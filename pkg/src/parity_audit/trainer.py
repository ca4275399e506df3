"""Feed-forward classifier with an adversarial group head, trained by
gradient reversal.

Architecture: ReLU encoder ``X -> Z`` (default widths 500, 200, 100), a
logistic target head on ``Z`` and an adversary ``Z -> ReLU(50) -> logistic``
predicting the group. Backpropagation is written out by hand in numpy.

Objective per minibatch: ``CE(target) + rho * CE(adversary)``. The target head
descends ``CE(target)``, the adversary descends ``rho * CE(adversary)`` and the
encoder descends ``CE(target) - rho * CE(adversary)`` (gradient reversal).

Two update schedules share these gradients. ``alternating`` (default) first
steps the adversary on the batch, then steps encoder and head against the
updated adversary. ``simultaneous`` applies all three from one backward pass;
it tends to oscillate for large ``rho``.
"""
from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from .bounds import dp_gap_joint_error_certificate
from .certificate import BoundCertificate, from_dict as certificate_from_dict
from .errors import AuditError, DimensionMismatch, Diverged, EmptyBatch, NonFiniteLoss
from .metrics import GroupedDataset, PredictionSet, full_report

log = logging.getLogger(__name__)

THREADS_ENV = "PARITY_AUDIT_THREADS"
SIMULTANEOUS = "simultaneous"
ALTERNATING = "alternating"


@dataclass(frozen=True)
class TrainConfig:
    hidden_sizes: tuple[int, ...] = (500, 200, 100)
    adversary_hidden: int = 50
    rho: float = 0.0
    learning_rate: float = 0.01
    epochs: int = 20
    batch_size: int = 128
    seed: int = 0
    adversarial_mode: str = ALTERNATING
    holdout_fraction: float = 0.2
    threshold: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        if not self.hidden_sizes or any(h <= 0 for h in self.hidden_sizes):
            raise ValueError("hidden_sizes must be positive integers")
        if self.adversary_hidden <= 0:
            raise ValueError("adversary_hidden must be positive")
        if self.rho < 0:
            raise ValueError("rho must be nonnegative")
        if self.learning_rate <= 0 or self.epochs <= 0 or self.batch_size <= 0:
            raise ValueError("learning_rate, epochs and batch_size must be positive")
        if self.adversarial_mode not in (SIMULTANEOUS, ALTERNATING):
            raise ValueError(f"unknown adversarial_mode {self.adversarial_mode!r}")


@dataclass
class MLPModel:
    """Parameters keyed by name; ``enc_*`` encoder, ``head_*`` target head, ``adv_*`` adversary."""

    params: dict[str, np.ndarray]
    input_dim: int
    hidden_sizes: tuple[int, ...]
    adversary_hidden: int

    @property
    def n_encoder_layers(self) -> int:
        return len(self.hidden_sizes)

    def copy(self) -> "MLPModel":
        return replace(self, params={k: v.copy() for k, v in self.params.items()})

    def block(self, name: str) -> str:
        return name.split("_", 1)[0]


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    s = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-s, s, size=(fan_in, fan_out))


def init_model(input_dim: int, config: TrainConfig, seed: Optional[int] = None) -> MLPModel:
    """Seeded Glorot-uniform weights, zero biases.

    Encoder/head and adversary draw from separate child streams so that
    dropping the adversary leaves the rest of the initialization unchanged.
    """
    seed = config.seed if seed is None else seed
    main_ss, adv_ss = np.random.SeedSequence([seed, 1]).spawn(2)
    rng = np.random.default_rng(main_ss)
    params = {}
    widths = [input_dim, *config.hidden_sizes]
    for i in range(len(config.hidden_sizes)):
        params[f"enc_W{i}"] = _glorot(rng, widths[i], widths[i + 1])
        params[f"enc_b{i}"] = np.zeros(widths[i + 1])
    params["head_W"] = _glorot(rng, widths[-1], 1)
    params["head_b"] = np.zeros(1)
    arng = np.random.default_rng(adv_ss)
    params["adv_W0"] = _glorot(arng, widths[-1], config.adversary_hidden)
    params["adv_b0"] = np.zeros(config.adversary_hidden)
    params["adv_W1"] = _glorot(arng, config.adversary_hidden, 1)
    params["adv_b1"] = np.zeros(1)
    return MLPModel(params, input_dim, config.hidden_sizes, config.adversary_hidden)


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _bce_with_logits(logit, target):
    # mean of softplus(l) - t*l, stable for large |l|
    return float(np.mean(np.logaddexp(0.0, logit) - target * logit))


def _encode(model: MLPModel, X: np.ndarray):
    acts = [X]
    pres = []
    h = X
    for i in range(model.n_encoder_layers):
        pre = h @ model.params[f"enc_W{i}"] + model.params[f"enc_b{i}"]
        h = np.maximum(pre, 0.0)
        pres.append(pre)
        acts.append(h)
    return acts, pres


def forward(model: MLPModel, features: np.ndarray):
    """Return ``(target_score, adversary_score, Z)`` for a batch of rows."""
    X = np.asarray(features, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.shape[1] != model.input_dim:
        raise DimensionMismatch(f"model expects {model.input_dim} features, got {X.shape[1]}")
    acts, _ = _encode(model, X)
    Z = acts[-1]
    p = model.params
    target = _sigmoid(Z @ p["head_W"] + p["head_b"]).reshape(-1)
    hidden = np.maximum(Z @ p["adv_W0"] + p["adv_b0"], 0.0)
    adv = _sigmoid(hidden @ p["adv_W1"] + p["adv_b1"]).reshape(-1)
    return target, adv, Z


@dataclass
class LossBreakdown:
    total: float
    target: float
    adversary: float


def loss_and_gradients(
    model: MLPModel,
    features: np.ndarray,
    labels: np.ndarray,
    groups: np.ndarray,
    rho: float,
    adversary: bool = True,
) -> tuple[LossBreakdown, dict[str, np.ndarray]]:
    """Loss ``CE_y + rho * CE_a`` (batch means) and the update directions.

    ``grads`` holds, per block: ``d CE_y`` for ``head_*``, ``d (rho * CE_a)``
    for ``adv_*`` and ``d (CE_y - rho * CE_a)`` for ``enc_*``. With
    ``adversary=False`` the adversary is ablated entirely.
    """
    X = np.asarray(features, dtype=float)
    if X.ndim != 2 or len(X) == 0:
        raise EmptyBatch("batch must contain at least one row")
    if X.shape[1] != model.input_dim:
        raise DimensionMismatch(f"model expects {model.input_dim} features, got {X.shape[1]}")
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    y = np.asarray(labels, dtype=float).reshape(-1, 1)
    a = np.asarray(groups, dtype=float).reshape(-1, 1)
    B = len(X)
    p = model.params
    acts, pres = _encode(model, X)
    Z = acts[-1]

    logit_y = Z @ p["head_W"] + p["head_b"]
    ce_y = _bce_with_logits(logit_y, y)
    g_y = (_sigmoid(logit_y) - y) / B
    grads = {"head_W": Z.T @ g_y, "head_b": g_y.sum(axis=0)}
    dZ = g_y @ p["head_W"].T

    ce_a = 0.0
    if adversary:
        pre_a = Z @ p["adv_W0"] + p["adv_b0"]
        h_a = np.maximum(pre_a, 0.0)
        logit_a = h_a @ p["adv_W1"] + p["adv_b1"]
        ce_a = _bce_with_logits(logit_a, a)
        g_a = (_sigmoid(logit_a) - a) / B
        g_adv = rho * g_a
        grads["adv_W1"] = h_a.T @ g_adv
        grads["adv_b1"] = g_adv.sum(axis=0)
        d_pre_a = (g_adv @ p["adv_W1"].T) * (pre_a > 0)
        grads["adv_W0"] = Z.T @ d_pre_a
        grads["adv_b0"] = d_pre_a.sum(axis=0)
        dZ = dZ - d_pre_a @ p["adv_W0"].T

    delta = dZ
    for i in range(model.n_encoder_layers - 1, -1, -1):
        delta = delta * (pres[i] > 0)
        grads[f"enc_W{i}"] = acts[i].T @ delta
        grads[f"enc_b{i}"] = delta.sum(axis=0)
        if i:
            delta = delta @ p[f"enc_W{i}"].T

    total = ce_y + rho * ce_a
    if not np.isfinite(total):
        raise NonFiniteLoss(f"loss is {total}")
    return LossBreakdown(total, ce_y, ce_a), grads


@dataclass
class SweepRow:
    rho: float
    err_D: float
    joint_err: float
    acc_gap: float
    dp_gap: float
    err_D0: float = float("nan")
    err_D1: float = float("nan")
    delta_BR: float = float("nan")
    certificates: list[BoundCertificate] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k != "certificates"}
        d["certificates"] = [c.to_dict() for c in self.certificates]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SweepRow":
        def num(v):
            return float("nan") if v is None else float(v)

        return cls(
            rho=num(d["rho"]), err_D=num(d["err_D"]), joint_err=num(d["joint_err"]),
            acc_gap=num(d["acc_gap"]), dp_gap=num(d["dp_gap"]),
            err_D0=num(d.get("err_D0")), err_D1=num(d.get("err_D1")),
            delta_BR=num(d.get("delta_BR")),
            certificates=[certificate_from_dict(c) for c in d.get("certificates", [])],
        )


def predict(model: MLPModel, features: np.ndarray, threshold: float = 0.5) -> PredictionSet:
    scores, _, _ = forward(model, features)
    return PredictionSet(np.clip(scores, 0.0, 1.0), threshold)


def evaluate(model: MLPModel, ds: GroupedDataset, rho: float, threshold: float = 0.5) -> SweepRow:
    report = full_report(ds, predict(model, ds.features, threshold))
    return SweepRow(
        rho=rho,
        err_D=report.err_D,
        joint_err=report.joint_err,
        acc_gap=report.acc_gap,
        dp_gap=report.dp_gap,
        err_D0=report.err_D0,
        err_D1=report.err_D1,
        delta_BR=report.delta_BR,
        certificates=[dp_gap_joint_error_certificate(report)],
    )


def _sgd(model: MLPModel, grads: dict[str, np.ndarray], lr: float, blocks: tuple[str, ...]) -> None:
    for name, g in grads.items():
        if model.block(name) in blocks:
            model.params[name] -= lr * g


def _split(ds: GroupedDataset, fraction: float, seed: int):
    rng = np.random.default_rng(np.random.SeedSequence([seed, 3]))
    idx = rng.permutation(len(ds))
    cut = int(round(len(ds) * (1 - fraction)))
    return ds.subset(np.sort(idx[:cut])), ds.subset(np.sort(idx[cut:]))


def train(
    dataset: GroupedDataset,
    config: TrainConfig,
    eval_dataset: Optional[GroupedDataset] = None,
    adversary: bool = True,
) -> tuple[MLPModel, SweepRow]:
    """Minibatch SGD; fully determined by ``config.seed``.

    Evaluates on ``eval_dataset`` or, when absent, on a seeded hold-out of
    ``config.holdout_fraction`` of the rows.
    """
    if eval_dataset is None:
        dataset, eval_dataset = _split(dataset, config.holdout_fraction, config.seed)
    for name, v in (("groups", dataset.groups), ("labels", dataset.labels)):
        if len(np.unique(v)) < 2:
            raise AuditError(f"training data must contain both {name}")
    model = init_model(dataset.features.shape[1], config)
    shuffle = np.random.default_rng(np.random.SeedSequence([config.seed, 2]))
    X, y, a = dataset.features, dataset.labels, dataset.groups
    n = len(dataset)
    lr = config.learning_rate
    for epoch in range(config.epochs):
        order = shuffle.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            b = order[start:start + config.batch_size]
            try:
                if config.adversarial_mode == ALTERNATING and adversary:
                    _, g_adv = loss_and_gradients(model, X[b], y[b], a[b], config.rho)
                    _sgd(model, g_adv, lr, ("adv",))
                    loss, grads = loss_and_gradients(model, X[b], y[b], a[b], config.rho)
                    _sgd(model, grads, lr, ("enc", "head"))
                else:
                    loss, grads = loss_and_gradients(model, X[b], y[b], a[b], config.rho, adversary=adversary)
                    _sgd(model, grads, lr, ("enc", "head", "adv"))
            except NonFiniteLoss as exc:
                raise Diverged(f"epoch {epoch}: {exc}") from None
            total += loss.total * len(b)
        if not all(np.all(np.isfinite(v)) for v in model.params.values()):
            raise Diverged(f"epoch {epoch}: non-finite parameters")
        log.info("rho=%g epoch=%d loss=%.5f", config.rho, epoch, total / n)
    return model, evaluate(model, eval_dataset, config.rho, config.threshold)


def _train_row(args) -> SweepRow:
    dataset, config, eval_dataset = args
    return train(dataset, config, eval_dataset)[1]


def sweep_workers() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def sweep(
    dataset: GroupedDataset,
    base_config: TrainConfig,
    rhos,
    eval_dataset: Optional[GroupedDataset] = None,
    workers: Optional[int] = None,
) -> list[SweepRow]:
    """One training run per ``rho`` with everything else held fixed."""
    rhos = [float(r) for r in rhos]
    if not rhos:
        raise ValueError("rhos must be nonempty")
    jobs = [(dataset, replace(base_config, rho=r), eval_dataset) for r in rhos]
    workers = sweep_workers() if workers is None else workers
    if workers <= 1 or len(jobs) == 1:
        return [_train_row(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(_train_row, jobs))
