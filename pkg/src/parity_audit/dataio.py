"""Dataset ingestion, the population text format and canonical JSON reports."""
from __future__ import annotations

import csv
import gzip
import io
import json
import math
from dataclasses import asdict, dataclass, field, is_dataclass
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .errors import (
    AuditError,
    BadFormat,
    EmptyAfterFiltering,
    IndexOutOfRange,
    MassNotNormalized,
    MissingColumn,
    UnparseableRow,
)
from .metrics import GroupedDataset, PredictionSet
from .oracle import FinitePopulation

MISSING_TOKENS = frozenset({"", "?", "NA", "N/A", "nan", "NaN"})
SIGNIFICANT_DIGITS = 6


@dataclass(frozen=True)
class DatasetSchema:
    label_column: str
    group_column: str
    positive_label_value: str
    group_one_value: str
    categorical_columns: list[str] = field(default_factory=list)
    numeric_columns: list[str] = field(default_factory=list)

    def __post_init__(self):
        features = list(self.categorical_columns) + list(self.numeric_columns)
        if len(set(features)) != len(features):
            raise AuditError("schema lists a feature column twice")
        for special in (self.label_column, self.group_column):
            if special in features:
                raise AuditError(f"column {special!r} cannot be both a feature and label/group")
        if self.label_column == self.group_column:
            raise AuditError("label and group columns must differ")

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetSchema":
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "DatasetSchema":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    @property
    def columns(self) -> list[str]:
        return [self.label_column, self.group_column, *self.categorical_columns, *self.numeric_columns]


@dataclass
class PreprocessReport:
    rows_in: int
    rows_kept: int
    rows_dropped_missing: int
    feature_dimension: int
    category_counts: dict[str, int]
    numeric_scaling: dict[str, list[float]]
    vocabulary: dict[str, list[str]]
    unseen_categories: int = 0
    feature_names: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def _open_text(path):
    path = Path(path)
    if path.suffix == ".gz":
        return io.TextIOWrapper(gzip.open(path, "rb"), newline="")
    return open(path, newline="")


def _read_rows(path, schema: DatasetSchema):
    with _open_text(path) as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise EmptyAfterFiltering(f"{path}: file is empty") from None
        missing = [c for c in schema.columns if c not in header]
        if missing:
            raise MissingColumn(f"{path}: columns not found: {missing}")
        pos = {c: header.index(c) for c in schema.columns}
        rows = []
        for line_no, raw in enumerate(reader, start=2):
            if not raw or all(not f.strip() for f in raw):
                continue
            if len(raw) != len(header):
                raise UnparseableRow(line_no, f"expected {len(header)} fields, got {len(raw)}")
            rows.append((line_no, {c: raw[i].strip() for c, i in pos.items()}))
    return rows


def load_csv(
    path,
    schema: DatasetSchema,
    fitted: Optional[PreprocessReport] = None,
) -> tuple[GroupedDataset, PreprocessReport]:
    """Load and encode a CSV file.

    Without ``fitted`` the vocabulary and min-max scaling are learned from this
    file. Pass the report of the training file to encode a test file with the
    same columns; unseen categories become an all-zero block and are counted.
    """
    rows = _read_rows(path, schema)
    rows_in = len(rows)
    kept = [(ln, r) for ln, r in rows if not any(v in MISSING_TOKENS for v in r.values())]
    if not kept:
        raise EmptyAfterFiltering(f"{path}: no complete rows")

    numeric = {}
    for col in schema.numeric_columns:
        vals = np.empty(len(kept))
        for i, (ln, r) in enumerate(kept):
            try:
                vals[i] = float(r[col])
            except ValueError:
                raise UnparseableRow(ln, f"column {col!r}: {r[col]!r} is not numeric") from None
        numeric[col] = vals

    if fitted is None:
        vocabulary = {c: sorted({r[c] for _, r in kept}) for c in schema.categorical_columns}
        scaling = {c: [float(v.min()), float(v.max())] for c, v in numeric.items()}
    else:
        vocabulary = fitted.vocabulary
        scaling = fitted.numeric_scaling

    blocks = []
    names = []
    unseen = 0
    for col in schema.categorical_columns:
        vocab = vocabulary[col]
        index = {v: i for i, v in enumerate(vocab)}
        block = np.zeros((len(kept), len(vocab)))
        for i, (_, r) in enumerate(kept):
            j = index.get(r[col])
            if j is None:
                unseen += 1
            else:
                block[i, j] = 1.0
        blocks.append(block)
        names.extend(f"{col}={v}" for v in vocab)
    for col in schema.numeric_columns:
        lo, hi = scaling[col]
        span = hi - lo
        blocks.append(((numeric[col] - lo) / span if span > 0 else np.zeros(len(kept))).reshape(-1, 1))
        names.append(col)
    features = np.hstack(blocks) if blocks else np.zeros((len(kept), 0))

    labels = np.array([r[schema.label_column] == schema.positive_label_value for _, r in kept], dtype=int)
    groups = np.array([r[schema.group_column] == schema.group_one_value for _, r in kept], dtype=int)
    report = PreprocessReport(
        rows_in=rows_in,
        rows_kept=len(kept),
        rows_dropped_missing=rows_in - len(kept),
        feature_dimension=features.shape[1],
        category_counts={c: len(v) for c, v in vocabulary.items()},
        numeric_scaling={c: list(v) for c, v in scaling.items()},
        vocabulary={c: list(v) for c, v in vocabulary.items()},
        unseen_categories=unseen,
        feature_names=names,
    )
    return GroupedDataset(features, labels, groups), report


def load_predictions(path, threshold: float = 0.5) -> PredictionSet:
    """Scores from a CSV with a ``score`` column, or one number per line."""
    with _open_text(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise BadFormat(f"{path}: no predictions")
    first = next(csv.reader([lines[0]]))
    col = 0
    start = 0
    if "score" in [f.strip() for f in first]:
        col = [f.strip() for f in first].index("score")
        start = 1
    scores = []
    for i, ln in enumerate(lines[start:], start=start + 1):
        fields = next(csv.reader([ln]))
        try:
            scores.append(float(fields[col]))
        except (ValueError, IndexError):
            raise UnparseableRow(i, f"bad score {ln!r}") from None
    return PredictionSet(np.array(scores), threshold)


# Population text format: first non-comment line is n, then "x y a mass" lines.

def parse_population(text: str) -> FinitePopulation:
    lines = [(i + 1, ln) for i, ln in enumerate(text.splitlines()) if ln.split("#", 1)[0].strip()]
    if not lines:
        raise BadFormat("population file is empty")
    first_no, first = lines[0]
    try:
        n = int(first.split("#", 1)[0].strip())
    except ValueError:
        raise BadFormat(f"line {first_no}: expected the number of x-values") from None
    if n <= 0:
        raise BadFormat(f"line {first_no}: n must be positive")
    mass = np.zeros((n, 2, 2))
    for no, ln in lines[1:]:
        parts = ln.split("#", 1)[0].split()
        if len(parts) != 4:
            raise BadFormat(f"line {no}: expected 'x y a mass'")
        try:
            x, y, a = int(parts[0]), int(parts[1]), int(parts[2])
            w = float(parts[3])
        except ValueError:
            raise BadFormat(f"line {no}: cannot parse {ln!r}") from None
        if not (0 <= x < n) or y not in (0, 1) or a not in (0, 1):
            raise IndexOutOfRange(f"line {no}: index out of range in {ln!r}")
        if w < 0 or not math.isfinite(w):
            raise BadFormat(f"line {no}: mass must be a nonnegative number")
        mass[x, y, a] += w
    total = float(mass.sum())
    if abs(total - 1.0) > 1e-9:
        raise MassNotNormalized(total)
    return FinitePopulation(mass)


def load_population(path) -> FinitePopulation:
    with open(path) as fh:
        return parse_population(fh.read())


def format_population(pop: FinitePopulation) -> str:
    out = [str(pop.n)]
    out.extend(f"{x} {y} {a} {w!r}" for x, y, a, w in pop.entries())
    return "\n".join(out) + "\n"


def dump_population(pop: FinitePopulation, path) -> None:
    Path(path).write_text(format_population(pop))


# Canonical JSON.

def _round(x: float):
    if math.isnan(x):
        return None
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if x == 0:
        return 0.0
    return float(f"{x:.{SIGNIFICANT_DIGITS}g}")


def to_jsonable(value: Any) -> Any:
    if hasattr(value, "to_dict"):
        return to_jsonable(value.to_dict())
    if is_dataclass(value) and not isinstance(value, type):
        return to_jsonable(asdict(value))
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return _round(float(value))
    if value is None or isinstance(value, str):
        return value
    if hasattr(value, "value"):  # enums
        return value.value
    raise TypeError(f"cannot serialize {type(value).__name__}")


def dumps_canonical(value: Any) -> str:
    return json.dumps(to_jsonable(value), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_report(value: Any, path) -> None:
    """Write ``value`` as canonical JSON (sorted keys, 6 significant digits)."""
    text = dumps_canonical(value)
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def read_sweep(path) -> list:
    """Parse a sweep JSON document back into :class:`~parity_audit.trainer.SweepRow` objects."""
    from .trainer import SweepRow

    with open(path) as fh:
        doc = json.load(fh)
    rows = doc["rows"] if isinstance(doc, dict) else doc
    return [SweepRow.from_dict(r) for r in rows]


SWEEP_CSV_COLUMNS = ["rho", "err_D", "joint_err", "acc_gap", "dp_gap"]


def write_sweep_csv(rows, path) -> None:
    """Plot-ready table, one line per trained model."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_CSV_COLUMNS)
        for r in rows:
            w.writerow([f"{getattr(r, c):.{SIGNIFICANT_DIGITS}g}" for c in SWEEP_CSV_COLUMNS])
