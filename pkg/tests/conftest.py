from pathlib import Path

import json

import numpy as np
import pytest

from parity_audit.dataio import DatasetSchema, load_csv
from parity_audit.dist import make_distribution
from parity_audit.oracle import FinitePopulation

ROOT = Path(__file__).resolve().parents[1]
DATA = ROOT / "data"
ADULT = DATA / "adult"
POPS = DATA / "populations"
SUMMARY = DATA / "adult_published_results.json"

# (criterion number, line) pairs collected by the acceptance suite
ACCEPTANCE = []


def random_distribution(rng, k=None, max_k=8, sparse=0.2):
    """Dirichlet draw; some entries zeroed to exercise support edge cases."""
    k = k or int(rng.integers(1, max_k + 1))
    w = rng.dirichlet(np.ones(k))
    if k > 1:
        w[rng.random(k) < sparse] = 0.0
        if w.sum() == 0:
            w[rng.integers(k)] = 1.0
    return make_distribution(w / w.sum())


def random_population(rng, max_n=10, n=None, unequal=False, sparse=0.0):
    while True:
        size = n or int(rng.integers(1, max_n + 1))
        mass = rng.dirichlet(np.ones(4 * size)).reshape(size, 2, 2)
        if sparse:
            mass[rng.random(mass.shape) < sparse] = 0.0
        if mass.sum() == 0:
            continue
        mass /= mass.sum()
        if mass[:, :, 0].sum() <= 0 or mass[:, :, 1].sum() <= 0:
            continue
        pop = FinitePopulation(mass)
        if unequal and pop.delta_BR <= 1e-6:
            continue
        return pop


def random_kernel_matrix(rng, n_in, n_out):
    m = rng.dirichlet(np.ones(n_out), size=n_in)
    return m / m.sum(axis=1, keepdims=True)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def adult_schema():
    return DatasetSchema.from_json(ADULT / "schema.json")


@pytest.fixture(scope="session")
def adult(adult_schema):
    train, prep = load_csv(ADULT / "adult_train.csv.gz", adult_schema)
    test, test_prep = load_csv(ADULT / "adult_test.csv.gz", adult_schema, fitted=prep)
    return train, prep, test, test_prep


@pytest.fixture
def toy_csv(tmp_path):
    def write(text, name="toy.csv"):
        p = tmp_path / name
        p.write_text(text)
        return p
    return write


@pytest.fixture
def toy_files(tmp_path):
    """Small labelled CSV, its schema and a score file for CLI runs."""
    rng = np.random.default_rng(7)
    n = 120
    g = rng.integers(0, 2, n)
    x = rng.normal(size=n) + g
    y = (x + rng.normal(scale=0.5, size=n) > 0.5).astype(int)
    color = np.where(rng.random(n) < 0.5, "red", "blue")
    lines = ["label,group,color,x"] + [
        f"{'pos' if y[i] else 'neg'},{'b' if g[i] else 'a'},{color[i]},{x[i]:.4f}" for i in range(n)]
    data = tmp_path / "toy.csv"
    data.write_text("\n".join(lines) + "\n")
    schema = tmp_path / "schema.json"
    schema.write_text(json.dumps({
        "label_column": "label", "group_column": "group", "positive_label_value": "pos",
        "group_one_value": "b", "categorical_columns": ["color"], "numeric_columns": ["x"]}))
    preds = tmp_path / "preds.txt"
    preds.write_text("\n".join(f"{v:.4f}" for v in 1 / (1 + np.exp(-x))) + "\n")
    return {"input": str(data), "schema": str(schema), "predictions": str(preds)}


def cli_invocations(files):
    """One argument list per subcommand (and per bounds input mode)."""
    toy = ["--input", files["input"], "--schema", files["schema"]]
    train = [*toy, "--epochs", "2", "--hidden", "8", "--batch-size", "32"]
    return {
        "audit": ["audit", *toy, "--predictions", files["predictions"]],
        "bounds_data": ["bounds", *toy, "--predictions", files["predictions"], "--bins", "4"],
        "bounds_population": ["bounds", "--population", str(POPS / "noisy_shift.pop"),
                              "--predictor", "1,0,1", "--gap", "0", "--gap", "0.1"],
        "bounds_summary": ["bounds", "--summary", str(SUMMARY)],
        "oracle": ["oracle", "--population", str(POPS / "noisy_shift.pop"), "--gap", "0", "--gap", "0.05",
                   "--frontier", "--impossibility"],
        "train": ["train", *train, "--rho", "1"],
        "sweep": ["sweep", *train, "--rho", "0.1", "--rho", "5"],
        "divergence": ["divergence", "--p", "0.31,0.69", "--q", "0.113,0.887"],
    }


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
