"""Convert the raw UCI Adult files into headered CSVs readable by ``load_csv``.

Usage::

    python scripts/prepare_adult.py RAW_DIR OUT_DIR

RAW_DIR must contain ``adult.data`` and ``adult.test`` as distributed by UCI.
Whitespace after commas is stripped and the trailing period on test-set labels
is removed so both splits share one label vocabulary. Missing values stay as
``?`` and are dropped at load time.
"""
import csv
import gzip
import io
import sys
from pathlib import Path

COLUMNS = [
    "age", "workclass", "fnlwgt", "education", "education-num",
    "marital-status", "occupation", "relationship", "race", "sex",
    "capital-gain", "capital-loss", "hours-per-week", "native-country",
    "income",
]


def convert(src: Path, dst: Path) -> int:
    n = 0
    with open(src) as fin, gzip.GzipFile(dst, "wb", mtime=0) as gz, \
            io.TextIOWrapper(gz, newline="") as fout:
        writer = csv.writer(fout)
        writer.writerow(COLUMNS)
        for line in fin:
            line = line.strip()
            if not line or line.startswith("|"):
                continue
            fields = [f.strip() for f in line.split(",")]
            if len(fields) != len(COLUMNS):
                continue
            fields[-1] = fields[-1].rstrip(".")
            writer.writerow(fields)
            n += 1
    return n


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) != 2:
        print(__doc__, file=sys.stderr)
        return 1
    raw, out = Path(argv[0]), Path(argv[1])
    out.mkdir(parents=True, exist_ok=True)
    for name, target in [("adult.data", "adult_train.csv.gz"), ("adult.test", "adult_test.csv.gz")]:
        n = convert(raw / name, out / target)
        print(f"{name}: {n} rows -> {out / target}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
