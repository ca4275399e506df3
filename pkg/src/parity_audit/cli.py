"""Command-line entry point.

Exit codes: 0 success, 1 usage or data error, 2 a non-vacuous certificate failed.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from . import bounds, dataio, dist, metrics, oracle, trainer
from .certificate import LOWER, BoundCertificate, certify
from .errors import AuditError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VIOLATION = 2

log = logging.getLogger("parity_audit")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 is reserved for violations here.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="parity-audit", description="Group-fairness audits with checked bounds.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def dataset_args(p, predictions=True):
        p.add_argument("--input", required=True, help="CSV (optionally .gz) with header")
        p.add_argument("--schema", required=True, help="JSON schema naming label/group/feature columns")
        if predictions:
            p.add_argument("--predictions", help="scores in [0,1], one per row or a 'score' column")

    def out_arg(p):
        p.add_argument("--out", help="write JSON here instead of stdout")

    p = sub.add_parser("audit", help="fairness metrics for a dataset and predictions")
    dataset_args(p)
    p.add_argument("--bins", type=int, default=metrics.DEFAULT_BINS, help="score bins for predictive-rate parity")
    p.add_argument("--soft", action="store_true", help="absolute error on scores instead of hard labels")
    p.add_argument("--threshold", type=float, default=metrics.DEFAULT_THRESHOLD)
    out_arg(p)

    p = sub.add_parser("bounds", help="certificates for every applicable bound")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", help="dataset CSV (needs --schema and --predictions)")
    src.add_argument("--population", help="finite population file")
    src.add_argument("--summary", help="JSON with published aggregate rows")
    p.add_argument("--schema")
    p.add_argument("--predictions")
    p.add_argument("--predictor", type=_floats, help="population mode: h(x) values, comma separated")
    p.add_argument("--gap", type=float, action="append", help="population mode: DP budget(s) for the optimal predictor")
    p.add_argument("--bins", type=int, default=bounds.DEFAULT_BINS_PER_DIM, help="bins per feature dimension")
    p.add_argument("--soft", action="store_true")
    p.add_argument("--threshold", type=float, default=metrics.DEFAULT_THRESHOLD)
    out_arg(p)

    p = sub.add_parser("oracle", help="exact optima on a finite population")
    p.add_argument("--population", required=True)
    p.add_argument("--gap", type=float, action="append", help="DP budget (repeatable, default 0)")
    p.add_argument("--frontier", action="store_true", help="treat the budgets as a frontier (must ascend)")
    p.add_argument("--impossibility", action="store_true", help="search for predictors with both rate parities")
    out_arg(p)

    for name, help_text in (("train", "train one model"), ("sweep", "train one model per --rho")):
        p = sub.add_parser(name, help=help_text)
        dataset_args(p, predictions=False)
        p.add_argument("--test", help="evaluation CSV; default is a seeded hold-out of --input")
        p.add_argument("--rho", type=float, action="append", help="adversarial coefficient (repeatable for sweep)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--epochs", type=int, default=trainer.TrainConfig.epochs)
        p.add_argument("--learning-rate", type=float, default=trainer.TrainConfig.learning_rate)
        p.add_argument("--batch-size", type=int, default=trainer.TrainConfig.batch_size)
        p.add_argument("--hidden", type=_floats, help="encoder widths, comma separated")
        p.add_argument("--mode", choices=[trainer.ALTERNATING, trainer.SIMULTANEOUS], default=trainer.ALTERNATING)
        p.add_argument("--csv", help="also write a plot-ready CSV table")
        out_arg(p)

    p = sub.add_parser("divergence", help="all divergences between two distributions")
    p.add_argument("--p", type=_floats, required=True, help="probabilities or counts, comma separated")
    p.add_argument("--q", type=_floats, required=True)
    p.add_argument("--counts", action="store_true", help="normalize --p and --q as counts")
    out_arg(p)
    return parser


def _load_dataset(args, path=None, fitted=None):
    if not args.schema:
        raise UsageError("--schema is required with --input")
    schema = dataio.DatasetSchema.from_json(args.schema)
    return dataio.load_csv(path or args.input, schema, fitted)


def _load_predictions(args, ds):
    if not args.predictions:
        raise UsageError("--predictions is required with --input")
    preds = dataio.load_predictions(args.predictions, args.threshold)
    if len(preds) != len(ds):
        raise AuditError(f"{len(preds)} predictions for {len(ds)} rows")
    return preds


def _certificate_status(certs: list[BoundCertificate]) -> int:
    return EXIT_VIOLATION if any(c.failed for c in certs) else EXIT_OK


def cmd_audit(args):
    ds, prep = _load_dataset(args)
    preds = _load_predictions(args, ds)
    report = metrics.full_report(ds, preds, soft=args.soft, bins=args.bins)
    out = {
        "report": report,
        "predictive_rate": metrics.predictive_rate_report(ds, preds, args.bins),
        "preprocessing": {"rows_in": prep.rows_in, "rows_kept": prep.rows_kept,
                          "feature_dimension": prep.feature_dimension},
    }
    return out, EXIT_OK


def _dataset_certificates(args):
    ds, _ = _load_dataset(args)
    preds = _load_predictions(args, ds)
    report = metrics.full_report(ds, preds, soft=args.soft)
    certs = [
        bounds.dp_joint_error_certificate(report),
        bounds.max_group_error_certificate(report),
        bounds.dp_gap_joint_error_certificate(report),
        bounds.tv_error_certificate(ds, preds, 0, soft=args.soft),
        bounds.tv_error_certificate(ds, preds, 1, soft=args.soft),
    ]
    certs += bounds.empirical_representation_certificates(ds.features, ds, preds, bins_per_dim=args.bins)
    return {"report": report, "certificates": certs}, certs


def _population_certificates(args):
    pop = dataio.load_population(args.population)
    certs = []
    predictors = {}
    if args.predictor is not None:
        predictors["given"] = oracle.as_predictor(args.predictor, pop.n)
    for b in args.gap or []:
        predictors[f"dp_optimal[gap={b:g}]"] = oracle.min_joint_error_dp(pop, b).argmin
    evaluated = {}
    for label, q in predictors.items():
        report = bounds.report_for_population(pop, q)
        group = [
            bounds.dp_joint_error_certificate(report),
            bounds.max_group_error_certificate(report),
            bounds.dp_gap_joint_error_certificate(report),
            bounds.tv_error_population_certificate(pop, q, 0),
            bounds.tv_error_population_certificate(pop, q, 1),
            bounds.error_gap_certificate(pop, q)[1],
        ]
        certs += group
        evaluated[label] = {"predictor": q, "report": report, "certificates": group}
    sweep = bounds.error_gap_exhaustive(pop)
    terms, ext = bounds.decomposition_terms(pop)
    out = {
        "delta_BR": pop.delta_BR,
        "decomposition": terms,
        "extension": ext,
        "exhaustive_error_gap_check": sweep,
        "predictors": evaluated,
    }
    status = EXIT_VIOLATION if sweep.violations else _certificate_status(certs)
    return out, certs, status


def _summary_certificates(args):
    with open(args.summary) as fh:
        doc = json.load(fh)
    rows = []
    certs = []
    for r in doc["rows"]:
        report = metrics.report_from_summary(
            joint_err=r["joint_err"], dp_gap=r["dp_gap"], delta_BR=doc["delta_BR"],
            acc_gap=r.get("acc_gap"), err_D=r.get("err_D"), alpha=doc.get("alpha"),
            base_rate_0=doc.get("base_rate_0"), base_rate_1=doc.get("base_rate_1"),
        )
        group = [
            bounds.dp_joint_error_certificate(report),
            bounds.max_group_error_certificate(report),
            bounds.dp_gap_joint_error_certificate(report),
        ]
        certs += group
        rows.append({"row": r, "certificates": group})
    return {"delta_BR": doc["delta_BR"], "rows": rows}, certs


def cmd_bounds(args):
    if args.input:
        out, certs = _dataset_certificates(args)
        return out, _certificate_status(certs)
    if args.population:
        out, _, status = _population_certificates(args)
        return out, status
    out, certs = _summary_certificates(args)
    return out, _certificate_status(certs)


def cmd_oracle(args):
    pop = dataio.load_population(args.population)
    budgets = args.gap or [0.0]
    out = {"delta_BR": pop.delta_BR, "n": pop.n,
           "unconstrained_min_joint_error": oracle.unconstrained_min_joint_error(pop)}
    certs = []
    if args.frontier:
        frontier = oracle.dp_frontier(pop, budgets)
        out["frontier"] = [{"gap_budget": b, "min_joint_error": v} for b, v in frontier]
        values = [(b, v) for b, v in frontier]
    else:
        results = [oracle.min_joint_error_dp(pop, b) for b in budgets]
        out["results"] = results
        values = [(r.gap_budget, r.min_joint_error) for r in results]
    for b, v in values:
        certs.append(certify(f"dp_optimum_lower_bound[gap={b:g}]", v, max(0.0, pop.delta_BR - b), LOWER, slack=1e-9))
    out["certificates"] = certs
    status = _certificate_status(certs)
    if args.impossibility:
        imp = oracle.impossibility_sweep(pop)
        out["impossibility"] = imp
        if imp.counterexamples:
            status = EXIT_VIOLATION
    return out, status


def _train_config(args, rho: float) -> trainer.TrainConfig:
    kw = dict(rho=rho, seed=args.seed, epochs=args.epochs, learning_rate=args.learning_rate,
              batch_size=args.batch_size, adversarial_mode=args.mode)
    if args.hidden:
        kw["hidden_sizes"] = tuple(int(h) for h in args.hidden)
    return trainer.TrainConfig(**kw)


def _train_data(args):
    ds, prep = _load_dataset(args)
    test = _load_dataset(args, args.test, prep)[0] if args.test else None
    return ds, test


def cmd_train(args):
    rhos = args.rho or [0.0]
    if len(rhos) != 1:
        raise UsageError("train takes a single --rho; use sweep for several")
    ds, test = _train_data(args)
    _, row = trainer.train(ds, _train_config(args, rhos[0]), test)
    if args.csv:
        dataio.write_sweep_csv([row], args.csv)
    return {"config": _train_config(args, rhos[0]), "row": row}, _certificate_status(row.certificates)


def cmd_sweep(args):
    if not args.rho:
        raise UsageError("sweep needs at least one --rho")
    ds, test = _train_data(args)
    rows = trainer.sweep(ds, _train_config(args, 0.0), args.rho, test)
    if args.csv:
        dataio.write_sweep_csv(rows, args.csv)
    certs = [c for r in rows for c in r.certificates]
    return {"config": _train_config(args, 0.0), "rows": rows}, _certificate_status(certs)


def cmd_divergence(args):
    build = dist.normalize if args.counts else dist.make_distribution
    p, q = build(args.p), build(args.q)
    return {"p": p.probs, "q": q.probs, "divergences": dist.divergence_table(p, q)}, EXIT_OK


COMMANDS = {
    "audit": cmd_audit,
    "bounds": cmd_bounds,
    "oracle": cmd_oracle,
    "train": cmd_train,
    "sweep": cmd_sweep,
    "divergence": cmd_divergence,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        out, status = COMMANDS[args.command](args)
        text = dataio.dumps_canonical(out)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"parity-audit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (AuditError, ValueError, KeyError, OSError) as exc:
        print(f"parity-audit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.out:
        with open(args.out, "w", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if status == EXIT_VIOLATION:
        print("parity-audit: certificate violation", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
