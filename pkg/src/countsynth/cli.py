"""Command-line front end.

Subcommands cover the full workflow: ``genfixture`` and ``ingest`` produce
tables, ``synth`` draws ensembles, ``metrics`` scores them, ``apriori``,
``calibrate`` and ``sweep`` work purely from a cell-size histogram, and
``dist pmf`` exposes the noise distributions themselves.

Exit codes: 0 on success, 1 for usage problems, 2 for data or calibration
problems.  Every command that writes files also writes ``run_manifest.json``
next to them, recording parameters, input hashes, and timings; stdout-only
invocations write nothing.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .calibration import CalibrationTarget, calibrate, sweep
from .distributions import NbiParams, family_pmf_obj, nbi_pmf, poisson_pmf
from .errors import CalibrationError, ValidationError
from .glm import ensemble_ci_overlap, overlap_summary
from .metrics import (
    ensemble_report,
    loss_l1_analytic,
    reproduction_probability,
    risk_utility_point,
    tau_analytic,
    total_coverage,
    total_variance_analytic,
)
from .synthesis import (
    MechanismConfig,
    ZeroPolicy,
    read_ensemble,
    synthesize,
    table_hash,
    write_ensemble,
)
from .table import (
    CellHistogram,
    FixtureTarget,
    TableSchema,
    benchmark_schema,
    benchmark_target,
    gen_fixture,
    histogram,
    ingest_aggregated,
    ingest_microdata,
    write_aggregated,
    write_microdata,
)


class UsageError(Exception):
    """Bad command line; exits 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # noqa: A003 - argparse API
        raise UsageError(message)


# ---------------------------------------------------------------------------
# Small helpers


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _write_manifest(outdir: Path, subcommand: str, argv: list[str],
                    args: argparse.Namespace, inputs: list[Path],
                    outputs: list[str], t0: float,
                    warnings: dict | None = None) -> None:
    params = {}
    for key, val in sorted(vars(args).items()):
        if key in ("func", "dist_cmd"):
            continue
        params[key] = str(val) if isinstance(val, Path) else val
    doc = {
        "tool": "countsynth",
        "version": __version__,
        "subcommand": subcommand,
        "argv": argv,
        "parameters": params,
        "inputs": {str(p): _sha256(Path(p)) for p in inputs},
        "outputs": sorted(outputs),
        "duration_seconds": round(time.time() - t0, 3),
        "warnings": warnings or {},
    }
    (outdir / "run_manifest.json").write_text(
        json.dumps(doc, indent=2, sort_keys=True)
    )


def _require_file(value: str, what: str) -> Path:
    path = Path(value)
    if not path.is_file():
        raise ValidationError(f"{what} {value!r} does not exist")
    return path


def _load_schema(value: str) -> tuple[TableSchema, list[Path]]:
    if value == "benchmark":
        return benchmark_schema(), []
    path = _require_file(value, "schema file")
    return TableSchema.from_json(path.read_text()), [path]


def _load_histogram(value: str, cap: int = 11) -> tuple[CellHistogram, list[Path]]:
    path = _require_file(value, "histogram file")
    try:
        df = pd.read_csv(path)
    except Exception as exc:
        raise ValidationError(f"unreadable histogram CSV: {exc}") from exc
    return CellHistogram.from_frame(df, cap), [path]


def _floats(text: str, flag: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v != ""]
    except ValueError:
        raise UsageError(f"{flag} expects comma-separated numbers, got {text!r}")


def _mkdir(value: str) -> Path:
    out = Path(value)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _zero_policy(text: str) -> ZeroPolicy:
    return ZeroPolicy.parse(text)


def _family_params(args) -> tuple[str, float | None, float | None]:
    family = args.family
    sigma = getattr(args, "sigma", None)
    nu = getattr(args, "nu", None)
    if family == "poisson":
        if sigma is not None or nu is not None:
            raise UsageError("poisson takes neither --sigma nor --nu")
    elif family == "nbi":
        if sigma is None:
            raise UsageError("nbi needs --sigma")
        if nu is not None:
            raise UsageError("--nu only applies to --family gaf")
    else:
        if sigma is None or nu is None:
            raise UsageError("gaf needs both --sigma and --nu")
    return family, sigma, nu


# ---------------------------------------------------------------------------
# Subcommands


def cmd_ingest(args, argv) -> int:
    t0 = time.time()
    inputs = [_require_file(args.input, "input file")]
    schema = None
    if args.schema:
        schema, extra = _load_schema(args.schema)
        inputs += extra
    if args.format == "aggregated":
        if schema is None:
            raise UsageError("aggregated input needs --schema")
        table = ingest_aggregated(inputs[0], schema)
    else:
        if schema is None and not args.infer:
            raise UsageError("microdata input needs --schema or --infer")
        table = ingest_microdata(inputs[0], schema)
    out = _mkdir(args.out)
    write_aggregated(table, out / "table.csv")
    (out / "schema.json").write_text(table.schema.to_json())
    hist = histogram(table, args.cap)
    hist.to_frame().to_csv(out / "histogram.csv", index=False)
    _write_manifest(out, "ingest", argv, args, inputs,
                    ["table.csv", "schema.json", "histogram.csv"], t0)
    print(f"ingested {table.n} units into {table.n_cells} cells "
          f"({len(table.nonzero_cells())} occupied) -> {out}")
    return 0


def cmd_genfixture(args, argv) -> int:
    t0 = time.time()
    inputs: list[Path] = []
    schema, extra = _load_schema(args.schema)
    inputs += extra
    if args.histogram:
        hist, extra = _load_histogram(args.histogram)
        inputs += extra
        total = hist.n_cells
        target = FixtureTarget(
            sizes=tuple(int(s) for s in hist.sizes),
            proportions=tuple(float(f) / total for f in hist.freqs),
        )
    else:
        target = benchmark_target(args.tail_mean)
    table = gen_fixture(schema, target, args.seed)
    out = _mkdir(args.out)
    outputs = ["table.csv", "schema.json", "histogram.csv", "fixture.json"]
    write_aggregated(table, out / "table.csv")
    (out / "schema.json").write_text(schema.to_json())
    hist = histogram(table, args.cap)
    hist.to_frame().to_csv(out / "histogram.csv", index=False)
    (out / "fixture.json").write_text(json.dumps({
        "seed": args.seed,
        "n": table.n,
        "n_cells": table.n_cells,
        "occupied_cells": int(len(table.nonzero_cells())),
        "target": {
            "sizes": list(target.sizes),
            "proportions": list(target.proportions),
            "tail_start": target.tail_start,
            "tail_proportion": target.tail_proportion,
            "tail_mean": target.tail_mean,
        },
    }, indent=2))
    if args.microdata:
        write_microdata(table, out / "microdata.csv")
        outputs.append("microdata.csv")
    _write_manifest(out, "genfixture", argv, args, inputs, outputs, t0)
    print(f"fixture with {table.n} units over {table.n_cells} cells -> {out}")
    return 0


def cmd_synth(args, argv) -> int:
    t0 = time.time()
    schema, inputs = _load_schema(args.schema)
    table_path = _require_file(args.table, "table file")
    inputs = [table_path] + inputs
    table = ingest_aggregated(table_path, schema)
    family, sigma, nu = _family_params(args)
    config = MechanismConfig(
        family=family, sigma=sigma, nu=nu,
        zero_policy=_zero_policy(args.zero_policy),
        m=args.m, master_seed=args.seed,
    )
    ensemble = synthesize(table, config, threads=args.threads)
    out = _mkdir(args.out)
    write_ensemble(ensemble, out, long_format=args.long)
    outputs = [f.name for f in out.iterdir() if f.name != "run_manifest.json"]
    warnings = {}
    if ensemble.clamped:
        warnings["clamped_draws"] = ensemble.clamped
    _write_manifest(out, "synth", argv, args, inputs, outputs, t0, warnings)
    print(f"synthesized m={config.m} replicate(s) of {table.n_cells} cells "
          f"-> {out}" + (f" [clamped {ensemble.clamped} draws]"
                         if ensemble.clamped else ""))
    return 0


def cmd_metrics(args, argv) -> int:
    t0 = time.time()
    schema, inputs = _load_schema(args.schema)
    table_path = _require_file(args.table, "table file")
    inputs = [table_path] + inputs
    table = ingest_aggregated(table_path, schema)
    ensemble = read_ensemble(args.ensemble)
    sidecar = Path(args.ensemble) / "ensemble.json"
    if sidecar.is_file():
        inputs.append(sidecar)
    if ensemble.source_hash and ensemble.source_hash != table_hash(table):
        raise ValidationError(
            "ensemble was generated from a different table than --table"
        )
    d_values = _floats(args.d_grid, "--d-grid") if args.d_grid else None
    report = ensemble_report(table, ensemble,
                             ks=range(0, args.kmax + 1), d_values=d_values)
    out = _mkdir(args.out)
    outputs = ["report.json", "tau.csv", "totals.csv"]

    emp = pd.DataFrame(report["tau_empirical"])
    ana = pd.DataFrame(report["tau_analytic"])
    tau = emp.merge(ana, on="k", suffixes=("_empirical", "_analytic"))
    tau.to_csv(out / "tau.csv", index=False)
    tot = pd.DataFrame(report["total_analytic"]).merge(
        pd.DataFrame(report["total_empirical"]), on="d",
        suffixes=("_analytic", "_empirical"))
    tot.to_csv(out / "totals.csv", index=False)

    if args.model:
        variables = [v for v in args.model.split(",") if v]
        detail = ensemble_ci_overlap(table, ensemble, variables,
                                     order=args.order)
        detail.to_csv(out / "overlap.csv", index=False)
        summary = overlap_summary(detail)
        summary.to_csv(out / "overlap_summary.csv", index=False)
        report["ci_overlap_summary"] = summary.to_dict(orient="records")
        outputs += ["overlap.csv", "overlap_summary.csv"]

    (out / "report.json").write_text(json.dumps(report, indent=2))
    _write_manifest(out, "metrics", argv, args, inputs, outputs, t0)
    ru = report["risk_utility"]
    print(f"metrics for m={ensemble.m} replicate(s): "
          f"loss={report['loss_empirical']['value']:.4g} "
          f"(analytic {report['loss_analytic']['value']:.4g}), "
          f"risk={ru['risk']:.4g} -> {out}")
    return 0


def cmd_apriori(args, argv) -> int:
    t0 = time.time()
    family, sigma, nu = _family_params(args)
    policy = _zero_policy(args.zero_policy)
    hist = None
    inputs: list[Path] = []
    if args.histogram:
        hist, inputs = _load_histogram(args.histogram)

    def need_hist():
        if hist is None:
            raise UsageError(f"metric {args.metric!r} needs --histogram")

    result: dict = {
        "metric": args.metric, "family": family, "sigma": sigma, "nu": nu,
        "k": args.k, "m": args.m, "zero_policy": policy.label,
    }
    if args.metric == "p_syn_given_orig":
        if family == "gaf":
            value = reproduction_probability(args.k, sigma, nu)
        elif family == "nbi":
            value = float(nbi_pmf(args.k, NbiParams(float(args.k), sigma)))
        else:
            value = float(poisson_pmf(args.k, float(args.k)))
        result["value"] = value
    elif args.metric in ("p_syn", "p_orig_given_syn"):
        need_hist()
        row = tau_analytic(hist, family, sigma, nu, policy, ks=[args.k])
        result["value"] = float(row[args.metric].iloc[0])
    elif args.metric == "loss":
        need_hist()
        result["value"] = loss_l1_analytic(hist, family, sigma, nu, args.m).value
    elif args.metric == "coverage":
        need_hist()
        if args.d is None:
            raise UsageError("coverage needs --d")
        var = total_variance_analytic(hist, family, sigma, nu, policy)
        result["total_sd"] = float(np.sqrt(var))
        result["d"] = args.d
        result["value"] = float(total_coverage(args.d, result["total_sd"]))
    else:  # risk_utility
        need_hist()
        point = risk_utility_point(hist, family, sigma, nu, args.m, policy)
        result.update(risk=point.risk, utility=point.utility,
                      loss=point.loss, value=point.risk)
    text = json.dumps(result, indent=2)
    print(text)
    if args.out:
        out = _mkdir(args.out)
        (out / "apriori.json").write_text(text)
        _write_manifest(out, "apriori", argv, args, inputs,
                        ["apriori.json"], t0)
    return 0


def cmd_calibrate(args, argv) -> int:
    t0 = time.time()
    hist = None
    inputs: list[Path] = []
    if args.histogram:
        hist, inputs = _load_histogram(args.histogram)
    bounds = None
    if args.bounds:
        vals = _floats(args.bounds, "--bounds")
        if len(vals) != 2:
            raise UsageError("--bounds expects LO,HI")
        bounds = (vals[0], vals[1])
    nu = args.nu
    if args.family != "gaf" and nu is not None:
        raise UsageError("--nu only applies to --family gaf")
    target = CalibrationTarget(
        metric=args.metric, target=args.target, free=args.free,
        family=args.family, k=args.k, d=args.d,
        sigma=args.sigma, nu=nu, m=args.m,
        zero_policy=_zero_policy(args.zero_policy),
        bounds=bounds, tolerance=args.tolerance,
    )
    result = calibrate(target, hist)
    text = json.dumps(result.to_dict(), indent=2)
    print(text)
    if args.out:
        out = _mkdir(args.out)
        (out / "calibration.json").write_text(text)
        _write_manifest(out, "calibrate", argv, args, inputs,
                        ["calibration.json"], t0)
    return 0


def cmd_sweep(args, argv) -> int:
    t0 = time.time()
    hist, inputs = _load_histogram(args.histogram)
    families = [f for f in args.families.split(",") if f]
    df = sweep(
        hist,
        families=families,
        sigmas=_floats(args.sigmas, "--sigmas"),
        nus=_floats(args.nus, "--nus"),
        m=args.m,
        zero_policy=_zero_policy(args.zero_policy),
        k=args.k,
    )
    out = _mkdir(args.out)
    df.to_csv(out / "sweep.csv", index=False)
    _write_manifest(out, "sweep", argv, args, inputs, ["sweep.csv"], t0)
    print(f"{len(df)} mechanism(s) swept -> {out / 'sweep.csv'}")
    return 0


def cmd_dist_pmf(args, argv) -> int:
    t0 = time.time()
    family, sigma, nu = _family_params(args)
    pmf = family_pmf_obj(family, args.mu, sigma=sigma, nu=nu,
                         tail_eps=args.tail_eps)
    df = pd.DataFrame({"y": pmf.support, "probability": pmf.probs})
    if args.out:
        out = _mkdir(args.out)
        df.to_csv(out / "pmf.csv", index=False)
        (out / "moments.json").write_text(json.dumps({
            "family": family, "mu": args.mu, "sigma": sigma, "nu": nu,
            "mean": pmf.mean, "variance": pmf.variance,
            "total_mass": pmf.total_mass, "support_min": int(pmf.offset),
            "support_max": int(pmf.offset + pmf.probs.size - 1),
        }, indent=2))
        _write_manifest(out, "dist pmf", argv, args, [],
                        ["pmf.csv", "moments.json"], t0)
        print(f"pmf with {pmf.probs.size} support points -> {out}")
    else:
        df.to_csv(sys.stdout, index=False)
    return 0


# ---------------------------------------------------------------------------
# Parser assembly


def build_parser() -> _Parser:
    parser = _Parser(prog="countsynth",
                     description="Synthetic contingency tables with "
                                 "size-aware count noise.")
    parser.add_argument("--version", action="version",
                        version=f"countsynth {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("ingest", help="aggregate a CSV into a table")
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=("microdata", "aggregated"),
                   default="microdata")
    p.add_argument("--schema", help="schema JSON, or 'benchmark'")
    p.add_argument("--infer", action="store_true",
                   help="infer the schema from microdata")
    p.add_argument("--cap", type=int, default=11)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("genfixture", help="generate a reference table")
    p.add_argument("--schema", default="benchmark")
    p.add_argument("--histogram",
                   help="target size histogram CSV (default: built-in shape)")
    p.add_argument("--tail-mean", type=float, default=25.0)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--cap", type=int, default=11)
    p.add_argument("--microdata", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_genfixture)

    p = sub.add_parser("synth", help="draw synthetic replicates")
    p.add_argument("--table", required=True, help="aggregated CSV")
    p.add_argument("--schema", required=True)
    p.add_argument("--family", choices=("poisson", "nbi", "gaf"),
                   required=True)
    p.add_argument("--sigma", type=float)
    p.add_argument("--nu", type=float)
    p.add_argument("--zero-policy", default="keep",
                   help="keep | alpha=X | bernoulli=P")
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--long", action="store_true",
                   help="also write one long-format CSV")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("metrics", help="score an ensemble against its table")
    p.add_argument("--table", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--ensemble", required=True, help="synth output directory")
    p.add_argument("--kmax", type=int, default=20)
    p.add_argument("--d-grid", help="comma-separated d values")
    p.add_argument("--model", help="comma-separated variables for CI overlap")
    p.add_argument("--order", type=int, choices=(1, 2), default=2)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("apriori", help="analytic metrics, no data needed")
    p.add_argument("--metric", required=True,
                   choices=("p_syn_given_orig", "p_orig_given_syn", "p_syn",
                            "loss", "coverage", "risk_utility"))
    p.add_argument("--family", choices=("poisson", "nbi", "gaf"),
                   default="gaf")
    p.add_argument("--sigma", type=float)
    p.add_argument("--nu", type=float)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--d", type=float)
    p.add_argument("--histogram")
    p.add_argument("--zero-policy", default="keep")
    p.add_argument("--out")
    p.set_defaults(func=cmd_apriori)

    p = sub.add_parser("calibrate", help="solve for sigma or nu")
    p.add_argument("--metric", required=True,
                   choices=("p_syn_given_orig", "p_orig_given_syn",
                            "loss", "coverage"))
    p.add_argument("--target", type=float, required=True)
    p.add_argument("--free", choices=("sigma", "nu"), default="sigma")
    p.add_argument("--family", choices=("nbi", "gaf"), default="gaf")
    p.add_argument("--sigma", type=float, help="fixed sigma when --free nu")
    p.add_argument("--nu", type=float, help="fixed nu when --free sigma")
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--d", type=float)
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--histogram")
    p.add_argument("--zero-policy", default="keep")
    p.add_argument("--bounds", help="LO,HI for the free parameter")
    p.add_argument("--tolerance", type=float, default=1e-6)
    p.add_argument("--out")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("sweep", help="analytic metrics over a parameter grid")
    p.add_argument("--histogram", required=True)
    p.add_argument("--families", default="gaf,nbi")
    p.add_argument("--sigmas", default="0.5,1,2")
    p.add_argument("--nus", default="0,-0.25,-0.5")
    p.add_argument("--m", type=int, default=10)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--zero-policy", default="alpha=0.01")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("dist", help="inspect the noise distributions")
    dist_sub = p.add_subparsers(dest="dist_cmd", metavar="SUBCOMMAND")
    q = dist_sub.add_parser("pmf", help="tabulate a family's pmf")
    q.add_argument("--family", choices=("poisson", "nbi", "gaf"),
                   required=True)
    q.add_argument("--mu", type=float, required=True)
    q.add_argument("--sigma", type=float)
    q.add_argument("--nu", type=float)
    q.add_argument("--tail-eps", type=float, default=1e-12)
    q.add_argument("--out")
    q.set_defaults(func=cmd_dist_pmf)

    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if not hasattr(args, "func"):
        parser.print_usage(sys.stderr)
        return 1
    try:
        return int(args.func(args, argv) or 0)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValidationError, CalibrationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
