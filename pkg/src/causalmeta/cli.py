"""``causalmeta`` command line interface.

Subcommands: analyze, forest, compare, simulate. Exit codes: 0 on success,
2 for invalid input or configuration, 1 for anything unexpected.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .analysis import AnalysisResult, analyze
from .compare import compare_batch, format_table, records_csv
from .config import RunConfig, SimulationConfig, load_simulation_config
from .errors import ConfigError, MetaAnalysisError
from .forest import render_svg, render_text
from .io import dataset_to_dict, load_dataset
from .simulation import MismatchDGP, calibrate_theorem2, run_mismatch, simulate_meta

OUTPUT_DIR_ENV = "CAUSALMETA_OUTPUT_DIR"


def _g(v) -> str:
    if v is None:
        return "-"
    return f"{v:.4g}"


def _common(p: argparse.ArgumentParser, outputs: tuple[str, ...], default_output: str = "text") -> None:
    p.add_argument("--measure", choices=("rd", "rr", "or"), default="rr")
    p.add_argument("--model", choices=("fe", "re", "causal", "all"), default="all")
    p.add_argument("--weights", default="pooled", help="uniform | pooled | custom:w1,w2,...")
    p.add_argument("--ci-level", type=float, default=0.95)
    p.add_argument("--correction", choices=("reject", "haldane"), default="haldane")
    p.add_argument("--tau2", choices=("dl", "pm"), default="dl", help="between-study variance estimator")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", choices=outputs, default=default_output)
    p.add_argument("--out", type=Path, help="write to this file instead of stdout")


def _run_config(args, **overrides) -> RunConfig:
    raw = dict(measure=args.measure, model=args.model, weights=args.weights, ci_level=args.ci_level,
               correction=args.correction, seed=args.seed, output=args.output, tau2=args.tau2)
    raw.update(overrides)
    return RunConfig.build(**raw)


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text, encoding="utf-8")


def _analysis(path: Path, cfg: RunConfig) -> AnalysisResult:
    ds = load_dataset(path)
    return analyze(ds, cfg.measure, cfg.model, cfg.weights, cfg.ci_level, cfg.correction, cfg.tau2)


def format_analysis_text(res: AnalysisResult) -> str:
    m = res.measure.value.upper()
    lines = [f"dataset: {res.dataset.name}  studies: {res.dataset.k}  patients: {res.dataset.n}  measure: {m}", ""]
    lab_w = max([len(s.label) for s in res.studies] + [5])
    lines.append(f"{'study'.ljust(lab_w)}  {'estimate':>10}  {'ci_low':>10}  {'ci_high':>10}  {'variance':>10}")
    for s in res.studies:
        flag = "  (corrected)" if s.corrected else ""
        lines.append(f"{s.label.ljust(lab_w)}  {_g(s.point):>10}  {_g(s.ci_low):>10}  {_g(s.ci_high):>10}  "
                     f"{_g(s.variance):>10}{flag}")
    lines.append("")
    lines.append(f"{'model':<15}  {'estimate':>10}  {'ci_low':>10}  {'ci_high':>10}  {'tau2':>8}  weights")
    for p in res.pooled:
        w = ", ".join(f"{x:.3f}" for x in p.weights)
        lines.append(f"{p.method.value:<15}  {_g(p.point):>10}  {_g(p.ci_low):>10}  {_g(p.ci_high):>10}  "
                     f"{_g(p.tau2):>8}  [{w}]")
    warnings = [f"{p.method.value}: {w}" for p in res.pooled for w in p.warnings]
    if warnings:
        lines.append("")
        lines.extend(f"warning: {w}" for w in warnings)
    return "\n".join(lines) + "\n"


def format_analysis_csv(res: AnalysisResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["row", "label", "estimate", "ci_low", "ci_high", "tau2", "weight"])
    for s in res.studies:
        w.writerow(["study", s.label, repr(s.point), repr(s.ci_low), repr(s.ci_high), "", ""])
    for p in res.pooled:
        tau2 = "" if p.tau2 is None else repr(p.tau2)
        w.writerow(["pooled", p.method.value, repr(p.point), repr(p.ci_low), repr(p.ci_high), tau2,
                    ";".join(repr(x) for x in p.weights)])
    return buf.getvalue()


def cmd_analyze(args) -> int:
    cfg = _run_config(args)
    res = _analysis(args.input, cfg)
    if cfg.output == "json":
        text = json.dumps(res.to_dict(), indent=2) + "\n"
    elif cfg.output == "csv":
        text = format_analysis_csv(res)
    else:
        text = format_analysis_text(res)
    _emit(text, args.out)
    return 0


def cmd_forest(args) -> int:
    cfg = _run_config(args)
    res = _analysis(args.input, cfg)
    text = render_svg(res) if cfg.output == "svg" else render_text(res)
    _emit(text, args.out)
    return 0


def cmd_compare(args) -> int:
    if not 0.0 < args.ci_level < 1.0:
        raise ConfigError("ci-level must lie strictly between 0 and 1")
    result = compare_batch(args.directory, args.measure, args.ci_level, args.correction, args.tau2,
                           workers=args.workers)
    if args.output == "json":
        text = json.dumps(result.to_dict(), indent=2) + "\n"
    elif args.output == "csv":
        text = records_csv(result.records)
    else:
        text = format_table(result)
    _emit(text, args.out)
    if args.records is not None:
        args.records.write_text(records_csv(result.records), encoding="utf-8")
    return 0


def _simulation_config(args) -> SimulationConfig:
    cfg = load_simulation_config(args.config) if args.config else SimulationConfig()
    over = {}
    for key in ("experiment", "replications", "seed", "n"):
        v = getattr(args, key)
        if v is not None:
            over[key] = v
    dgp_over = {}
    for key in ("m1", "m2", "beta1", "beta0"):
        v = getattr(args, key)
        if v is not None:
            dgp_over[key] = tuple(v)
    for key in ("eta", "p_study", "p_treat"):
        v = getattr(args, key)
        if v is not None:
            dgp_over[key] = v
    if args.patients is not None:
        dgp_over["n"] = args.patients
    if dgp_over:
        over["dgp"] = replace(cfg.dgp, **dgp_over)
    return replace(cfg, **over) if over else cfg


def format_simulation_text(report: dict) -> str:
    exp = report["experiment"]
    lines = [f"experiment: {exp}  replications: {report.get('replications', 1)}  seed: {report['seed']}"]
    if exp == "mismatch":
        lines.append("")
        lines.append(f"{'estimator':<10}  {'RD':>10}  {'RR':>10}  {'OR':>10}   (medians)")
        for e, d in report["medians"].items():
            lines.append(f"{e:<10}  {_g(d['rd']):>10}  {_g(d['rr']):>10}  {_g(d['or']):>10}")
        t = report["truth"]
        lines.append(f"{'truth':<10}  {_g(t['rd']):>10}  {_g(t['rr']):>10}  {_g(t['or']):>10}")
        lines.append(f"causal sign consistency: {report['sign_consistent_fraction']:.1%}")
        lines.extend(f"note: {n}" for n in report["notes"])
    elif exp == "calibrate":
        lines.append(f"n per meta-analysis: {report['n']}")
        lines.append("")
        lines.append(f"{'measure':<8}  {'truth':>10}  {'mean':>10}  {'emp.var':>10}  {'mean s2':>10}  {'ratio':>8}  {'coverage':>8}")
        for r in report["results"]:
            lines.append(f"{r['measure']:<8}  {_g(r['true_value']):>10}  {_g(r['mean_point']):>10}  "
                         f"{_g(r['empirical_variance']):>10}  {_g(r['mean_sigma2']):>10}  {r['ratio']:>8.4f}  "
                         f"{r['coverage']:>8.4f}")
    else:
        lines.append("")
        lines.append("label,n11,n10,n01,n00")
        for s in report["dataset"]["studies"]:
            lines.append(f"{s['label']},{s['n11']},{s['n10']},{s['n01']},{s['n00']}")
    return "\n".join(lines) + "\n"


def cmd_simulate(args) -> int:
    cfg = _simulation_config(args)
    reps = cfg.effective_replications
    boxplot = None
    if cfg.experiment == "mismatch":
        rep = run_mismatch(cfg.dgp, reps, cfg.seed)
        report = rep.to_dict()
        boxplot = rep.boxplot_rows()
    elif cfg.experiment == "calibrate":
        report = calibrate_theorem2(cfg.rates, cfg.n, reps, cfg.seed, ci_level=cfg.ci_level).to_dict()
    else:
        ds = simulate_meta(cfg.dgp, cfg.seed)
        report = {"experiment": "draw", "seed": cfg.seed, "dgp": _dgp_dict(cfg.dgp),
                  "dataset": dataset_to_dict(ds)}

    text = json.dumps(report, indent=2) + "\n" if args.output == "json" else format_simulation_text(report)
    _emit(text, args.out)

    out_dir = args.out_dir or os.environ.get(OUTPUT_DIR_ENV) or None
    if out_dir:
        d = Path(out_dir)
        d.mkdir(parents=True, exist_ok=True)
        (d / f"{cfg.experiment}_report.json").write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
        if boxplot is not None and args.boxplot_csv:
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(["replication", "estimator", "measure", "value"])
            for i, e, m, v in boxplot:
                w.writerow([i, e, m, repr(v)])
            (d / "mismatch_boxplot.csv").write_text(buf.getvalue(), encoding="utf-8")
    elif args.boxplot_csv:
        raise ConfigError(f"--boxplot-csv needs --out-dir or ${OUTPUT_DIR_ENV}")
    return 0


def _dgp_dict(dgp: MismatchDGP) -> dict:
    from dataclasses import asdict

    return asdict(dgp)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="causalmeta", description="Classical and causal meta-analysis of 2x2 tables")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="per-study effects and pooled estimates for one dataset")
    p.add_argument("input", type=Path)
    _common(p, ("text", "json", "csv"))
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("forest", help="forest plot as text or SVG")
    p.add_argument("input", type=Path)
    _common(p, ("text", "svg"))
    p.set_defaults(func=cmd_forest)

    p = sub.add_parser("compare", help="random-effects vs causal agreement over a directory of datasets")
    p.add_argument("directory", type=Path)
    p.add_argument("--measure", nargs="+", choices=("rd", "rr", "or"), default=["rd", "rr", "or"])
    p.add_argument("--ci-level", type=float, default=0.95)
    p.add_argument("--correction", choices=("reject", "haldane"), default="haldane")
    p.add_argument("--tau2", choices=("dl", "pm"), default="dl")
    p.add_argument("--output", choices=("text", "json", "csv"), default="text")
    p.add_argument("--out", type=Path)
    p.add_argument("--records", type=Path, help="also write per-dataset records as CSV")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("simulate", help="synthetic experiments")
    p.add_argument("--experiment", choices=("mismatch", "calibrate", "draw"))
    p.add_argument("--config", type=Path, help="INI simulation config")
    p.add_argument("--replications", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--n", type=int, help="patients per meta-analysis for calibrate")
    p.add_argument("--patients", type=int, help="patients per meta-analysis for the covariate-shift design")
    p.add_argument("--eta", type=float)
    p.add_argument("--p-study", type=float)
    p.add_argument("--p-treat", type=float)
    for name in ("m1", "m2", "beta1", "beta0"):
        p.add_argument(f"--{name}", type=float, nargs=2, metavar=("X1", "X2"))
    p.add_argument("--output", choices=("text", "json"), default="text")
    p.add_argument("--out", type=Path)
    p.add_argument("--out-dir", type=Path, help=f"directory for report files (default ${OUTPUT_DIR_ENV})")
    p.add_argument("--boxplot-csv", action="store_true", help="also write per-replication mismatch estimates")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (MetaAnalysisError, OSError) as exc:
        print(f"causalmeta {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - last-resort exit code contract
        print(f"causalmeta {args.command}: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
