import argparse
import json
import sys
from pathlib import Path

import numpy as np

from transdim.core.batch import BatchRunner
from transdim.core.config import DIAGNOSTIC_DEFAULTS, parse_config, with_overrides
from transdim.core.contracts import (
    DIAGNOSTIC_REPORT_CONTRACT,
    ESTIMATES_REPORT_CONTRACT,
    check_report_contract,
)
from transdim.core.findings import collect_findings, exit_code, summarize
from transdim.core.io import read_trace, write_frame
from transdim.core.report import (
    diagnostic_report,
    estimates_report,
    load_report,
    load_run_summary,
    save_report,
)

# Panel name -> CSV file written by ``transdim diagnose``.
PANEL_FILES = {
    "ks": "ks.csv",
    "chisq": "chisq.csv",
    "mpsrf": "mpsrf.csv",
    "distance_psrf": "distance_psrf.csv",
}


def _emit_error(exc: BaseException) -> int:
    """Write ``{"error": {"type", "message"}}`` to stderr and return exit code 1."""
    payload = {"error": {"type": type(exc).__name__, "message": str(exc)}}
    print(json.dumps(payload), file=sys.stderr)
    return 1


def _setup(args: argparse.Namespace) -> None:
    from transdim.cli.ui import configure_logging
    configure_logging(verbose=args.verbose)


def _run_directories(paths) -> list:
    return [Path(p) if Path(p).is_dir() else Path(p).parent for p in paths]


def _diagnostic_options(args: argparse.Namespace) -> dict:
    """[diagnostics] settings from --config, else from the run's resolved config, else defaults."""
    options = dict(DIAGNOSTIC_DEFAULTS)
    if args.config:
        options.update(parse_config(args.config).diagnostics)
    else:
        resolved = _run_directories(args.paths)[0] / "resolved_config.json"
        if resolved.exists():
            options.update(load_report(resolved).get("diagnostics", {}))
    if args.burnin is not None:
        options["burn_in"] = args.burnin
    return options


def _cmd_run(args: argparse.Namespace) -> int:
    try:
        _setup(args)
        config = with_overrides(
            parse_config(args.config),
            seed=args.seed, replicates=args.replicates, burn_in=args.burnin,
            thinning=args.thin, workers=args.workers, output=args.out,
        )
        outdir = config.output_dir()
        runner = BatchRunner(config)
        runner.run()
        written = runner.write(outdir)
        summary = load_report(outdir / "run_summary.json")
        if args.json:
            print(json.dumps(summary, indent=2, sort_keys=True))
        else:
            from transdim.cli import ui
            ui.render_run_summary(summary, [str(w) for w in written])
            ui.success(f"Run written to {outdir}")
        return 0
    except Exception as exc:
        return _emit_error(exc)


def _cmd_diagnose(args: argparse.Namespace) -> int:
    try:
        _setup(args)
        options = _diagnostic_options(args)
        trace = read_trace(args.paths)
        rng = np.random.Generator(np.random.Philox(key=args.seed))
        report = diagnostic_report(trace, options, rng=rng)
        series = report.pop("series")

        outdir = Path(args.out) if args.out else _run_directories(args.paths)[0]
        outdir.mkdir(parents=True, exist_ok=True)
        for name, panel in series.items():
            write_frame(panel.to_frame(), outdir / PANEL_FILES[name])

        report["contract"] = check_report_contract(report, DIAGNOSTIC_REPORT_CONTRACT)
        findings = collect_findings(report, options)
        report["findings"] = findings
        report["findings_summary"] = summarize(findings)
        save_report(report, outdir / "diagnostics.json")

        if args.json:
            print(json.dumps(report, indent=2, sort_keys=True))
        else:
            from transdim.cli import ui
            ui.render_diagnostics(report)
            ui.render_findings(findings, report["findings_summary"])
            for warning in report["warnings"]:
                ui.warn(warning)
            ui.success(f"Diagnostics written to {outdir}")
        return exit_code(findings, strict=args.strict)
    except Exception as exc:
        return _emit_error(exc)


def _cmd_estimate(args: argparse.Namespace) -> int:
    try:
        _setup(args)
        trace = read_trace(args.paths)
        summary = load_run_summary(_run_directories(args.paths)[0])
        report = estimates_report(
            trace,
            model_prior=summary["model_prior"] if summary else None,
            jump_graph=summary["jump_graph"] if summary else None,
            burn_in=args.burnin or 0,
            batches=args.batches,
        )
        report["contract"] = check_report_contract(report, ESTIMATES_REPORT_CONTRACT)
        outdir = Path(args.out) if args.out else _run_directories(args.paths)[0]
        save_report(report, outdir / "estimates.json")
        if args.json:
            print(json.dumps(report, indent=2, sort_keys=True))
        else:
            from transdim.cli import ui
            ui.render_estimates(report)
            ui.success(f"Estimates written to {outdir / 'estimates.json'}")
        if report["contract"] or (args.strict and report["warnings"]):
            return 1
        return 0
    except Exception as exc:
        return _emit_error(exc)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--json", action="store_true", help="Print the report as JSON")
    parser.add_argument("--verbose", "-v", action="store_true", help="Log progress to stderr")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="transdim",
        description="transdim - reversible jump MCMC across models of different dimension",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    p_run = subparsers.add_parser("run", help="Run the sampler from a config file")
    p_run.add_argument("--config", required=True, help="TOML, YAML or JSON run configuration")
    p_run.add_argument("--seed", type=int, help="Override sampler.seed")
    p_run.add_argument("--out", help="Output directory (default: output.directory)")
    p_run.add_argument("--replicates", type=int, help="Override sampler.replicates")
    p_run.add_argument("--workers", type=int, help="Worker processes (0 = one per CPU)")
    p_run.add_argument("--burnin", type=int, help="Override sampler.burn_in (iterations)")
    p_run.add_argument("--thin", type=int, help="Override sampler.thinning")
    _add_common(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_diag = subparsers.add_parser("diagnose", help="Convergence diagnostics for replicate traces")
    p_diag.add_argument("paths", nargs="+", help="Run directories or trace_rNN.csv files")
    p_diag.add_argument("--config", help="Config whose [diagnostics] section sets the options")
    p_diag.add_argument("--out", help="Output directory (default: the first run directory)")
    p_diag.add_argument("--burnin", type=int, help="Recorded states dropped from within-chain summaries")
    p_diag.add_argument("--seed", type=int, default=0, help="Seed for the distance-PSRF reference points")
    p_diag.add_argument("--strict", action="store_true", help="Fail on warnings too")
    _add_common(p_diag)
    p_diag.set_defaults(func=_cmd_diagnose)

    p_est = subparsers.add_parser("estimate", help="Model probabilities and Bayes factors")
    p_est.add_argument("paths", nargs="+", help="Run directories or trace_rNN.csv files")
    p_est.add_argument("--out", help="Output directory (default: the first run directory)")
    p_est.add_argument("--burnin", type=int, help="Recorded states dropped before estimating")
    p_est.add_argument("--batches", type=int, default=50, help="Batches for batch-means standard errors")
    p_est.add_argument("--strict", action="store_true", help="Fail when an estimate is unavailable")
    _add_common(p_est)
    p_est.set_defaults(func=_cmd_estimate)
    return parser


def app(argv=None) -> None:
    parser = build_parser()
    args = parser.parse_args(argv)
    sys.exit(args.func(args))


if __name__ == "__main__":
    app()
