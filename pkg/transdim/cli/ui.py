"""
Rich rendering helpers for the transdim command line.

Human-readable output goes through the module-level :data:`console` (stdout);
logging goes through a RichHandler on stderr. Functions here take the plain
report dicts produced by :mod:`transdim.core.report` and render them; they
hold no state of their own.
"""

import logging
import sys
from typing import Any, Dict, List, Optional

from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel
from rich.table import Table


def _make_console(stderr: bool = False) -> Console:
    """
    Build a console, forcing UTF-8 output where possible.

    Reconfiguring the streams to UTF-8 keeps the glyphs below working on
    consoles whose default code page is not UTF-8.
    """
    for stream in (sys.stdout, sys.stderr):
        reconfigure = getattr(stream, "reconfigure", None)
        if reconfigure is not None:
            try:
                reconfigure(encoding="utf-8", errors="replace")
            except Exception:
                pass
    return Console(stderr=stderr)


console = _make_console()

_SEVERITY_STYLE = {"error": "red", "warning": "yellow", "info": "cyan"}


def configure_logging(verbose: bool = False) -> None:
    """Route library logging to stderr: WARNING by default, INFO with ``verbose``."""
    handler = RichHandler(console=_make_console(stderr=True), show_time=False, show_path=False)
    root = logging.getLogger("transdim")
    root.handlers[:] = [handler]
    root.setLevel(logging.INFO if verbose else logging.WARNING)
    root.propagate = False


def success(message: str) -> None:
    console.print(f"[green]✔[/] {message}")


def warn(message: str) -> None:
    console.print(f"[yellow]⚠[/] {message}")


def _fmt(value: Optional[float], digits: int = 4) -> str:
    if value is None:
        return "—"
    if isinstance(value, float):
        return f"{value:.{digits}g}"
    return str(value)


# ------------------------------------------------------------------------ run
def render_run_summary(summary: Dict[str, Any], written: List[str]) -> None:
    """Per-replicate move counts after ``transdim run``."""
    table = Table(title=f"{summary.get('model_kind')} · seed {summary.get('seed')}")
    table.add_column("replicate", justify="right")
    table.add_column("states", justify="right")
    table.add_column("final k", justify="right")
    table.add_column("between-model moves")
    for rep in summary.get("replicates", []):
        counts = rep.get("move_counts", {})
        moves = ", ".join(f"{key} {c['accepted']}/{c['attempted']}" for key, c in counts.items())
        table.add_row(str(rep["replicate"]), str(rep["recorded_states"]),
                      _fmt(rep.get("final_model")), moves or "—")
    console.print(table)
    console.print(f"[dim]{len(written)} files written[/]")


# ---------------------------------------------------------------- diagnostics
def render_diagnostics(report: Dict[str, Any]) -> None:
    """Final value of every diagnostic curve."""
    panels = report.get("panels") or {}
    if panels:
        table = Table(title="convergence diagnostics (last checkpoint)")
        table.add_column("panel", style="bold")
        table.add_column("curve")
        table.add_column("value", justify="right")
        table.add_column("p-value", justify="right")
        for name, panel in panels.items():
            p_values = panel.get("final_p_values") or {}
            for label, value in panel.get("final", {}).items():
                table.add_row(name, label, _fmt(value), _fmt(p_values.get(label)))
        console.print(table)
    for rep in report.get("within_chain", []):
        probs = rep.get("model_probabilities", {})
        line = ", ".join(f"k={k}: {v['probability']:.3f}" for k, v in probs.items())
        console.print(f"[dim]replicate {rep['replicate']}:[/] {line}")


def render_findings(findings: List[Dict], summary: Dict[str, int]) -> None:
    if not findings:
        success("No findings.")
        return
    console.print(
        Panel.fit(
            f"[red]{summary['error']} error[/]  [yellow]{summary['warning']} warning[/]  "
            f"[cyan]{summary['info']} info[/]",
            title="findings",
        )
    )
    for f in findings:
        style = _SEVERITY_STYLE.get(f["severity"], "white")
        console.print(f"  [{style}]{f['severity']:7s}[/] {f['check_id']}: {f['message']}")


# ----------------------------------------------------------------- estimates
def render_estimates(report: Dict[str, Any]) -> None:
    """Model probabilities and the Bayes factor table."""
    probs = Table(title="posterior model probabilities")
    probs.add_column("k", justify="right")
    probs.add_column("probability", justify="right")
    probs.add_column("std. error", justify="right")
    probs.add_column("visits", justify="right")
    for k, entry in report.get("model_probabilities", {}).items():
        probs.add_row(k, _fmt(entry["probability"]), _fmt(entry["standard_error"]), str(entry["visits"]))
    console.print(probs)

    rows = report.get("bayes_factors") or []
    if not rows:
        return
    table = Table(title="Bayes factors B(k', k)")
    table.add_column("k'", justify="right")
    table.add_column("k", justify="right")
    table.add_column("visits", justify="right")
    table.add_column("bridge", justify="right")
    table.add_column("± s.e.", justify="right")
    table.add_column("J_k / J_k'", justify="right")
    for row in rows:
        table.add_row(str(row["k_prime"]), str(row["k"]), _fmt(row["visits"]), _fmt(row["bridge"]),
                      _fmt(row["bridge_standard_error"]),
                      f"{row['attempts_forward']} / {row['attempts_reverse']}")
    console.print(table)
    for warning in report.get("warnings", []):
        warn(warning)
