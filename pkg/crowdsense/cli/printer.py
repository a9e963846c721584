from typing import Any, Dict, Iterable, Optional

import pandas as pd
from rich.console import Console
from rich.table import Table

from . import constants
from .. import db

# Summaries go to stderr so stage outputs on stdout stay clean
_console = Console(stderr=True)

# Keys shown in the one-line stage summary, in order
_SUMMARY_KEYS = {
    "synth": ("posts", "days", "anomalies", "special_days"),
    "ingest": ("parsed", "malformed", "outside_region", "outside_period", "retained", "slots"),
    "represent": ("slots", "represented", "degenerate", "empty"),
    "symbolize": ("sequences", "symbols", "missing", "clamped"),
    "entropy": ("traces", "samples", "estimator", "window_weeks"),
    "detect": ("days", "method", "top"),
    "evaluate": ("days", "specials", "detection_rate_at_cut", "false_positive_rate_at_cut", "auc"),
    "study": ("slots", "comparable_slots", "opt2_worst_fraction"),
}


def _fmt(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.3f}"
    if isinstance(value, list):
        return ",".join(str(v) for v in value[:3])
    return str(value)


def summary_line(stage: str, exit_code: int, summary: Dict[str, Any]) -> str:
    """One line per stage: status, output and the stage's main counters."""
    label = constants.EXIT_LABELS.get(exit_code, "error")
    if exit_code != constants.EXIT_OK:
        return f"{stage}: {label} [{summary.get('error_code')}] {summary.get('error')}"
    parts = [f"{k}={_fmt(summary[k])}" for k in _SUMMARY_KEYS.get(stage, ()) if k in summary]
    return f"{stage}: ok -> {summary.get('output')} " + " ".join(parts)


def print_stage(stage: str, exit_code: int, summary: Dict[str, Any]) -> None:
    style = "green" if exit_code == constants.EXIT_OK else "red"
    _console.print(f"[{style}]{summary_line(stage, exit_code, summary)}[/]", highlight=False, soft_wrap=True)


def print_comparison(table: pd.DataFrame, title: str = "Sweep comparison") -> None:
    out = Table(title=title)
    out.add_column("slot", justify="right", style="cyan")
    out.add_column("k", justify="right")
    out.add_column("L", justify="right")
    out.add_column("W", justify="right")
    out.add_column("estimator")
    out.add_column("det@20%", justify="right", style="green")
    out.add_column("fpr@20%", justify="right")
    out.add_column("auc", justify="right")
    for row in table.itertuples(index=False):
        out.add_row(str(row.slot_minutes), str(row.k), str(row.L), str(row.window_weeks), row.estimator,
                    _fmt_metric(row.detection_rate_at_cut), _fmt_metric(row.false_positive_rate_at_cut),
                    _fmt_metric(row.auc))
    _console.print(out)


def _fmt_metric(value: Optional[float]) -> str:
    if value is None or pd.isna(value):
        return "-"
    return f"{value:.2f}"


def print_runs(runs: Iterable) -> None:
    runs = list(runs)
    if not runs:
        _console.print("[yellow]No stage runs recorded.[/]")
        return
    table = Table(title="Stage runs")
    table.add_column("ID", style="cyan", justify="right")
    table.add_column("Stage")
    table.add_column("Status")
    table.add_column("Exit", justify="right")
    table.add_column("Error")
    table.add_column("Output")
    table.add_column("Finished")
    for run in runs:
        info = db.run_summary(run)
        status = f"[green]{info['status']}[/]" if info["status"] == "ok" else f"[red]{info['status']}[/]"
        table.add_row(str(info["id"]), info["stage"], status, str(info["exit_code"]), info["error_code"] or "",
                      info["out_path"] or "", info["finished_at"].strftime("%Y-%m-%d %H:%M:%S"))
    _console.print(table)


def print_error(message: str) -> None:
    _console.print(f"[red]{message}[/]", highlight=False)
