"""JSON summaries and CSV residual traces for scenario runs."""

from __future__ import annotations

import io
import json
import re
from pathlib import Path

import numpy as np

from .kernel_algebra import Grid, ResidualReport
from .kernel_algebra.grid import _jsonable


def check_entry(name: str, op: str, report: ResidualReport) -> dict:
    d = report.digest()
    return {
        "name": name,
        "op": op,
        "identity": d["name"],
        "params": d["params"],
        "max_abs_residual": _jsonable(d["max_abs_residual"]),
        "tolerance": d["tolerance"],
        "passed": d["passed"],
        "grid": {"dt": d["grid"].get("dt"), "n": d["grid"].get("n")},
        "values": d["values"],
    }


def trace_csv(report: ResidualReport, grid: Grid) -> str:
    """``t,residual,evaluated`` with one row per grid node, 17 significant digits.

    Nodes where the check was not evaluated carry ``nan`` and ``evaluated = 0``;
    a trace shorter than the grid (a check on a sub-grid) is padded that way.
    """
    trace = report.trace
    res = np.full(grid.n_points, np.nan)
    if trace is not None:
        tr = np.asarray(trace, dtype=float).reshape(-1)
        if tr.shape[0] > grid.n_points:
            raise ValueError(f"trace has {tr.shape[0]} entries, grid has {grid.n_points} nodes")
        res[: tr.shape[0]] = tr
    buf = io.StringIO()
    buf.write("t,residual,evaluated\n")
    for t, r in zip(grid.t, res):
        ok = not np.isnan(r)
        buf.write(f"{t:.17g},{r:.17g},{int(ok)}\n" if ok else f"{t:.17g},nan,0\n")
    return buf.getvalue()


def _safe(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]", "_", name) or "check"


def emit_report(scenario: str, results, grid: Grid, wall_ms: float, out_dir: str | Path | None = None) -> dict:
    """Summary dict; with ``out_dir`` also writes ``summary.json`` and ``traces/<check>.csv``.

    ``results`` is a sequence of ``(name, op, ResidualReport)``.
    """
    checks = [check_entry(n, op, r) for n, op, r in results]
    summary = {"scenario": scenario, "checks": checks, "wall_ms": round(float(wall_ms), 3)}
    if out_dir is not None:
        out = Path(out_dir)
        (out / "traces").mkdir(parents=True, exist_ok=True)
        with open(out / "summary.json", "w", encoding="utf-8", newline="\n") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
        for n, _, r in results:
            with open(out / "traces" / f"{_safe(n)}.csv", "w", encoding="utf-8", newline="\n") as fh:
                fh.write(trace_csv(r, grid))
    return summary
