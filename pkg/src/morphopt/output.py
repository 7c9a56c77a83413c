"""CSV tables, SVG plots and atomic file writes for study results."""

from __future__ import annotations

import io
import logging
import math
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .effort import DofComparison, EffortResult
from .errors import ConfigValidationError
from .jump import JumpTrace, jump_metrics
from .studies import SweepResult

log = logging.getLogger(__name__)

SVG_HASH_SALT = "morphopt"


def format_value(v: Any) -> str:
    """Locale-independent cell text; floats get at most 9 significant digits."""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.9g}"
    return str(v)


def csv_text(columns: Sequence[str], rows: Iterable[dict[str, Any]]) -> str:
    # values never contain commas or quotes, so no quoting is needed
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(format_value(row[c]) for c in columns))
    return "\n".join(lines) + "\n"


def ensure_writable(directory: str | Path) -> Path:
    """Create ``directory`` if needed and prove a file can be created in it."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    fd, probe = tempfile.mkstemp(prefix=".probe-", dir=d)
    os.close(fd)
    os.unlink(probe)
    return d


def atomic_write(path: str | Path, data: str | bytes) -> Path:
    """Write to a temporary file in the target directory, then rename over ``path``."""
    path = Path(path)
    raw = data.encode() if isinstance(data, str) else data
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(raw)
            fh.flush()
            os.fsync(fh.fileno())
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


# ---------------------------------------------------------------- plots


def _figure():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = SVG_HASH_SALT
    return plt


def _svg(fig) -> str:
    plt = _figure()
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    return buf.getvalue()


def line_chart(
    series: dict[str, tuple[np.ndarray, np.ndarray]],
    xlabel: str,
    ylabel: str,
    vlines: Sequence[tuple[float, str]] = (),
    highlight: tuple[float, float] | None = None,
) -> str:
    plt = _figure()
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, (x, y) in series.items():
        ax.plot(x, y, marker="o", ms=3, label=label)
    for x, gid in vlines:
        ax.axvline(x, color="k", linestyle="--", linewidth=1, gid=gid)
    if highlight is not None:
        ax.plot([highlight[0]], [highlight[1]], marker="*", ms=14, color="tab:red", linestyle="none", gid="design-point")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if len(series) > 1:
        ax.legend()
    fig.tight_layout()
    return _svg(fig)


def heat_map(x: np.ndarray, y: np.ndarray, Z: np.ndarray, xlabel: str, ylabel: str, zlabel: str,
             mark: tuple[int, int] | None = None) -> str:
    """``Z[i, j]`` is plotted at ``(x[i], y[j])``; ``mark`` gets a star."""
    plt = _figure()
    fig, ax = plt.subplots(figsize=(6, 5))
    mesh = ax.pcolormesh(np.arange(len(x) + 1), np.arange(len(y) + 1), np.ma.masked_invalid(Z.T), shading="flat")
    fig.colorbar(mesh, ax=ax, label=zlabel)
    step_x = max(1, len(x) // 5)
    step_y = max(1, len(y) // 5)
    ax.set_xticks(np.arange(len(x))[::step_x] + 0.5, [f"{v:.3g}" for v in x[::step_x]])
    ax.set_yticks(np.arange(len(y))[::step_y] + 0.5, [f"{v:.3g}" for v in y[::step_y]])
    if mark is not None:
        ax.plot([mark[0] + 0.5], [mark[1] + 0.5], marker="*", ms=16, color="w", mec="k", linestyle="none", gid="design-point")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    fig.tight_layout()
    return _svg(fig)


def trace_plot(trace: JumpTrace) -> str:
    """CoM and clearance height against time with dashed lift-off and apogee markers."""
    plt = _figure()
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(trace.time, trace.h_com, label="h_com")
    ax.plot(trace.time, trace.h_clearance, label="h_clearance")
    if trace.lifted:
        ax.axvline(trace.t_liftoff, color="k", linestyle="--", linewidth=1, gid="liftoff-marker")
        ax.axvline(trace.t_apogee, color="k", linestyle="--", linewidth=1, gid="apogee-marker")
    ax.set_xlabel("time [s]")
    ax.set_ylabel("height [m]")
    ax.legend()
    fig.tight_layout()
    return _svg(fig)


def bar_chart(labels: Sequence[str], values: Sequence[float], ylabel: str) -> str:
    plt = _figure()
    fig, ax = plt.subplots(figsize=(4, 4))
    ax.bar(list(labels), list(values), color=["tab:blue", "tab:orange"][: len(labels)])
    ax.set_ylabel(ylabel)
    fig.tight_layout()
    return _svg(fig)


# ---------------------------------------------------------------- results


def sweep_table(results: Sequence[SweepResult], series_key: str | None = None,
                series: Sequence[str] = ()) -> tuple[list[str], list[dict[str, Any]]]:
    """Columns and rows for one or more sweeps sharing a layout.

    With ``series_key`` set, each sweep's rows are prefixed with its label.
    """
    first = results[0]
    if series_key:
        columns = [series_key, "index", "value"]
    else:
        columns = ["index", *first.axis_names]
    columns += list(first.metrics) + ["status", "failed"]
    rows = []
    for k, res in enumerate(results):
        failed = res.failed
        for flat, row in enumerate(res.rows()):
            idx = np.unravel_index(flat, res.shape)
            out = {"index": flat, "status": row["status"], "failed": bool(failed[idx])}
            if series_key:
                out[series_key] = series[k]
                out["value"] = row[res.axis_names[0]]
            else:
                out.update({a: row[a] for a in res.axis_names})
            out.update({m: row[m] for m in res.metrics})
            rows.append(out)
    return columns, rows


def sweep_plot(results: Sequence[SweepResult], labels: Sequence[str], metric: str | None = None,
               xlabel: str | None = None) -> str:
    first = results[0]
    metric = metric or first.primary_metric
    if len(first.shape) == 2:
        Z = first.values(metric)
        return heat_map(first.grids[0], first.grids[1], Z, first.axis_names[0], first.axis_names[1], metric, first.design_point)
    relative = all("nominal_mass" in r.fixed for r in results) and len(results) > 1
    series = {}
    highlight = None
    for res, label in zip(results, labels):
        y = res.values(metric).copy()
        y[res.failed] = np.nan
        x = res.grids[0] - res.fixed["nominal_mass"] if relative else res.grids[0]
        series[label] = (x, y)
    if len(results) == 1 and first.design_point is not None:
        i = first.design_point[0]
        highlight = (first.grids[0][i], first.values(metric)[i])
    vlines = [(first.fixed["psi_star"], "psi-star-marker")] if "psi_star" in first.fixed else []
    if relative:
        xlabel = "link mass change [kg]"
    return line_chart(series, xlabel or first.axis_names[0], metric, vlines=vlines, highlight=highlight)


def emit_outputs(result, directory: str | Path, formats: Sequence[str] = ("csv", "svg", "json"),
                 labels: Sequence[str] = (), series_key: str | None = None,
                 extra_rows: Sequence[dict[str, Any]] = ()) -> tuple[list[str], list[str]]:
    """Write ``results.csv``, ``plot.svg`` and ``trace.json`` as applicable.

    ``result`` is a :class:`SweepResult`, a list of them (one series each),
    a :class:`JumpTrace`, an :class:`EffortResult` or a :class:`DofComparison`.
    Returns the written file names and any warnings.
    """
    bad = [f for f in formats if f not in ("csv", "svg", "json")]
    if bad:
        raise ConfigValidationError("output.formats", f"unsupported format {bad[0]!r}")
    d = ensure_writable(directory)
    written: list[str] = []
    warnings: list[str] = []
    svg: str | None = None

    if isinstance(result, JumpTrace):
        row = {"policy_mode": result.policy.mode if result.policy else "", **jump_metrics(result).as_row(),
               "t_liftoff": result.t_liftoff, "t_apogee": result.t_apogee, "lifted": result.lifted}
        columns = list(row)
        rows = [row]
        if "svg" in formats:
            svg = trace_plot(result)
        if "json" in formats:
            atomic_write(d / "trace.json", result.to_json())
            written.append("trace.json")
    elif isinstance(result, EffortResult):
        columns = ["index", "xi_local", "defined", "failure"]
        rows = [{"index": i, "xi_local": v, "defined": math.isfinite(v), "failure": result.failures.get(i, "")}
                for i, v in enumerate(result.xi_local)]
        rows.append({"index": "total", "xi_local": result.xi_aggregate, "defined": True, "failure": ""})
        if "svg" in formats:
            svg = bar_chart([str(i) for i in range(len(result.xi_local))], np.where(result.defined, result.xi_local, 0.0), "xi_local")
    elif isinstance(result, DofComparison):
        columns = ["variant", "xi_aggregate", "ratio_to_5dof", "zeta_hat", "horizon"]
        rows = [
            {"variant": "5dof", "xi_aggregate": result.xi_5dof, "ratio_to_5dof": 1.0, "zeta_hat": result.zeta_hat, "horizon": result.horizon},
            {"variant": "6dof", "xi_aggregate": result.xi_6dof, "ratio_to_5dof": result.ratio, "zeta_hat": result.zeta_hat, "horizon": result.horizon},
        ]
        if "svg" in formats:
            svg = bar_chart(["5dof", "6dof"], [result.xi_5dof, result.xi_6dof], "xi_aggregate")
    else:
        results = [result] if isinstance(result, SweepResult) else list(result)
        labels = list(labels) or [results[0].primary_metric]
        columns, rows = sweep_table(results, series_key, labels)
        if "svg" in formats:
            if all(r.failed.all() for r in results):
                warnings.append("every sweep point failed; plot.svg omitted")
                log.warning(warnings[-1])
            else:
                svg = sweep_plot(results, labels)

    rows = list(rows) + list(extra_rows)
    if "csv" in formats:
        atomic_write(d / "results.csv", csv_text(columns, rows))
        written.append("results.csv")
    if svg is not None:
        atomic_write(d / "plot.svg", svg)
        written.append("plot.svg")
    return sorted(written), warnings
