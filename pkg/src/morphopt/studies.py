"""Design-parameter sweeps over the jump model.

Every grid point is evaluated independently and written into a pre-assigned
slot, so results do not depend on the worker count or completion order.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Sequence

import numpy as np

from .actuators import AK10_9_ALPHA
from .errors import MorphoptError
from .jump import SearchSpace, study_search_space, search_extension_profile
from .morphology import LINK_NAMES, MorphologySpec, build_morphology
from .planar import SimConfig

STATUS_OK = "ok"
STATUS_NO_LIFTOFF = "no_liftoff"

JUMP_METRICS = ("max_h_com", "max_h_clearance", "contact_ratio", "peak_mechanical_power")


@dataclass
class SweepResult:
    """Grid of design values mapped to scalar metrics.

    ``metrics[name]`` and ``status`` have the grid's shape. A status other than
    ``ok``/``no_liftoff`` names the error that stopped the point; its metrics are NaN.
    """

    axis_names: tuple[str, ...]
    grids: tuple[np.ndarray, ...]
    metrics: dict[str, np.ndarray]
    status: np.ndarray
    fixed: dict[str, Any] = field(default_factory=dict)
    design_point: tuple[int, ...] | None = None
    primary_metric: str = ""

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(g) for g in self.grids)

    @property
    def failed(self) -> np.ndarray:
        return ~np.isin(self.status, (STATUS_OK, STATUS_NO_LIFTOFF))

    @property
    def n_failed(self) -> int:
        return int(np.count_nonzero(self.failed))

    def values(self, metric: str | None = None) -> np.ndarray:
        return self.metrics[metric or self.primary_metric]

    def rows(self) -> list[dict[str, Any]]:
        """One row per grid point in C order: axis values, metrics, status."""
        out = []
        for idx in np.ndindex(*self.shape):
            row: dict[str, Any] = {name: float(g[i]) for name, g, i in zip(self.axis_names, self.grids, idx)}
            for name, arr in self.metrics.items():
                row[name] = float(arr[idx])
            row["status"] = str(self.status[idx])
            out.append(row)
        return out


def _evaluate_tasks(fn: Callable, tasks: Sequence, workers: int) -> list:
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    workers = min(workers, len(tasks), os.cpu_count() or 1) if workers > 0 else (os.cpu_count() or 1)
    if workers <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        # map keeps submission order, so slot i always holds task i
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


def _jump_point(task) -> tuple[str, dict[str, float]]:
    m, cfg, space = task
    try:
        _, metrics, _ = search_extension_profile(m, cfg, space)
    except MorphoptError as exc:
        return type(exc).__name__, {k: math.nan for k in JUMP_METRICS}
    if metrics.lifted:
        return STATUS_OK, metrics.as_row()
    # a grounded robot clears nothing, whatever its links did in stance
    row = metrics.as_row()
    row["max_h_clearance"] = 0.0
    return STATUS_NO_LIFTOFF, row


def run_jump_grid(
    morphologies: Sequence[MorphologySpec],
    shape: tuple[int, ...],
    cfg: SimConfig,
    space: SearchSpace | None,
    workers: int = 1,
) -> tuple[dict[str, np.ndarray], np.ndarray]:
    space = space or study_search_space()
    results = _evaluate_tasks(_jump_point, [(m, cfg, space) for m in morphologies], workers)
    metrics = {k: np.full(shape, math.nan) for k in JUMP_METRICS}
    status = np.empty(shape, dtype=object)
    for flat, (st, row) in enumerate(results):
        idx = np.unravel_index(flat, shape)
        status[idx] = st
        for k in JUMP_METRICS:
            metrics[k][idx] = row[k]
    return metrics, status


def nominal_jump(m: MorphologySpec, cfg: SimConfig = SimConfig(), space: SearchSpace | None = None):
    """Metrics of ``m`` itself under the same search the sweeps use."""
    _, metrics, _ = search_extension_profile(m, cfg, space or study_search_space())
    return metrics


def mass_sensitivity_sweep(
    m: MorphologySpec,
    link: str,
    mass_grid: Sequence[float],
    cfg: SimConfig = SimConfig(),
    space: SearchSpace | None = None,
    workers: int = 1,
) -> SweepResult:
    """Vary one link's mass at fixed geometry; other links keep their nominal values."""
    link = link.lower()
    if link not in LINK_NAMES:
        raise ValueError(f"link must be one of {LINK_NAMES}, got {link!r}")
    grid = np.asarray(mass_grid, dtype=float)
    if grid.size == 0 or np.any(grid <= 0):
        raise ValueError("mass grid must be non-empty and positive")
    variants = [m.with_link_mass(link, float(v)) for v in grid]
    metrics, status = run_jump_grid(variants, grid.shape, cfg, space, workers)
    nominal = getattr(m, link).mass
    hits = np.nonzero(grid == nominal)[0]
    return SweepResult(
        axis_names=(f"{link}_mass",),
        grids=(grid,),
        metrics=metrics,
        status=status,
        fixed={"link": link, "nominal_mass": nominal, "total_mass": m.total_mass},
        design_point=(int(hits[0]),) if hits.size else None,
        primary_metric="max_h_com",
    )


def mass_grid_around(m: MorphologySpec, link: str, span: float = 2.0, points: int = 9) -> np.ndarray:
    """Symmetric grid of ``points`` masses within ``+/- span`` kg of the nominal."""
    nominal = getattr(m, link).mass
    return nominal + np.linspace(-span, span, points)


def least_squares_slope(x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ok = np.isfinite(y)
    return float(np.polyfit(x[ok], y[ok], 1)[0])


def gear_ratio_grid(nominal: float, points: int = 15, span: float = 2.0 ** 1.5) -> np.ndarray:
    """Geometric grid from ``nominal/span`` to ``nominal*span`` with the nominal at the centre."""
    if points % 2 == 0:
        raise ValueError("use an odd point count so the design ratio lies on the grid")
    half = points // 2
    k = np.arange(-half, half + 1) / half
    grid = nominal * span**k
    grid[half] = nominal
    return grid


def gear_ratio_landscape(
    m: MorphologySpec,
    gr_alpha_grid: Sequence[float] | None = None,
    gr_beta_grid: Sequence[float] | None = None,
    cfg: SimConfig = SimConfig(),
    space: SearchSpace | None = None,
    workers: int = 1,
) -> SweepResult:
    """Jump height over (GR_alpha on ``mu``, GR_beta on ``q_h``).

    Motor-side torque and speed stay fixed, so output torque scales with the
    ratio, output speed inversely, and reflected inertia with its square.
    """
    ga0 = m.mu_actuator.gear_ratio
    gb0 = m.q_h_actuator.gear_ratio
    ga = np.asarray(gear_ratio_grid(ga0) if gr_alpha_grid is None else gr_alpha_grid, dtype=float)
    gb = np.asarray(gear_ratio_grid(gb0) if gr_beta_grid is None else gr_beta_grid, dtype=float)
    if ga.size == 0 or gb.size == 0 or np.any(ga <= 0) or np.any(gb <= 0):
        raise ValueError("gear ratio grids must be non-empty and positive")
    variants = [
        replace(m, mu_actuator=m.mu_actuator.with_gear_ratio(a), q_h_actuator=m.q_h_actuator.with_gear_ratio(b))
        if (a, b) != (ga0, gb0) else m
        for a in ga
        for b in gb
    ]
    metrics, status = run_jump_grid(variants, (ga.size, gb.size), cfg, space, workers)
    ia = np.nonzero(ga == ga0)[0]
    ib = np.nonzero(gb == gb0)[0]
    design = (int(ia[0]), int(ib[0])) if ia.size and ib.size else None
    return SweepResult(
        axis_names=("gr_alpha", "gr_beta"),
        grids=(ga, gb),
        metrics=metrics,
        status=status,
        fixed={"gr_alpha_design": ga0, "gr_beta_design": gb0},
        design_point=design,
        primary_metric="max_h_com",
    )


# transmission used by the scale study for every jumping actuator
SCALE_STUDY_GEAR_RATIO = 9.0


def scale_variant(
    m: MorphologySpec,
    scale: float,
    coupled: bool,
    gear_ratio: float = SCALE_STUDY_GEAR_RATIO,
    extra_actuator_mass: float = 0.0,
) -> MorphologySpec:
    """``m`` rebuilt at absolute ``scale`` with AK10-9 units at ``gear_ratio``.

    ``mu`` keeps its actuator count; ``q_h`` gets one unit, or a coupled pair
    when ``coupled``. ``extra_actuator_mass`` (kg) is added to the Head for the
    second unit of the pair.
    """
    scaled = build_morphology(m, scale / m.scale)
    unit = AK10_9_ALPHA.with_gear_ratio(gear_ratio)
    mu_act = replace(unit, count=m.mu_actuator.count, kp=m.mu_actuator.kp, kd=m.mu_actuator.kd,
                     rotor_inertia=m.mu_actuator.rotor_inertia)
    qh_act = replace(unit, count=2 if coupled else 1, kp=m.q_h_actuator.kp, kd=m.q_h_actuator.kd,
                     rotor_inertia=m.q_h_actuator.rotor_inertia)
    out = replace(scaled, mu_actuator=mu_act, q_h_actuator=qh_act)
    if coupled and extra_actuator_mass > 0:
        out = out.with_link_mass("head", out.head.mass + extra_actuator_mass)
    return out


def scale_study(
    m: MorphologySpec,
    scale_grid: Sequence[float],
    coupled: bool | str,
    cfg: SimConfig = SimConfig(),
    space: SearchSpace | None = None,
    workers: int = 1,
    extra_actuator_mass: float = 0.0,
) -> SweepResult:
    """Clearance height and contact ratio against gross scale (1.0 = 1 m Neck)."""
    if isinstance(coupled, str):
        if coupled not in ("single", "coupled"):
            raise ValueError(f"coupled must be 'single' or 'coupled', got {coupled!r}")
        coupled = coupled == "coupled"
    grid = np.asarray(scale_grid, dtype=float)
    if grid.size == 0 or np.any(grid <= 0):
        raise ValueError("scale grid must be non-empty and positive")
    variants = [scale_variant(m, float(s), coupled, extra_actuator_mass=extra_actuator_mass) for s in grid]
    metrics, status = run_jump_grid(variants, grid.shape, cfg, space, workers)
    hits = np.nonzero(np.isclose(grid, m.scale, rtol=0, atol=1e-12))[0]
    return SweepResult(
        axis_names=("scale",),
        grids=(grid,),
        metrics=metrics,
        status=status,
        fixed={"q_h_actuator": "coupled" if coupled else "single", "gear_ratio": SCALE_STUDY_GEAR_RATIO},
        design_point=(int(hits[0]),) if hits.size else None,
        primary_metric="max_h_clearance",
    )


def default_scale_grid(points: int = 9, lo: float = 0.1, hi: float = 0.3) -> np.ndarray:
    """Scales spanning the change from speed-limited to torque-limited jumping."""
    return np.linspace(lo, hi, points)
