"""Balance effort from linearized minimum-energy controllability.

Each balanced pose is linearized, its local effort is ``tr(W(T)^-1)/n`` and the
design-level effort is the sum over poses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import AggregateUndefinedError, MorphoptError
from .gramian import local_effort_metric
from .morphology import MorphologySpec
from .studies import SweepResult, _evaluate_tasks
from .wheelie import WheelieConfig, WheelieModel, equilibrium_config, find_static_configs, linearize

DEFAULT_HORIZON = 2.0
DEFAULT_PITCHES = tuple(math.radians(p) for p in (20.0, 30.0, 40.0, 50.0, 60.0))


@dataclass
class EffortResult:
    xi_local: np.ndarray  # inf where the pose failed
    xi_aggregate: float
    horizon: float
    failures: dict[int, str] = field(default_factory=dict)

    @property
    def defined(self) -> np.ndarray:
        return np.isfinite(self.xi_local)


def balance_configs(model: WheelieModel, pitches: Sequence[float] = DEFAULT_PITCHES) -> list[WheelieConfig]:
    """Balanced poses of ``model`` at the given pitches (the default pose set)."""
    return find_static_configs(model, pitches)


def _adapt(model: WheelieModel, config: WheelieConfig) -> WheelieConfig:
    """Re-evaluate ``config`` on ``model``, adding or dropping the extra joint at zero."""
    q = np.asarray(config.q, dtype=float)
    if q.size < model.nq:
        q = np.concatenate([q, np.zeros(model.nq - q.size)])
    elif q.size > model.nq:
        if np.any(q[model.nq:] != 0.0):
            raise ValueError("cannot drop a non-zero extra joint")
        q = q[: model.nq]
    return equilibrium_config(model, q)


def _local(task) -> tuple[float, str]:
    model, config, T = task
    try:
        xi = local_effort_metric(linearize(model, _adapt(model, config)), T)
    except MorphoptError as exc:
        return math.inf, type(exc).__name__
    if not math.isfinite(xi):
        return math.inf, "uncontrollable"
    return xi, ""


def aggregate_effort(
    model: WheelieModel,
    configs: Sequence[WheelieConfig],
    T: float = DEFAULT_HORIZON,
    workers: int = 1,
) -> EffortResult:
    """Sum of local efforts over ``configs``; failed poses are recorded and skipped."""
    if len(configs) == 0:
        raise ValueError("need at least one configuration")
    out = _evaluate_tasks(_local, [(model, c, T) for c in configs], workers)
    xi = np.array([v for v, _ in out])
    failures = {i: why for i, (_, why) in enumerate(out) if why}
    if len(failures) == len(configs):
        raise AggregateUndefinedError(f"all {len(configs)} configurations failed: {sorted(set(failures.values()))}")
    # fsum is exactly rounded, so the total does not depend on pose order
    return EffortResult(xi, math.fsum(xi[np.isfinite(xi)]), T, failures)


def psi_sweep(
    model: WheelieModel,
    psi_grid: Sequence[float],
    configs: Sequence[WheelieConfig] | None = None,
    T: float = DEFAULT_HORIZON,
    workers: int = 1,
) -> SweepResult:
    """Aggregate effort against the ``phi`` axis angle.

    ``fixed["psi_star"]`` is the angle at which the ``phi`` axis line passes
    through the rear axle. ``design_point`` marks the argmin over points where
    every pose is controllable; the others get status ``partial``.
    """
    grid = np.asarray(psi_grid, dtype=float)
    if grid.size == 0 or np.any(np.abs(grid) > math.pi / 2 + 1e-12):
        raise ValueError("psi grid must be non-empty and within [-pi/2, pi/2]")
    configs = list(configs) if configs is not None else balance_configs(model)
    if not configs:
        raise AggregateUndefinedError("no balanced configurations for the sweep")
    variants = [model.with_psi(float(p)) for p in grid]
    tasks = [(v, c, T) for v in variants for c in configs]
    local = _evaluate_tasks(_local, tasks, workers)
    xi = np.empty(grid.size)
    status = np.empty(grid.size, dtype=object)
    n_undefined = np.empty(grid.size)
    for i in range(grid.size):
        vals = np.array([v for v, _ in local[i * len(configs):(i + 1) * len(configs)]])
        ok = np.isfinite(vals)
        n_undefined[i] = np.count_nonzero(~ok)
        if ok.any():
            xi[i] = math.fsum(vals[ok])
            status[i] = "ok" if ok.all() else "partial"
        else:
            xi[i] = math.nan
            status[i] = "AggregateUndefinedError"
    # a pose that loses controllability means unbounded effort, so partial
    # sums never win the comparison
    complete = np.where(status == "ok", xi, np.inf)
    best = (int(np.argmin(complete)),) if np.isfinite(complete).any() else None
    return SweepResult(
        axis_names=("psi_hat",),
        grids=(grid,),
        metrics={"xi_aggregate": xi, "n_undefined": n_undefined},
        status=status,
        fixed={"psi_star": model.axle_intersect_angle(), "horizon": T, "n_configs": len(configs)},
        design_point=best,
        primary_metric="xi_aggregate",
    )


@dataclass(frozen=True)
class DofComparison:
    xi_5dof: float
    xi_6dof: float
    zeta_hat: float
    horizon: float

    @property
    def ratio(self) -> float:
        """``xi_6dof / xi_5dof``."""
        return self.xi_6dof / self.xi_5dof


def dof_comparison(
    model: WheelieModel,
    configs: Sequence[WheelieConfig] | None = None,
    T: float = DEFAULT_HORIZON,
    zeta_hat: float | None = None,
) -> DofComparison:
    """Aggregate effort without and with the extra joint at matched poses.

    The extra joint's axis defaults to ``zeta_hat`` of ``model`` if set, else
    to ``psi_hat`` (parallel to the ``phi`` axis). The 5-DoF model has no
    extra coordinate at all.
    """
    if zeta_hat is None:
        zeta_hat = model.zeta_hat if model.has_extra else model.psi_hat
    base = model.without_extra()
    six = WheelieModel(base.morphology, base.psi_hat, zeta_hat, base.wheel_inertia, base.armature, base.gravity)
    configs = list(configs) if configs is not None else balance_configs(base)
    if not configs:
        raise AggregateUndefinedError("no balanced configurations for the comparison")
    x5 = aggregate_effort(base, configs, T).xi_aggregate
    x6 = aggregate_effort(six, configs, T).xi_aggregate
    return DofComparison(x5, x6, float(zeta_hat), T)


def nominal_wheelie_model(m: MorphologySpec, psi_hat: float | None = None) -> WheelieModel:
    """Wheelie model of ``m`` with ``phi`` at ``psi_hat`` (default: through the rear axle)."""
    probe = WheelieModel(m, 0.0)
    return probe.with_psi(probe.axle_intersect_angle() if psi_hat is None else psi_hat)
