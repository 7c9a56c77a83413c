"""Command-line front end: ``morphopt <command> [--config PATH] [--out DIR] ...``.

Exit status is 0 on success, 1 when ``--strict`` is set and a sweep point
failed, and 2 for configuration or output-directory errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .config import STUDIES, ExperimentConfig, config_from_dict, parse_config
from .effort import balance_configs, dof_comparison, nominal_wheelie_model, psi_sweep
from .errors import ConfigError, MorphoptError
from .jump import SearchSpace, search_extension_profile, simulate_jump
from .output import atomic_write, emit_outputs, ensure_writable
from .studies import (
    default_scale_grid,
    gear_ratio_grid,
    gear_ratio_landscape,
    least_squares_slope,
    mass_grid_around,
    mass_sensitivity_sweep,
    scale_study,
)

log = logging.getLogger("morphopt")

COMMANDS = STUDIES + ("validate",)


@dataclass
class RunManifest:
    command: str
    config_hash: str
    version: str
    seed: int
    workers: int
    duration_s: float
    failures: dict[str, Any]
    files: list[str]
    warnings: list[str] = field(default_factory=list)
    summary: dict[str, Any] = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"


def _failure_summary(results, labels: Sequence[str]) -> dict[str, Any]:
    points = []
    for res, label in zip(results, labels):
        for flat, st in enumerate(res.status.ravel()):
            if res.failed.ravel()[flat]:
                points.append({"series": label, "index": flat, "status": str(st)})
    return {"count": len(points), "points": points}


def _study_outputs(cfg: ExperimentConfig, workers: int):
    """Run the configured study; returns (result, labels, series_key, failures, summary)."""
    m = cfg.morphology
    sim = cfg.simulation
    p = cfg.study.params
    name = cfg.study.name
    none = {"count": 0, "points": []}

    if name == "jump":
        space = SearchSpace.around(points=p["points"])
        policy, metrics, outcome = search_extension_profile(m, sim, space)
        trace = simulate_jump(m, policy, sim)
        summary = {"candidates": outcome.evaluated, "skipped": outcome.failures, **metrics.as_row(),
                   "lifted": metrics.lifted}
        return trace, (), None, none, summary

    if name == "sweep-mass":
        results = [
            mass_sensitivity_sweep(m, link, mass_grid_around(m, link, p["span"], p["points"]), sim, workers=workers)
            for link in p["links"]
        ]
        slopes = {link: least_squares_slope(r.grids[0], r.values()) for link, r in zip(p["links"], results)}
        return results, p["links"], "link", _failure_summary(results, p["links"]), {"slopes": slopes}

    if name == "sweep-gear":
        ga = p["gr_alpha"] or gear_ratio_grid(m.mu_actuator.gear_ratio, p["points"], p["span"])
        gb = p["gr_beta"] or gear_ratio_grid(m.q_h_actuator.gear_ratio, p["points"], p["span"])
        res = gear_ratio_landscape(m, ga, gb, sim, workers=workers)
        return res, (), None, _failure_summary([res], ["gear"]), {"design_point": list(res.design_point or ())}

    if name == "sweep-scale":
        grid = p["scales"] or default_scale_grid()
        results = [scale_study(m, grid, v, sim, workers=workers) for v in p["variants"]]
        return results, p["variants"], "variant", _failure_summary(results, p["variants"]), {}

    pitches = [math.radians(v) for v in p["pitches_deg"]]
    psi = None if p["psi_deg"] is None or name == "balance-psi" else math.radians(p["psi_deg"])
    model = nominal_wheelie_model(m, psi)
    configs = balance_configs(model, pitches)
    if not configs:
        raise MorphoptError("no statically balanced wheelie configurations on the pitch grid")

    if name == "balance-psi":
        grid = np.radians(p["psi_deg"] if p["psi_deg"] is not None else np.arange(-85.0, 86.0, 5.0))
        res = psi_sweep(model, grid, configs, p["horizon"], workers=workers)
        best = res.grids[0][res.design_point[0]] if res.design_point else math.nan
        summary = {"psi_star_deg": math.degrees(res.fixed["psi_star"]), "argmin_deg": math.degrees(best),
                   "n_configs": len(configs)}
        return res, (), None, _failure_summary([res], ["psi"]), summary

    zeta = None if p["zeta_deg"] is None else math.radians(p["zeta_deg"])
    cmp = dof_comparison(model, configs, p["horizon"], zeta)
    summary = {"xi_5dof": cmp.xi_5dof, "xi_6dof": cmp.xi_6dof, "ratio": cmp.ratio, "n_configs": len(configs)}
    return cmp, (), None, none, summary


def run(cfg: ExperimentConfig, out_dir: str | Path | None = None, workers: int = 1) -> RunManifest:
    """Run the study in ``cfg`` and write its outputs and manifest into ``out_dir``."""
    out = ensure_writable(out_dir if out_dir is not None else cfg.output.directory)
    start = time.perf_counter()
    result, labels, series_key, failures, summary = _study_outputs(cfg, workers)
    files, warnings = emit_outputs(result, out, cfg.output.formats, labels=labels, series_key=series_key)
    atomic_write(out / "config.json", cfg.to_json())
    files = sorted(files + ["config.json", "manifest.json"])
    manifest = RunManifest(
        command=cfg.study.name,
        config_hash=cfg.digest(),
        version=__version__,
        seed=cfg.seed,
        workers=workers,
        duration_s=time.perf_counter() - start,
        failures=failures,
        files=files,
        warnings=warnings,
        summary=summary,
    )
    atomic_write(out / "manifest.json", manifest.to_json())
    return manifest


def _load(args) -> ExperimentConfig:
    if args.config:
        cfg = parse_config(Path(args.config))
        if args.command != "validate" and cfg.study.name != args.command:
            raise ConfigError(f"config study {cfg.study.name!r} does not match command {args.command!r}")
    else:
        if args.command == "validate":
            raise ConfigError("validate needs --config")
        cfg = config_from_dict({"study": args.command})
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="morphopt", description="Morphology design studies for a wheeled-legged robot.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="JSON experiment config")
    ap.add_argument("--out", help="output directory (overrides output.directory)")
    ap.add_argument("--workers", type=int, default=1, help="parallel worker processes (default 1)")
    ap.add_argument("--strict", action="store_true", help="exit 1 if any sweep point failed")
    ap.add_argument("--seed", type=int, default=None, help="seed recorded in the manifest")
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    try:
        cfg = _load(args)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.command == "validate":
        print(f"ok: study={cfg.study.name} hash={cfg.digest()}")
        return 0
    if args.workers < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return 2
    try:
        ensure_writable(args.out or cfg.output.directory)
    except OSError as exc:
        print(f"error: output directory not writable: {exc}", file=sys.stderr)
        return 2
    try:
        manifest = run(cfg, args.out, args.workers)
    except MorphoptError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for w in manifest.warnings:
        log.warning(w)
    log.info("wrote %s to %s in %.1f s", ", ".join(manifest.files), args.out or cfg.output.directory, manifest.duration_s)
    if manifest.failures["count"]:
        log.warning("%d point(s) failed", manifest.failures["count"])
        if args.strict:
            return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
