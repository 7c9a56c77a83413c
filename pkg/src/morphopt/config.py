"""Experiment configuration: a single JSON document with four sections.

```
{
  "morphology": {...},          # overrides merged onto the default morphology file
  "simulation": {"dt": 1e-4, ...},
  "study": {"name": "sweep-gear", "points": 15},
  "output": {"directory": "results", "formats": ["csv", "svg", "json"]},
  "seed": 0
}
```

Every section is optional except ``study``, which may also be given as a bare
name. Unknown keys are rejected; missing keys take their defaults.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

from .errors import ConfigParseError, ConfigValidationError, InvalidSpecError
from .morphology import MorphologySpec
from .planar import SimConfig

STUDIES = ("jump", "sweep-mass", "sweep-gear", "sweep-scale", "balance-psi", "balance-dof")
FORMATS = ("csv", "svg", "json")

# per-study parameters and their defaults; None means "derived from the model"
STUDY_DEFAULTS: dict[str, dict[str, Any]] = {
    "jump": {"points": 5},
    "sweep-mass": {"links": ["bike", "neck", "head"], "span": 2.0, "points": 9},
    "sweep-gear": {"points": 15, "span": 2.0 ** 1.5, "gr_alpha": None, "gr_beta": None},
    "sweep-scale": {"scales": None, "variants": ["single", "coupled"]},
    "balance-psi": {"psi_deg": None, "pitches_deg": [20.0, 30.0, 40.0, 50.0, 60.0], "horizon": 2.0},
    "balance-dof": {"psi_deg": None, "zeta_deg": None, "pitches_deg": [20.0, 30.0, 40.0, 50.0, 60.0], "horizon": 2.0},
}


def default_morphology_dict() -> dict[str, Any]:
    text = resources.files("morphopt").joinpath("data/default_morphology.json").read_text()
    return json.loads(text)


def default_morphology() -> MorphologySpec:
    return MorphologySpec.from_dict(default_morphology_dict())


@dataclass(frozen=True)
class StudyConfig:
    name: str
    params: Mapping[str, Any] = field(default_factory=dict)

    def __getitem__(self, key: str) -> Any:
        return self.params[key]


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "results"
    formats: tuple[str, ...] = FORMATS


@dataclass(frozen=True)
class ExperimentConfig:
    study: StudyConfig
    morphology: MorphologySpec = field(default_factory=default_morphology)
    simulation: SimConfig = field(default_factory=SimConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    seed: int = 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "morphology": self.morphology.to_dict(),
            "simulation": asdict(self.simulation),
            "study": {"name": self.study.name, **copy.deepcopy(dict(self.study.params))},
            "output": {"directory": self.output.directory, "formats": list(self.output.formats)},
            "seed": self.seed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def digest(self) -> str:
        """SHA-256 of the canonical JSON form."""
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()


def _merge(base: Any, update: Any, path: str) -> Any:
    """Overlay ``update`` onto ``base``; keys absent from ``base`` are errors."""
    if isinstance(base, dict):
        if not isinstance(update, dict):
            raise ConfigValidationError(path, f"expected an object, got {type(update).__name__}")
        out = dict(base)
        for k, v in update.items():
            key = f"{path}.{k}" if path else k
            if k not in base:
                raise ConfigValidationError(key, "unknown key")
            out[k] = _merge(base[k], v, key)
        return out
    if isinstance(base, bool) or isinstance(update, bool):
        if type(base) is not type(update):
            raise ConfigValidationError(path, f"expected {type(base).__name__}, got {type(update).__name__}")
        return update
    if isinstance(base, (int, float)) and not isinstance(base, bool):
        if not isinstance(update, (int, float)):
            raise ConfigValidationError(path, f"expected a number, got {type(update).__name__}")
        if not math.isfinite(update):
            raise ConfigValidationError(path, "must be finite")
        return type(base)(update) if isinstance(base, float) else update
    if isinstance(base, str) and not isinstance(update, str):
        raise ConfigValidationError(path, f"expected a string, got {type(update).__name__}")
    if isinstance(base, list) and not isinstance(update, list):
        raise ConfigValidationError(path, f"expected a list, got {type(update).__name__}")
    return update


def _build_morphology(data: dict[str, Any]) -> MorphologySpec:
    # build piece by piece so spec errors name the offending key
    try:
        MorphologySpec.from_dict(data)
    except InvalidSpecError as exc:
        for key, check in _morphology_checks(data):
            try:
                check()
            except (TypeError, ValueError) as inner:
                raise ConfigValidationError(key, str(inner)) from None
        raise ConfigValidationError("morphology", str(exc)) from None
    except (TypeError, KeyError, ValueError) as exc:
        raise ConfigValidationError("morphology", str(exc)) from None
    return MorphologySpec.from_dict(data)


def _morphology_checks(data):
    from .actuators import ActuatorSpec
    from .inertia import CylinderSpec
    from .morphology import JointSpec

    for name, link in data["links"].items():
        yield f"morphology.links.{name}", lambda link=link: CylinderSpec(**link)
    for name, j in data["joints"].items():
        yield f"morphology.joints.{name}", lambda j=j: JointSpec(j["lower"], j["upper"], tuple(j["offset"]))
    for name, a in data["actuators"].items():
        yield f"morphology.actuators.{name}", lambda a=a: ActuatorSpec(**a)
    for key in ("wheel_radius", "wheelbase", "scale"):
        yield f"morphology.{key}", lambda key=key: _require_positive(data[key])


def _require_positive(v) -> None:
    if not v > 0:
        raise ValueError(f"must be positive, got {v!r}")


def _check_grid(key: str, values, positive: bool = True) -> None:
    if values is None:
        return
    if not isinstance(values, list) or not values:
        raise ConfigValidationError(key, "must be a non-empty list")
    for v in values:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ConfigValidationError(key, f"entries must be finite numbers, got {v!r}")
        if positive and v <= 0:
            raise ConfigValidationError(key, f"entries must be positive, got {v!r}")


def _validate_study(name: str, p: dict[str, Any]) -> None:
    def positive_int(key, minimum=1):
        v = p[key]
        if isinstance(v, bool) or not isinstance(v, int) or v < minimum:
            raise ConfigValidationError(f"study.{key}", f"must be an integer >= {minimum}")

    if name == "jump":
        positive_int("points")
    elif name == "sweep-mass":
        links = p["links"]
        if not isinstance(links, list) or not links or any(l not in ("bike", "neck", "head") for l in links):
            raise ConfigValidationError("study.links", "must be a non-empty list drawn from bike, neck, head")
        positive_int("points", 2)
        if not p["span"] > 0:
            raise ConfigValidationError("study.span", "must be positive")
    elif name == "sweep-gear":
        positive_int("points")
        if p["points"] % 2 == 0:
            raise ConfigValidationError("study.points", "must be odd so the design ratio lies on the grid")
        if not p["span"] > 1:
            raise ConfigValidationError("study.span", "must exceed 1")
        _check_grid("study.gr_alpha", p["gr_alpha"])
        _check_grid("study.gr_beta", p["gr_beta"])
    elif name == "sweep-scale":
        _check_grid("study.scales", p["scales"])
        v = p["variants"]
        if not isinstance(v, list) or not v or any(x not in ("single", "coupled") for x in v):
            raise ConfigValidationError("study.variants", "must be a non-empty list drawn from single, coupled")
    else:
        if p["psi_deg"] is not None:
            if name == "balance-psi":
                _check_grid("study.psi_deg", p["psi_deg"], positive=False)
                bad = [x for x in p["psi_deg"] if abs(x) > 90]
            else:
                bad = [p["psi_deg"]] if not isinstance(p["psi_deg"], (int, float)) or abs(p["psi_deg"]) > 90 else []
            if bad:
                raise ConfigValidationError("study.psi_deg", "angles must lie within [-90, 90]")
        if name == "balance-dof" and p["zeta_deg"] is not None:
            z = p["zeta_deg"]
            if isinstance(z, bool) or not isinstance(z, (int, float)) or abs(z) > 90:
                raise ConfigValidationError("study.zeta_deg", "must be a number within [-90, 90]")
        _check_grid("study.pitches_deg", p["pitches_deg"])
        if not p["horizon"] > 0:
            raise ConfigValidationError("study.horizon", "must be positive")


def _study(raw: Any) -> StudyConfig:
    if isinstance(raw, str):
        raw = {"name": raw}
    if not isinstance(raw, dict):
        raise ConfigValidationError("study", "must be a study name or an object with a name")
    if "name" not in raw:
        raise ConfigValidationError("study.name", "missing")
    name = raw["name"]
    if name not in STUDIES:
        raise ConfigValidationError("study.name", f"must be one of {', '.join(STUDIES)}, got {name!r}")
    params = dict(STUDY_DEFAULTS[name])
    for k, v in raw.items():
        if k == "name":
            continue
        if k not in params:
            raise ConfigValidationError(f"study.{k}", "unknown key")
        base = params[k]
        params[k] = v if base is None or v is None else _merge(base, v, f"study.{k}")
    _validate_study(name, params)
    return StudyConfig(name, params)


def config_from_dict(data: Any) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigValidationError("<root>", "the configuration must be a JSON object")
    unknown = set(data) - {"morphology", "simulation", "study", "output", "seed"}
    if unknown:
        raise ConfigValidationError(sorted(unknown)[0], "unknown key")
    if "study" not in data:
        raise ConfigValidationError("study", "missing")
    study = _study(data["study"])

    morph = _merge(default_morphology_dict(), data.get("morphology", {}), "morphology")
    morphology = _build_morphology(morph)

    sim = _merge(asdict(SimConfig()), data.get("simulation", {}), "simulation")
    if not sim["dt"] > 0:
        raise ConfigValidationError("simulation.dt", f"must be positive, got {sim['dt']!r}")
    if sim["dt"] > 1e-2:
        raise ConfigValidationError("simulation.dt", f"must not exceed 1e-2, got {sim['dt']!r}")
    for key in ("gravity",):
        if not sim[key] > 0:
            raise ConfigValidationError(f"simulation.{key}", "must be positive")
    for key in ("friction_coefficient", "contact_stiffness", "contact_damping"):
        if sim[key] < 0:
            raise ConfigValidationError(f"simulation.{key}", "must be non-negative")
    simulation = SimConfig(**sim)

    out = _merge({"directory": "results", "formats": list(FORMATS)}, data.get("output", {}), "output")
    formats = out["formats"]
    if not formats or any(f not in FORMATS for f in formats):
        raise ConfigValidationError("output.formats", f"entries must be drawn from {', '.join(FORMATS)}")
    output = OutputConfig(out["directory"], tuple(dict.fromkeys(formats)))

    seed = data.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigValidationError("seed", "must be an integer")
    return ExperimentConfig(study, morphology, simulation, output, seed)


def parse_config(source: str | Path) -> ExperimentConfig:
    """Parse a config from a path or from JSON text.

    A ``str`` that does not start with ``{`` (after whitespace) or ``"`` is
    treated as a path.
    """
    if isinstance(source, Path) or not source.lstrip().startswith(("{", '"')):
        source = Path(source).read_text()
    try:
        data = json.loads(source)
    except json.JSONDecodeError as exc:
        raise ConfigParseError(exc.msg, exc.lineno, exc.colno) from None
    if isinstance(data, str):
        data = {"study": data}
    return config_from_dict(data)
