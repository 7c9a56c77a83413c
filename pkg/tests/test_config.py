import json

import pytest

from morphopt.config import (
    STUDIES,
    STUDY_DEFAULTS,
    config_from_dict,
    default_morphology,
    parse_config,
)
from morphopt.errors import ConfigParseError, ConfigValidationError
from morphopt.morphology import nominal_morphology


def test_minimal_config_fills_defaults():
    cfg = parse_config('{"study": "sweep-gear"}')
    assert cfg.study.name == "sweep-gear"
    assert dict(cfg.study.params) == STUDY_DEFAULTS["sweep-gear"]
    assert cfg.simulation.dt == 1e-4
    assert cfg.output.formats == ("csv", "svg", "json")
    assert cfg.seed == 0
    assert cfg.morphology == nominal_morphology()


def test_bare_study_name_text():
    assert parse_config('"jump"').study.name == "jump"


def test_default_morphology_actuators():
    m = default_morphology()
    assert m.mu_actuator.gear_ratio == pytest.approx(297 / 22)
    assert m.q_h_actuator.gear_ratio == pytest.approx(450 / 22)
    assert m.q_h_actuator.count == 2
    # mu carries the left and right units together
    assert m.mu_actuator.max_output_torque == pytest.approx(72.0)
    assert m.mu_actuator.count == 2
    assert m.q_h_actuator.total_torque == pytest.approx(218.0)
    assert m.total_mass == pytest.approx(23.5)
    assert m.neck.length == pytest.approx(0.4)


@pytest.mark.parametrize("sim,key", [
    ({"dt": -1e-4}, "simulation.dt"),
    ({"dt": 0.5}, "simulation.dt"),
    ({"gravity": 0}, "simulation.gravity"),
    ({"contact_damping": -1.0}, "simulation.contact_damping"),
    ({"dt": "fast"}, "simulation.dt"),
])
def test_simulation_errors_name_the_key(sim, key):
    with pytest.raises(ConfigValidationError) as err:
        config_from_dict({"study": "jump", "simulation": sim})
    assert err.value.key == key
    assert key in str(err.value)


@pytest.mark.parametrize("data,key", [
    ({"study": "jump", "colour": 1}, "colour"),
    ({"study": {"name": "jump", "pionts": 3}}, "study.pionts"),
    ({"study": "jump", "simulation": {"stiffness": 1.0}}, "simulation.stiffness"),
    ({"study": "jump", "morphology": {"links": {"tail": {}}}}, "morphology.links.tail"),
    ({"study": "jump", "output": {"formats": ["pdf"]}}, "output.formats"),
    ({"study": "rocket"}, "study.name"),
    ({"study": "jump", "seed": 1.5}, "seed"),
    ({"study": {"name": "sweep-gear", "points": 4}}, "study.points"),
    ({"study": {"name": "sweep-mass", "links": ["wing"]}}, "study.links"),
    ({"study": {"name": "sweep-scale", "scales": []}}, "study.scales"),
    ({"study": {"name": "balance-psi", "psi_deg": [0, 120]}}, "study.psi_deg"),
    ({"study": {"name": "balance-dof", "horizon": 0}}, "study.horizon"),
    ({"morphology": {}}, "study"),
])
def test_unknown_and_invalid_keys(data, key):
    with pytest.raises(ConfigValidationError) as err:
        config_from_dict(data)
    assert err.value.key == key


def test_morphology_errors_name_the_link():
    with pytest.raises(ConfigValidationError) as err:
        config_from_dict({"study": "jump", "morphology": {"links": {"head": {"mass": -2.0}}}})
    assert err.value.key == "morphology.links.head"


def test_morphology_override_is_merged():
    cfg = config_from_dict({"study": "jump", "morphology": {"links": {"head": {"mass": 12.0}}}})
    assert cfg.morphology.head.mass == 12.0
    assert cfg.morphology.neck == nominal_morphology().neck


def test_parse_error_reports_line_and_column():
    text = '{\n  "study": "jump",\n  "seed": ,\n}'
    with pytest.raises(ConfigParseError) as err:
        parse_config(text)
    assert err.value.line == 3
    assert err.value.column == 11


@pytest.mark.parametrize("name", STUDIES)
def test_round_trip_and_hash(name, tmp_path):
    cfg = config_from_dict({"study": name, "seed": 7, "simulation": {"dt": 2e-4}})
    path = tmp_path / "c.json"
    path.write_text(cfg.to_json())
    back = parse_config(path)
    assert back == cfg
    assert back.digest() == cfg.digest()
    assert parse_config(str(path)).digest() == cfg.digest()


def test_hash_changes_with_content():
    a = config_from_dict({"study": "jump"})
    b = config_from_dict({"study": "jump", "seed": 1})
    assert a.digest() != b.digest()
    assert len(a.digest()) == 64


def test_config_json_is_canonical():
    cfg = config_from_dict({"study": "balance-dof"})
    data = json.loads(cfg.to_json())
    assert list(data) == sorted(data)
    assert data["study"]["name"] == "balance-dof"
