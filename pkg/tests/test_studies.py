from dataclasses import replace

import numpy as np
import pytest

from morphopt.jump import SearchSpace, nominal_policy
from morphopt.studies import (
    STATUS_NO_LIFTOFF,
    STATUS_OK,
    SweepResult,
    default_scale_grid,
    gear_ratio_grid,
    gear_ratio_landscape,
    least_squares_slope,
    mass_grid_around,
    mass_sensitivity_sweep,
    nominal_jump,
    run_jump_grid,
    scale_study,
    scale_variant,
)

FAST = SearchSpace.single(nominal_policy())


def test_mass_sweep_nominal_point_matches_nominal_jump(nominal, sim):
    grid = [nominal.neck.mass - 1.0, nominal.neck.mass]
    res = mass_sensitivity_sweep(nominal, "neck", grid, sim, space=FAST)
    assert res.design_point == (1,)
    ref = nominal_jump(nominal, sim, FAST)
    assert res.values("max_h_com")[1] == ref.max_h_com
    assert res.values("max_h_clearance")[1] == ref.max_h_clearance
    assert list(res.status) == [STATUS_OK, STATUS_OK]
    assert res.fixed["nominal_mass"] == nominal.neck.mass


def test_mass_sweep_rejects_bad_input(nominal):
    with pytest.raises(ValueError):
        mass_sensitivity_sweep(nominal, "tail", [1.0])
    with pytest.raises(ValueError):
        mass_sensitivity_sweep(nominal, "head", [0.0, 1.0])


def test_mass_grid_is_symmetric(nominal):
    g = mass_grid_around(nominal, "bike", 2.0, 9)
    assert g[4] == nominal.bike.mass
    assert np.allclose(g - nominal.bike.mass, -(g[::-1] - nominal.bike.mass))


def test_least_squares_slope_ignores_nan():
    x = np.arange(5.0)
    y = 2.0 * x + 1.0
    y[2] = np.nan
    assert least_squares_slope(x, y) == pytest.approx(2.0)


def test_gear_grid_is_geometric_and_centred():
    g = gear_ratio_grid(13.5, 15, 2.0 ** 1.5)
    assert g[7] == 13.5
    assert g[0] == pytest.approx(13.5 / 2 ** 1.5) and g[-1] == pytest.approx(13.5 * 2 ** 1.5)
    assert np.allclose(g[1:] / g[:-1], (2 ** 1.5) ** (1 / 7))
    with pytest.raises(ValueError):
        gear_ratio_grid(13.5, 4)


def test_gear_landscape_design_cell_is_the_nominal(nominal, sim):
    ga = [nominal.mu_actuator.gear_ratio]
    gb = [nominal.q_h_actuator.gear_ratio / 2, nominal.q_h_actuator.gear_ratio]
    res = gear_ratio_landscape(nominal, ga, gb, sim, space=FAST)
    assert res.shape == (1, 2)
    assert res.design_point == (0, 1)
    assert res.values()[0, 1] == nominal_jump(nominal, sim, FAST).max_h_com


def test_scale_variant(nominal):
    single = scale_variant(nominal, 0.2, coupled=False)
    coupled = scale_variant(nominal, 0.2, coupled=True)
    assert single.scale == pytest.approx(0.2)
    assert single.neck.length == pytest.approx(nominal.neck.length * 0.5)
    assert single.q_h_actuator.count == 1 and coupled.q_h_actuator.count == 2
    assert coupled.q_h_actuator.total_torque == pytest.approx(2 * single.q_h_actuator.total_torque)
    assert single.mu_actuator.gear_ratio == 9.0 and single.mu_actuator.count == nominal.mu_actuator.count
    assert coupled.total_mass == single.total_mass
    heavy = scale_variant(nominal, 0.2, coupled=True, extra_actuator_mass=0.5)
    assert heavy.head.mass == pytest.approx(coupled.head.mass + 0.5)


def test_scale_grid_default():
    g = default_scale_grid()
    assert g.size == 9 and g[0] == pytest.approx(0.1) and g[-1] == pytest.approx(0.3)


def test_scale_study_rejects_unknown_variant(nominal):
    with pytest.raises(ValueError):
        scale_study(nominal, [0.2], "triple")


def test_worker_count_does_not_change_results(nominal, sim):
    grid = [0.15, 0.25]
    one = scale_study(nominal, grid, "single", sim, space=FAST, workers=1)
    two = scale_study(nominal, grid, "single", sim, space=FAST, workers=2)
    for k in one.metrics:
        assert np.array_equal(one.metrics[k], two.metrics[k])
    assert list(one.status) == list(two.status)


def test_grounded_point_clears_nothing(nominal, sim):
    weak = replace(
        nominal,
        mu_actuator=replace(nominal.mu_actuator, max_output_torque=0.0),
        q_h_actuator=replace(nominal.q_h_actuator, max_output_torque=0.0),
    )
    metrics, status = run_jump_grid([weak, nominal], (2,), sim, FAST)
    assert list(status) == [STATUS_NO_LIFTOFF, STATUS_OK]
    assert metrics["max_h_clearance"][0] == 0.0
    assert metrics["contact_ratio"][0] == 1.0
    assert metrics["max_h_clearance"][1] > 0.0


def test_sweep_result_rows_and_failures():
    res = SweepResult(
        axis_names=("a", "b"),
        grids=(np.array([1.0, 2.0]), np.array([10.0, 20.0, 30.0])),
        metrics={"h": np.arange(6.0).reshape(2, 3)},
        status=np.array([["ok", "ok", "SimulationDivergedError"], ["no_liftoff", "ok", "ok"]], dtype=object),
        primary_metric="h",
    )
    rows = res.rows()
    assert len(rows) == 6
    assert rows[2] == {"a": 1.0, "b": 30.0, "h": 2.0, "status": "SimulationDivergedError"}
    assert res.n_failed == 1
    assert res.failed[0, 2] and not res.failed[1, 0]
