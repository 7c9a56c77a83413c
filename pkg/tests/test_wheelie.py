import math
from dataclasses import replace

import numpy as np
import pytest
from scipy import integrate, linalg

from morphopt.effort import DEFAULT_PITCHES, nominal_wheelie_model
from morphopt.errors import InvalidSpecError
from morphopt.inertia import CylinderSpec, LinkInertia
from morphopt.wheelie import (
    WheelieModel,
    equilibrium_config,
    find_static_configs,
    gravity_forces,
    linearize,
    mechanical_energy,
    wheelie_forward_dynamics,
    whole_body_com,
)

TINY = 1e-9
HEAVY = 1e9


@pytest.fixture(scope="module")
def model():
    from morphopt.morphology import nominal_morphology

    return nominal_wheelie_model(nominal_morphology())


@pytest.fixture(scope="module")
def configs(model):
    return find_static_configs(model, DEFAULT_PITCHES)


def point_head(m, head_mass=10.0):
    """Nearly massless Bike and Neck with a point-mass Head."""
    return replace(m, inertia_overrides={
        "bike": LinkInertia(TINY, 0.5 * m.bike.length, 0.0),
        "neck": LinkInertia(TINY, 0.5 * m.neck.length, 0.0),
        "head": LinkInertia(head_mass, m.head.length, 0.0),
    })


def test_nominal_pitch_grid_is_mostly_feasible(configs):
    assert len(configs) >= 3


def test_configs_are_balanced(model, configs):
    for c in configs:
        assert c.com_offset < 1e-6
        assert c.residual < 1e-6
        xdot = wheelie_forward_dynamics(model, c.x, c.u_eq)
        assert np.max(np.abs(xdot[model.nq:])) < 1e-9
        m = model.morphology
        assert m.mu.contains(c.q[3])


def test_unforced_equilibrium_accelerations(model, configs):
    # without the holding torques only the actuated joints accelerate, and only by gravity
    for c in configs:
        acc = wheelie_forward_dynamics(model, c.x, np.zeros(model.nu))[model.nq:]
        assert np.all(np.isfinite(acc))
        assert np.linalg.norm(acc) > 0


def test_linearize_recovers_mock_linear_system(model, configs, rng):
    c = configs[0]
    n, m = 2 * model.nq, model.nu
    A0 = rng.normal(size=(n, n))
    B0 = rng.normal(size=(n, m))
    sys = linearize(model, c, dynamics=lambda x, u: A0 @ (x - c.x) + B0 @ (u - c.u_eq))
    assert np.allclose(sys.A, A0, atol=1e-8) and np.allclose(sys.B, B0, atol=1e-8)
    assert sys.state_names == model.state_names and sys.input_names == model.input_names


def test_roll_inverted_pendulum_oracle(model):
    m = point_head(model.morphology)
    locked = {n: HEAVY for n in ("pitch", "wheel", "mu", "phi", "q_h")}
    pend = WheelieModel(m, model.psi_hat, wheel_inertia=0.0, armature=locked)
    c = find_static_configs(pend, [math.radians(40.0)])[0]
    h = whole_body_com(pend, c.q)[2]
    sys = linearize(pend, c)
    lam = np.sort(np.linalg.eigvals(sys.A).real)
    expected = math.sqrt(pend.gravity / h)
    assert lam[-1] == pytest.approx(expected, rel=1e-4)
    assert lam[0] == pytest.approx(-expected, rel=1e-4)
    assert np.all(np.abs(lam[1:-1]) < 1e-3 * expected)


def test_linearization_step_robustness(model, configs):
    for c in configs:
        a = linearize(model, c, eps=1e-6)
        b = linearize(model, c, eps=2e-6)
        assert np.max(np.abs(a.A - b.A)) < 1e-6 * np.max(np.abs(a.A))
        assert np.max(np.abs(a.B - b.B)) < 1e-6 * np.max(np.abs(a.B))
    with pytest.raises(ValueError):
        linearize(model, configs[0], eps=0.0)


def test_linear_prediction_matches_nonlinear_short_horizon(model, configs, rng):
    c = configs[len(configs) // 2]
    sys = linearize(model, c)
    dx = 1e-4 * rng.normal(size=2 * model.nq)
    sol = integrate.solve_ivp(lambda t, x: wheelie_forward_dynamics(model, x, c.u_eq), (0.0, 0.1),
                              c.x + dx, rtol=1e-10, atol=1e-13)
    nonlinear = sol.y[:, -1] - c.x
    linear = linalg.expm(sys.A * 0.1) @ dx
    assert np.linalg.norm(nonlinear - linear) <= 0.01 * np.linalg.norm(nonlinear)


def test_phi_torque_tips_roll_and_energy_balances(model, configs):
    c = configs[0]
    nq = model.nq
    i_phi = model.input_names.index("phi")
    u = c.u_eq.copy()
    u[i_phi] += 2.0
    acc = wheelie_forward_dynamics(model, c.x, u)[nq:]
    assert abs(acc[0]) > 1e-3

    S = model.input_matrix()

    def rhs(t, y):
        x = y[:-1]
        return np.append(wheelie_forward_dynamics(model, x, u), (S @ u) @ x[nq:])

    y = integrate.solve_ivp(rhs, (0.0, 0.05), np.append(c.x, 0.0), rtol=1e-11, atol=1e-13).y[:, -1]
    gained = mechanical_energy(model, y[:-1]) - mechanical_energy(model, c.x)
    assert gained == pytest.approx(y[-1], rel=1e-6, abs=1e-9)


def test_doubling_every_mass_keeps_unforced_accelerations(model, configs):
    m = model.morphology
    heavy = m
    for name in ("bike", "neck", "head"):
        heavy = heavy.with_link_mass(name, 2 * getattr(m, name).mass)
    bare = WheelieModel(m, model.psi_hat, wheel_inertia=1e-3, armature={})
    double = WheelieModel(heavy, model.psi_hat, wheel_inertia=2e-3, armature={})
    x = configs[0].x.copy()
    x[0] = 0.05  # off balance so gravity drives every coordinate
    a = wheelie_forward_dynamics(bare, x, np.zeros(bare.nu))
    b = wheelie_forward_dynamics(double, x, np.zeros(double.nu))
    assert np.allclose(a, b, rtol=1e-9, atol=1e-12)


def test_symmetric_body_balances_vertically(model):
    m = model.morphology
    bike_only = replace(m, inertia_overrides={
        "neck": LinkInertia(TINY * TINY, 0.5 * m.neck.length, 0.0),
        "head": LinkInertia(TINY * TINY, 0.5 * m.head.length, 0.0),
    })
    body = WheelieModel(bike_only, model.psi_hat)
    q = np.zeros(body.nq)
    q[1] = math.pi / 2
    q[3] = 2.0
    c = equilibrium_config(body, q)
    assert c.com_offset < 1e-6
    assert abs(gravity_forces(body, q)[1]) < 1e-6


def test_extra_joint_dimensions(model):
    six = WheelieModel(model.morphology, model.psi_hat, zeta_hat=0.3)
    assert six.nq == model.nq + 1 and six.nu == model.nu + 1
    assert six.coordinate_names[-1] == "zeta" and six.input_names[-1] == "zeta"
    assert six.without_extra() == WheelieModel(model.morphology, model.psi_hat)
    with pytest.raises(ValueError):
        wheelie_forward_dynamics(six, np.zeros(2 * model.nq), np.zeros(model.nu))


def test_axis_angle_limits(model):
    with pytest.raises(InvalidSpecError):
        model.with_psi(2.0)
    with pytest.raises(InvalidSpecError):
        WheelieModel(model.morphology, 0.0, zeta_hat=-1.8)


def test_axle_intersect_angle_points_at_the_axle(model):
    # the phi axis through the mount offset passes through the rear axle
    dx, dz = model.morphology.mu.offset
    psi = model.axle_intersect_angle()
    assert dx * math.sin(psi) - dz * math.cos(psi) == pytest.approx(0.0, abs=1e-12)


def test_infeasible_pitch_gives_nothing(model):
    assert find_static_configs(model, [math.radians(80.0)]) == []
    assert find_static_configs(model, [-0.2]) == []
