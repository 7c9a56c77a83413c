import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from morphopt import _planar_kernels as K
from morphopt.errors import InvalidSpecError
from morphopt.morphology import NOMINAL_CROUCH, NOMINAL_EXTEND
from morphopt.planar import (
    PlanarState,
    SimConfig,
    clamp_to_envelope,
    conserved_quantities,
    contact_report,
    forward_dynamics_planar,
    gravity_compensation,
    kinematic_observables,
    mass_matrix,
    model_params,
    static_stance,
    step,
)


def airborne(m, vz=0.0, spin=0.0, joints=NOMINAL_EXTEND, joint_vel=(0.0, 0.0)):
    return PlanarState([0.0, 5.0, 0.2], joints, [0.3, vz, spin], joint_vel)


def linear_momentum(m, s):
    _, _, vx, vz = K.com_state(s.q, s.qd, model_params(m, SimConfig()))
    return np.array([vx, vz]) * m.total_mass


def apex_gain(m, s, cfg):
    P = model_params(m, cfg)
    h0 = kinematic_observables(m, s)["h_com"]
    best = h0
    zeros = np.zeros(2)
    while True:
        s, _ = step(m, s, zeros, cfg, P)
        h = kinematic_observables(m, s)["h_com"]
        if h < best:
            return best - h0
        best = h


def test_ballistic_apex(nominal, sim):
    gain = apex_gain(nominal, airborne(nominal, vz=1.0), sim)
    assert gain == pytest.approx(1.0 / (2 * sim.gravity), rel=1e-3)


def test_resting_normal_force_carries_weight(nominal, sim):
    s = static_stance(nominal, NOMINAL_CROUCH, sim)
    P = model_params(nominal, sim)
    tau = gravity_compensation(nominal, s, sim.gravity)
    for _ in range(2000):
        s, rep = step(nominal, s, tau, sim, P)
    total = sum(rep.normal_forces)
    assert total == pytest.approx(nominal.total_mass * sim.gravity, rel=0.01)
    assert rep.rear_in_contact and rep.front_in_contact


def test_joint_limit_clamp(nominal, sim):
    upper = nominal.mu.upper
    s = airborne(nominal, joints=(upper - 1e-4, 0.0), joint_vel=(5.0, 0.0))
    P = model_params(nominal, sim)
    p0 = linear_momentum(nominal, s)
    L0 = conserved_quantities(nominal, s)["centroidal_angular_momentum"]
    # the first step lands the joint on the limit, the second stops it there
    for _ in range(2):
        s, _ = step(nominal, s, np.zeros(2), sim, P)
        assert s.joint_pos[0] == upper
    assert s.joint_vel[0] == 0.0
    # the stopping impulse is internal: only gravity changes the momentum
    p1 = linear_momentum(nominal, s)
    assert p1[0] == pytest.approx(p0[0], rel=1e-6)
    assert p1[1] == pytest.approx(p0[1] - 2 * nominal.total_mass * sim.gravity * sim.dt, rel=1e-6)
    L1 = conserved_quantities(nominal, s)["centroidal_angular_momentum"]
    assert L1 == pytest.approx(L0, rel=1e-6, abs=1e-9)


def test_flight_conservation_torque_free(nominal, sim):
    s = airborne(nominal, vz=1.0, spin=3.0, joint_vel=(2.0, -1.0))
    P = model_params(nominal, sim)
    c0 = conserved_quantities(nominal, s)
    prev = c0
    worst_e = worst_l = 0.0
    for _ in range(5000):
        s, rep = step(nominal, s, np.zeros(2), sim, P)
        assert not rep.rear_in_contact and not rep.front_in_contact
        c = conserved_quantities(nominal, s)
        worst_e = max(worst_e, abs(c["mechanical_energy"] - prev["mechanical_energy"]) / abs(c0["mechanical_energy"]))
        worst_l = max(worst_l, abs(c["centroidal_angular_momentum"] - prev["centroidal_angular_momentum"])
                      / abs(c0["centroidal_angular_momentum"]))
        prev = c
    assert worst_e < 1e-6
    assert worst_l < 1e-6


def test_flight_momentum_with_torques(nominal, sim):
    s = airborne(nominal, spin=3.0)
    P = model_params(nominal, sim)
    L0 = conserved_quantities(nominal, s)["centroidal_angular_momentum"]
    prev = L0
    worst = 0.0
    for i in range(3000):
        tau = clamp_to_envelope(nominal, s, [40.0 * math.sin(20 * i * sim.dt), -60.0 * math.cos(15 * i * sim.dt)])
        s, _ = step(nominal, s, tau, sim, P)
        L = conserved_quantities(nominal, s)["centroidal_angular_momentum"]
        worst = max(worst, abs(L - prev) / abs(L0))
        prev = L
    assert worst < 1e-5


def test_mass_matrix_positive_definite(nominal, rng):
    P = model_params(nominal, SimConfig())
    q = np.zeros(5)
    for _ in range(10_000):
        q[0], q[1] = rng.uniform(-5, 5, 2)
        q[2] = rng.uniform(-math.pi, math.pi)
        q[3] = rng.uniform(nominal.mu.lower, nominal.mu.upper)
        q[4] = rng.uniform(nominal.q_h.lower, nominal.q_h.upper)
        M = K.mass_matrix(q, P)
        assert np.allclose(M, M.T)
        np.linalg.cholesky(M)


def test_mass_matrix_includes_reflected_inertia(nominal):
    s = airborne(nominal)
    M = mass_matrix(nominal, s)
    from dataclasses import replace

    bare = replace(nominal, mu_actuator=replace(nominal.mu_actuator, rotor_inertia=0.0))
    M0 = mass_matrix(bare, s)
    assert M[3, 3] - M0[3, 3] == pytest.approx(nominal.mu_actuator.reflected_inertia)


state_st = st.tuples(
    st.floats(-0.05, 0.05),  # height offset from the resting height
    st.floats(-0.3, 0.3),  # pitch
    st.floats(-2.0, 2.0), st.floats(-2.0, 2.0), st.floats(-5.0, 5.0),
)


@settings(max_examples=200)
@given(state_st)
def test_contact_forces_unilateral_and_in_cone(nominal, args):
    dz, pitch, vx, vz, w = args
    cfg = SimConfig()
    s = PlanarState([0.0, nominal.wheel_radius + dz, pitch], NOMINAL_CROUCH, [vx, vz, w], [0.0, 0.0])
    rep = contact_report(nominal, s, cfg)
    for fn, ft in zip(rep.normal_forces, rep.tangential_forces):
        assert fn >= 0.0
        assert abs(ft) <= cfg.friction_coefficient * fn + 1e-9


def test_step_bit_deterministic(nominal, sim):
    s = static_stance(nominal, NOMINAL_CROUCH, sim)
    tau = np.array([30.0, -20.0])
    a, _ = step(nominal, s, tau, sim)
    b, _ = step(nominal, s, tau, sim)
    assert np.array_equal(a.q, b.q) and np.array_equal(a.qd, b.qd)


def test_step_rejects_bad_dt(nominal):
    with pytest.raises(InvalidSpecError):
        SimConfig(dt=-1e-4)
    with pytest.raises(InvalidSpecError):
        step(nominal, airborne(nominal), np.zeros(2), SimConfig(dt=0.1))


def test_forward_dynamics_free_fall(nominal, sim):
    acc = forward_dynamics_planar(nominal, airborne(nominal), np.zeros(2), None, sim)
    com_acc = acc  # with no joint motion the whole body falls rigidly
    assert com_acc[1] == pytest.approx(-sim.gravity)
    assert abs(com_acc[2]) < 1e-9 and np.allclose(com_acc[3:], 0.0, atol=1e-9)


def test_static_stance_rejects_com_outside_wheelbase(nominal, sim):
    with pytest.raises(InvalidSpecError):
        static_stance(nominal, (math.radians(20.0), 0.0), sim)
