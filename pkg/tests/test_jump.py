import math
from dataclasses import replace

import numpy as np
import pytest

from morphopt import jump as J
from morphopt.errors import DegenerateTraceError, InvalidSpecError, NoLiftoffError
from morphopt.jump import (
    ExtensionPolicy,
    JumpMetrics,
    JumpTrace,
    SearchSpace,
    contact_ratio,
    jump_metrics,
    nominal_policy,
    optimize_extension_profile,
    point_mass_oracle,
    pogo_morphology,
    search_extension_profile,
    simulate_jump,
    simulate_pogo,
    study_search_space,
    tuck_flight,
)
from morphopt.morphology import NOMINAL_CROUCH, NOMINAL_EXTEND


@pytest.fixture(scope="module")
def nominal_trace():
    from morphopt.morphology import nominal_morphology

    return simulate_jump(nominal_morphology(), nominal_policy())


@pytest.fixture(scope="module")
def pogo():
    return pogo_morphology()


def test_zero_strength_never_lifts(nominal):
    weak = replace(
        nominal,
        mu_actuator=replace(nominal.mu_actuator, max_output_torque=0.0),
        q_h_actuator=replace(nominal.q_h_actuator, max_output_torque=0.0),
    )
    trace = simulate_jump(weak, nominal_policy())
    assert not trace.lifted
    metrics = jump_metrics(trace)
    assert metrics.contact_ratio == 1.0
    assert not metrics.lifted
    assert np.all(trace.torques == 0.0)


@pytest.mark.parametrize("factor,stroke", [(1.5, 0.3), (2.0, 0.3), (3.0, 0.2)])
def test_pogo_matches_point_mass(pogo, factor, stroke):
    mt = pogo.total_mass
    force = factor * mt * 9.81
    trace = simulate_pogo(pogo, force, stroke)
    ref = point_mass_oracle(mt, force, stroke)
    assert trace.lifted
    i_lift = int(np.searchsorted(trace.time, trace.t_liftoff))
    gain = trace.h_com.max() - trace.h_com[i_lift]
    assert gain == pytest.approx(ref.apex_gain, rel=0.02)
    assert contact_ratio(trace) == pytest.approx(ref.contact_ratio, rel=0.05)
    assert trace.t_liftoff - trace.t0 == pytest.approx(ref.stance_time, rel=0.05)


def test_nominal_jump_lifts_with_power_peak_in_stance(nominal_trace):
    tr = nominal_trace
    assert tr.lifted
    assert tr.t0 < tr.t_liftoff < tr.t_apogee
    m = jump_metrics(tr)
    assert tr.t0 <= m.t_peak_power <= tr.t_liftoff
    assert 0.0 < m.contact_ratio < 1.0
    assert m.max_h_clearance < m.max_h_com
    # at lift-off both wheels are unloaded
    i = int(np.searchsorted(tr.time, tr.t_liftoff))
    assert np.all(tr.normal_forces[i + 1] == 0.0)


def test_untucked_profiles_peak_in_stance(nominal):
    for pol in study_search_space().policies():
        if pol.tuck_config is not None:
            continue
        tr = simulate_jump(nominal, pol)
        m = jump_metrics(tr)
        assert tr.lifted
        assert tr.t0 <= m.t_peak_power <= tr.t_liftoff, pol
        # limp in flight: no torque after lift-off
        assert np.all(tr.torques[tr.time > tr.t_liftoff] == 0.0)


def test_nominal_jump_is_deterministic(nominal, nominal_trace):
    again = simulate_jump(nominal, nominal_policy())
    assert np.array_equal(again.q, nominal_trace.q)
    assert again.t_apogee == nominal_trace.t_apogee


def test_torques_respect_envelope(nominal, nominal_trace):
    for j, act in enumerate((nominal.mu_actuator, nominal.q_h_actuator)):
        assert np.all(np.abs(nominal_trace.torques[:, j]) <= act.total_torque * (1 + 1e-12))


def _stub_trace(t0, t_lift, t_apo, lifted=True, n=3):
    z = np.zeros(n)
    return JumpTrace(np.linspace(0, t_apo, n), np.zeros((n, 5)), np.zeros((n, 5)), np.zeros((n, 2)),
                     np.zeros((n, 2)), np.zeros((n, 2)), z, z, z, t0, t_lift, t_apo, lifted)


def test_contact_ratio_cases():
    assert contact_ratio(_stub_trace(0.1, 0.3, 0.5)) == pytest.approx(0.5)
    assert contact_ratio(_stub_trace(0.1, 0.1, 0.1, lifted=False)) == 1.0
    with pytest.raises(DegenerateTraceError):
        contact_ratio(_stub_trace(0.2, 0.2, 0.2))
    with pytest.raises(DegenerateTraceError):
        jump_metrics(_stub_trace(0.0, 0.0, 0.0, n=0))


def test_single_point_search_returns_that_policy(nominal):
    pol = nominal_policy(ramp_duration=0.07)
    best, metrics = optimize_extension_profile(nominal, search_space=SearchSpace.single(pol))
    assert best == pol
    assert metrics == jump_metrics(simulate_jump(nominal, pol))


def test_search_picks_the_higher_candidate(nominal):
    space = SearchSpace((NOMINAL_CROUCH,), (NOMINAL_EXTEND,), ramp_durations=(0.6, 0.05))
    scores = [jump_metrics(simulate_jump(nominal, p)).max_h_clearance for p in space.policies()]
    best, metrics = optimize_extension_profile(nominal, search_space=space)
    assert metrics.max_h_clearance == max(scores)
    assert best == space.policies()[int(np.argmax(scores))]


def test_search_ties_go_to_the_first_candidate(nominal, monkeypatch):
    flat = JumpMetrics(1.0, 0.5, 0.4, 100.0)
    monkeypatch.setattr(J, "simulate_jump", lambda m, p, cfg: None)
    monkeypatch.setattr(J, "jump_metrics", lambda trace: flat)
    space = SearchSpace.around(points=3)
    best, _ = optimize_extension_profile(nominal, search_space=space)
    assert best == space.policies()[0]


def test_search_skips_out_of_limit_candidates(nominal):
    outside = (NOMINAL_EXTEND[0], nominal.q_h.upper + 0.5)
    space = SearchSpace((NOMINAL_CROUCH,), (outside, NOMINAL_EXTEND))
    best, _, outcome = search_extension_profile(nominal, search_space=space)
    assert outcome.failures == 1 and outcome.evaluated == 1
    assert best.extend_config == NOMINAL_EXTEND


def test_search_space_sizes():
    assert len(SearchSpace.around()) == 125
    assert len(SearchSpace.around(points=3)) == 27
    assert len(study_search_space()) == 8
    with pytest.raises(InvalidSpecError):
        SearchSpace((), (NOMINAL_EXTEND,))


def test_default_search_is_five_per_axis(nominal):
    best, metrics = optimize_extension_profile(nominal)
    space = SearchSpace.around()
    assert best in space.policies()
    assert metrics.lifted


def test_policy_validation():
    with pytest.raises(InvalidSpecError):
        ExtensionPolicy("jump_hard", NOMINAL_CROUCH, NOMINAL_EXTEND)
    with pytest.raises(InvalidSpecError):
        ExtensionPolicy("pd_tracked_ramp", NOMINAL_CROUCH, NOMINAL_EXTEND, ramp_duration=0.0)
    ExtensionPolicy("bang_bang", NOMINAL_CROUCH, NOMINAL_EXTEND, ramp_duration=0.0)


def test_point_mass_oracle():
    ref = point_mass_oracle(23.5, 2 * 23.5 * 9.81, 0.3)
    assert ref.v_liftoff == pytest.approx(math.sqrt(2 * 9.81 * 0.3))
    assert ref.v_liftoff == pytest.approx(2.426, abs=5e-4)
    assert ref.apex_gain == pytest.approx(0.3)
    assert ref.contact_ratio == pytest.approx(0.5)
    with pytest.raises(NoLiftoffError):
        point_mass_oracle(23.5, 23.5 * 9.81, 0.3)


def test_trace_json_round_trip(pogo):
    tr = simulate_pogo(pogo, 2 * pogo.total_mass * 9.81, 0.1)
    back = JumpTrace.from_json(tr.to_json())
    for name in ("time", "q", "qd", "torques", "normal_forces", "tangential_forces", "h_com", "h_clearance"):
        assert np.array_equal(getattr(back, name), getattr(tr, name)), name
    assert (back.t0, back.t_liftoff, back.t_apogee, back.lifted) == (tr.t0, tr.t_liftoff, tr.t_apogee, tr.lifted)


def test_trace_json_keeps_policy(nominal_trace):
    back = JumpTrace.from_json(nominal_trace.to_json())
    assert back.policy == nominal_trace.policy
    assert np.allclose(back.power, nominal_trace.power)


def test_tuck_spins_up_with_constant_momentum(nominal):
    rec = tuck_flight(nominal)
    assert rec.inertia[-1] < 0.6 * rec.inertia[0]
    assert rec.pitch_rate[-1] > 1.5 * rec.pitch_rate[0]
    L = rec.momentum
    assert np.ptp(L) / abs(L[0]) < 0.01
    assert np.max(np.abs(np.diff(L))) / abs(L[0]) < 1e-5
