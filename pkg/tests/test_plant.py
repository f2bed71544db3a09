import math

import numpy as np
import pytest

from nvsc.plant import (AgentParams, DisturbanceProfile, LeaderProfile, build_matrices, cav_agent,
                        disturbance_value, follower_derivative, leader_derivative, profile_leader,
                        true_nonlinearity, LeaderModel, chain_matrix, unit_column)
from oracles import VEH1_RESISTANCE_AT_20

VEH1 = dict(tau=0.1, mass=1500.0, drag_coeff=0.35, frontal_area=2.2, rolling_coeff=0.02, grade_deg=30.0)


def test_cav_matrices_with_mass_scaled_gain():
    M = build_matrices(cav_agent(1, **VEH1), 3, "mass")
    np.testing.assert_allclose(M.A[2], [0.0, 0.0, -10.0])
    np.testing.assert_allclose(M.B, [0.0, 0.0, 1.0 / 150.0])
    np.testing.assert_array_equal(M.A[:2], [[0, 1, 0], [0, 0, 1]])


def test_drivetrain_gain_is_inverse_lag():
    M = build_matrices(cav_agent(1, **VEH1), 3, "drivetrain")
    np.testing.assert_allclose(M.B, [0.0, 0.0, 10.0])


def test_generic_double_integrator():
    M = build_matrices(AgentParams(index=1, a=0.0, b=1.0), 2)
    np.testing.assert_array_equal(M.A, [[0, 1], [0, 0]])
    np.testing.assert_array_equal(M.B, [0, 1])


def test_one_dimensional_state_rejected():
    with pytest.raises(ValueError):
        build_matrices(AgentParams(index=1), 1)


def test_unknown_gain_mode_rejected():
    with pytest.raises(ValueError):
        build_matrices(cav_agent(1, **VEH1), 3, "torque")


def test_resistance_vanishes_on_flat_frictionless_road_at_rest():
    p = cav_agent(1, tau=0.1, mass=1500.0, drag_coeff=0.35, frontal_area=2.2, rolling_coeff=0.0, grade_deg=0.0)
    assert true_nonlinearity(p, [0.0, 0.0, 0.0]) == 0.0


def test_resistance_matches_hand_value():
    assert true_nonlinearity(cav_agent(1, **VEH1), [0.0, 20.0, 0.0]) == pytest.approx(VEH1_RESISTANCE_AT_20, abs=1e-12)


def test_doubling_speed_quadruples_only_drag():
    p = cav_agent(1, **VEH1)
    f0 = true_nonlinearity(p, [0, 0.0, 0])
    f1 = true_nonlinearity(p, [0, 10.0, 0]) - f0
    f2 = true_nonlinearity(p, [0, 20.0, 0]) - f0
    assert f2 == pytest.approx(4 * f1, rel=1e-12)


def test_pure_integrator_chain_derivative():
    p = AgentParams(index=1, a=0.0, b=1.0)
    M = build_matrices(p, 3)
    np.testing.assert_array_equal(follower_derivative(p, M, [1, 2, 3], 0.0, 0.0, None), [2, 3, 0])


def test_cav_derivative_with_unit_drive():
    p = cav_agent(1, **VEH1)
    M = build_matrices(p, 3, "mass")
    np.testing.assert_allclose(follower_derivative(p, M, [0, 10, 0], 150.0, 0.0, None), [10, 0, 1], rtol=1e-14)


def test_disturbance_enters_last_channel_only():
    p = cav_agent(1, **VEH1)
    M = build_matrices(p, 3)
    X = np.array([1.0, 12.0, 0.5])
    base = follower_derivative(p, M, X, 3.0, 0.0)
    moved = follower_derivative(p, M, X, 3.0, p.omega_star)
    np.testing.assert_array_equal(moved[:2], base[:2])
    assert moved[2] - base[2] == pytest.approx(p.omega_star, abs=1e-14)


def test_derivative_rejects_wrong_shape():
    p = cav_agent(1, **VEH1)
    with pytest.raises(ValueError):
        follower_derivative(p, build_matrices(p), [1, 2], 0, 0)


def test_leader_chain_derivative():
    L = LeaderModel(chain_matrix(3, 0.0), unit_column(3), lambda X: 0.0)
    np.testing.assert_array_equal(leader_derivative(L, [0, 5, 0]), [5, 0, 0])
    np.testing.assert_array_equal(leader_derivative(L, [0, 0, 0]), [0, 0, 0])


def test_profile_leader_holds_acceleration():
    L = profile_leader(0.1)
    prof = LeaderProfile()
    for t in (1.0, 9.5, 12.0, 17.3, 30.0):
        X0 = prof.state(t)
        d = leader_derivative(L, X0)
        assert d[1] == pytest.approx(prof.velocity_acceleration(t)[1], abs=1e-12)
        assert d[2] == pytest.approx(0.0, abs=1e-12)


def test_profile_start_and_cruise():
    prof = LeaderProfile()
    assert prof.velocity_acceleration(0.0)[0] == 0.0
    assert prof.velocity_acceleration(12.5)[1] == 0.0


def test_profile_velocity_continuous_at_knots():
    prof = LeaderProfile(times=(0.0, 2.0, 3.5, 7.0), velocities=(4.0, 9.0, 1.0, 1.5))
    for t in prof.times[1:]:
        left, right = prof.state(t - 1e-9), prof.state(t)
        assert left[1] == pytest.approx(right[1], abs=1e-7)
        assert left[0] == pytest.approx(right[0], abs=1e-7)


def test_profile_position_integrates_velocity():
    prof = LeaderProfile()
    ts = np.linspace(0, 25, 25001)
    v = np.array([prof.state(t)[1] for t in ts])
    integral = np.sum(0.5 * (v[1:] + v[:-1]) * np.diff(ts))
    assert prof.state(25.0)[0] == pytest.approx(integral, rel=1e-6)


def test_profile_validation():
    with pytest.raises(ValueError):
        LeaderProfile(times=(1.0,), velocities=(0.0,))
    with pytest.raises(ValueError):
        LeaderProfile(times=(0.0, 0.0), velocities=(0.0, 1.0))


def test_disturbance_is_clamped_to_bound():
    prof = DisturbanceProfile(kind="sinusoid", ratio=0.8, frequency=0.5)
    ws = [disturbance_value(prof, 2.0, 1, t, noise=5.0) for t in np.linspace(0, 20, 200)]
    assert max(abs(w) for w in ws) <= 2.0
    assert disturbance_value(DisturbanceProfile(kind="zero"), 2.0, 1, 3.0) == 0.0


def test_filtered_noise_table_is_seeded():
    prof = DisturbanceProfile(kind="filtered-noise", seed=4)
    a = prof.noise_table(3, 100, 0.01)
    b = prof.noise_table(3, 100, 0.01)
    np.testing.assert_array_equal(a, b)
    assert a.std() > 0
    assert not DisturbanceProfile(kind="sinusoid").noise_table(3, 10, 0.01).any()


def test_grade_enters_as_sine():
    p = cav_agent(1, tau=0.1, mass=1000.0, drag_coeff=0.0, frontal_area=1.0, rolling_coeff=0.0, grade_deg=30.0)
    assert true_nonlinearity(p, [0, 5.0, 0]) == pytest.approx(-9.81 * math.sin(math.radians(30)), rel=1e-14)
