import math
from fractions import Fraction

import numpy as np
import pytest

from nvsc.analysis import (BoundReport, attack_runs, check_energy, check_hold, check_attack_deviation,
                           check_observer_envelope, collision_check, delta_constants, envelope_report,
                           lyapunov_series, quadratic_form, quarter_means, snapshot_at, residual_log_bound)
from nvsc.dos import DosSchedule, delta_1k
from nvsc.engine import SimTrace


def _trace(K=20, N=2, n=3, h=0.01):
    z = np.zeros
    return SimTrace(t=np.arange(K) * h, tick=np.arange(K), X=z((K, N, n)), X_hat=z((K, N, n)), E=z((K, N, n)),
                    u=z((K, N)), u_hat_d=z((K, N, n)), eta_norm=z((K, N)), eta_changed=z((K, N), dtype=bool),
                    eps=z((K, N), dtype=np.int64), blocked=z((K, N), dtype=bool), X0=z((K, n)), f_hat=z((K, N)),
                    packet_period=h)


def test_quadratic_form_examples():
    E = np.zeros((1, 1, 3))
    assert quadratic_form(E, np.eye(3)[None])[0, 0] == 0.0
    E[0, 0, 0] = 1.0
    assert quadratic_form(E, np.eye(3)[None])[0, 0] == 1.0
    P = np.array([[[2.0, 0.5, 0], [0.5, 1.0, 0], [0, 0, 3.0]]])
    E[0, 0] = [1.0, -2.0, 1.0]
    assert quadratic_form(E, P)[0, 0] == pytest.approx(2 - 2 + 4 + 3)


def test_zero_error_trace_has_zero_lyapunov():
    V, V_o = lyapunov_series(_trace(), np.stack([np.eye(3)] * 2))
    assert not V.any() and not V_o.any()


def test_bound_report_sign_consistency():
    with pytest.raises(ValueError):
        BoundReport("x", True, -1.0, 0.0)
    assert BoundReport("x", False, -1.0, 0.0).to_dict()["worst_margin"] == -1.0


def test_envelope_accepts_exact_decay():
    t = np.linspace(0, 0.05, 51)
    V = 3.0 * np.exp(-100 * t) + 0.01
    rep = envelope_report(t, V, 100.0, 1.0, slack=0.0)
    assert rep.satisfied and rep.worst_margin == pytest.approx(0.01 * math.exp(-5), rel=1e-9)
    assert rep.worst_time == pytest.approx(0.05)


def test_envelope_flags_late_bump():
    t = np.linspace(0, 0.05, 51)
    V = 3.0 * np.exp(-100 * t)
    V[30] = 1.0
    rep = envelope_report(t, V, 100.0, 1.0)
    assert not rep.satisfied
    assert rep.worst_time == pytest.approx(t[30])
    assert rep.detail["worst_agent"] == 1


def test_envelope_zero_series():
    rep = envelope_report(np.arange(5.0), np.zeros(5), 1.0, 0.0)
    assert rep.satisfied and rep.worst_margin == math.inf


def test_envelope_not_applicable_under_attack():
    tr = _trace()
    tr.blocked[3, 0] = True
    assert not check_observer_envelope(tr, np.stack([np.eye(3)] * 2), 1.0, 1.0).applicable


def test_quarter_means_example():
    t = np.arange(8.0)
    q1, q4 = quarter_means(t, np.array([4, -4, 0, 0, 0, 0, 1, -3.0]), 8.0)
    assert (q1, q4) == (4.0, 2.0)
    with pytest.raises(ValueError):
        quarter_means(np.array([0.0]), np.array([1.0]), 8.0)


def test_collision_crossing_reported():
    t = np.arange(4.0)
    pos = np.array([[30, 20, 10], [30, 20, 15], [30, 20, 21], [30, 20, 25.0]])
    rep = collision_check(t, pos, [5.0, 5.0])
    assert not rep.ok and rep.first_crossing_time == 2.0 and rep.first_crossing_pair == 2
    assert rep.min_spacing == [10.0, -5.0]


def test_collision_free_and_trivial():
    t = np.arange(3.0)
    rep = collision_check(t, np.array([[10, 5.0], [11, 6.0], [12, 8.0]]), [3.0])
    assert rep.ok and rep.below_min_gap == [False]
    assert collision_check(t, np.zeros((3, 1))).ok


def _held_trace():
    tr = _trace()
    tr.blocked[5:9, 0] = True
    tr.eps[6:10, 0] = 1
    tr.u[:, 0] = np.arange(20.0)
    tr.u[4:9, 0] = 4.0
    tr.u_hat_d[:, 0] = 0.5
    tr.eta_changed[:, 0] = True
    tr.eta_changed[6:10, 0] = False
    return tr


def test_hold_check_accepts_frozen_interval():
    rep = check_hold(_held_trace())
    assert rep["ok"] and rep["intervals"]["1"][0]["start"] == pytest.approx(0.05)


def test_hold_check_catches_drift():
    tr = _held_trace()
    tr.u[7, 0] = 4.5
    assert not check_hold(tr)["ok"]
    tr = _held_trace()
    tr.eta_changed[8, 0] = True
    assert not check_hold(tr)["ok"]


def test_zero_policy_check():
    tr = _held_trace()
    tr.u[6:9, 0] = 0.0
    assert check_hold(tr, "zero")["ok"]
    tr.u[7, 0] = 1.0
    assert not check_hold(tr, "zero")["ok"]


def test_attack_runs_need_contiguous_ticks():
    tr = _trace()
    tr.blocked[3:5, 1] = True
    tr.tick = tr.tick.copy()
    tr.tick[4] = 9
    with pytest.raises(ValueError):
        attack_runs(tr, 2)


def test_energy_recheck():
    tr = _trace(K=100)
    tr.blocked[10:20, 0] = True
    ok = DosSchedule(Fraction(1, 100), 100, {1: ((10, 20),)}, 1, Fraction(1, 10), Fraction(4), 0, Fraction(1, 10))
    assert check_energy(tr, ok)["ok"]
    strict = DosSchedule(Fraction(1, 100), 100, {1: ((10, 20),)}, 1, Fraction(1, 10), Fraction(4), 0)
    assert not check_energy(tr, strict)["ok"]
    assert check_energy(_trace(), None)["ok"]


def test_residual_log_bound_small_case():
    c = 0.5
    direct = math.log((1 + 2 * math.exp(c) / (1 - math.exp(-c))) * 3.0)
    assert residual_log_bound(1.0, 2.0, 1.0, 1.0, 3.0) == pytest.approx(direct, rel=1e-14)


def test_residual_log_bound_edge_cases():
    assert residual_log_bound(1.0, 1.0, 1.0, 1.0, 1.0) == math.inf
    big = residual_log_bound(1000.0, 4.0, 1.0, 2.0, 1e5)
    assert math.isfinite(big) and big == pytest.approx(1500 + math.log(2) + math.log(1e5), rel=1e-12)
    with pytest.raises(ValueError):
        residual_log_bound(1.0, 2.0, 1.0, 1.0, 0.0)


def test_deviation_check_not_applicable_without_attacks(nominal_cfg, nominal_prep, nominal_trace):
    assert not check_attack_deviation(nominal_trace, nominal_cfg, nominal_prep, 1e10).applicable


def test_deviation_rows_follow_their_definition(attack_run):
    cfg, prep, _, trace = attack_run
    rep = check_attack_deviation(trace, cfg, prep, cfg.analysis.zeta)
    assert rep.detail["intervals"]
    row = rep.detail["intervals"][0]
    a = attack_runs(trace, row["agent"])[0][0]
    delta = delta_1k(snapshot_at(trace, cfg, row["agent"], a - 1), delta_constants(cfg, prep, row["agent"] - 1))
    assert row["delta"] == delta
    assert row["bound"] == pytest.approx(row["gamma"] * delta, rel=1e-12)
    assert row["measured"] >= 0
