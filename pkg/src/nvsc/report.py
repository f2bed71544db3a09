"""Trace CSV and report JSON: writing, reading back, and reproducing a report from disk."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .analysis import assess, lyapunov_series
from .dos import DosSchedule, blocked_runs
from .engine import Prepared, ScenarioConfig, SimTrace, prepare

COLUMNS = ("t", "agent", "x1", "x2", "x3", "xhat1", "xhat2", "xhat3", "e1", "e2", "e3", "u", "eps", "V", "Vo",
           "tick", "ud1", "ud2", "ud3", "eta_norm", "blocked", "eta_changed")


def select_rows(trace: SimTrace, stride: int) -> np.ndarray:
    """Regular grid rows, the final row, and every row of each attack run from the
    last delivered update through recovery."""
    K = len(trace.t)
    keep = np.zeros(K, dtype=bool)
    keep[::stride] = True
    keep[-1] = True
    for i in range(trace.n_followers):
        for a, b in blocked_runs(trace.blocked[:, i]):
            keep[max(a - 1, 0):min(b + 1, K)] = True
    return np.flatnonzero(keep)


def _fmt(x) -> str:
    return repr(float(x))


def trace_csv(trace: SimTrace, P) -> str:
    """One leader row (agent 0) and one row per follower at every logged tick."""
    V, V_o = lyapunov_series(trace, P)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    n = trace.X.shape[2]
    blank = [""] * n
    for k in range(len(trace.t)):
        t = _fmt(trace.t[k])
        tick = str(int(trace.tick[k]))
        w.writerow([t, "0", *map(_fmt, trace.X0[k]), *blank, *blank, "", "", "", "", tick, *blank, "", "", ""])
        for i in range(trace.n_followers):
            w.writerow([t, str(i + 1), *map(_fmt, trace.X[k, i]), *map(_fmt, trace.X_hat[k, i]),
                        *map(_fmt, trace.E[k, i]), _fmt(trace.u[k, i]), str(int(trace.eps[k, i])),
                        _fmt(V[k, i]), _fmt(V_o[k, i]), tick, *map(_fmt, trace.u_hat_d[k, i]),
                        _fmt(trace.eta_norm[k, i]), str(int(trace.blocked[k, i])), str(int(trace.eta_changed[k, i]))])
    return buf.getvalue()


def read_trace_csv(path, packet_period: float) -> SimTrace:
    """Rebuild the logged rows of a trace; the CSV must hold a leader row for each tick."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != COLUMNS:
            raise ValueError(f"{path} does not have the expected trace columns")
        rows = list(reader)
    ticks = sorted({int(r["tick"]) for r in rows})
    index = {k: j for j, k in enumerate(ticks)}
    N = max(int(r["agent"]) for r in rows)
    K, n = len(ticks), 3
    t = np.zeros(K)
    X0 = np.zeros((K, n))
    X, Xh, E, Ud = (np.zeros((K, N, n)) for _ in range(4))
    u, eta_n = np.zeros((K, N)), np.zeros((K, N))
    eps = np.zeros((K, N), dtype=np.int8)
    blocked = np.zeros((K, N), dtype=bool)
    changed = np.zeros((K, N), dtype=bool)
    seen = np.zeros((K, N + 1), dtype=bool)
    for r in rows:
        k, a = index[int(r["tick"])], int(r["agent"])
        seen[k, a] = True
        t[k] = float(r["t"])
        x = [float(r[f"x{l}"]) for l in (1, 2, 3)]
        if a == 0:
            X0[k] = x
            continue
        i = a - 1
        X[k, i] = x
        Xh[k, i] = [float(r[f"xhat{l}"]) for l in (1, 2, 3)]
        E[k, i] = [float(r[f"e{l}"]) for l in (1, 2, 3)]
        Ud[k, i] = [float(r[f"ud{l}"]) for l in (1, 2, 3)]
        u[k, i] = float(r["u"])
        eps[k, i] = int(r["eps"])
        eta_n[k, i] = float(r["eta_norm"])
        blocked[k, i] = r["blocked"] == "1"
        changed[k, i] = r["eta_changed"] == "1"
    if not seen.all():
        raise ValueError(f"{path} is missing rows for some agents")
    return SimTrace(t=t, tick=np.array(ticks, dtype=np.int64), X=X, X_hat=Xh, E=E, u=u, u_hat_d=Ud,
                    eta_norm=eta_n, eta_changed=changed, eps=eps, blocked=blocked, X0=X0,
                    f_hat=np.zeros((K, N)), packet_period=packet_period)


def _clean(obj):
    """Make a report strictly JSON: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")
    return obj


def report_json(report: dict) -> str:
    return json.dumps(_clean(report), sort_keys=True, indent=2) + "\n"


def build_report(cfg: ScenarioConfig, trace: SimTrace, prep: Prepared | None = None,
                 schedule: DosSchedule | None = None) -> tuple[SimTrace, dict]:
    """Reduce the trace to its logged rows and assess that subset."""
    prep = prep or prepare(cfg)
    logged = trace.rows(select_rows(trace, cfg.analysis.trace_stride))
    return logged, assess(cfg, logged, prep, schedule)


def write_outputs(out_dir, cfg: ScenarioConfig, trace: SimTrace, prep: Prepared | None = None,
                  schedule: DosSchedule | None = None) -> tuple[SimTrace, dict]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    prep = prep or prepare(cfg)
    logged, report = build_report(cfg, trace, prep, schedule)
    (out / "trace.csv").write_text(trace_csv(logged, prep.P))
    (out / "report.json").write_text(report_json(report))
    if schedule is not None:
        (out / "schedule.json").write_text(json.dumps(schedule.to_dict(), sort_keys=True, indent=2) + "\n")
    return logged, report


def reproduce_report(out_dir, cfg: ScenarioConfig) -> str:
    """Report text recomputed from ``trace.csv`` (and ``schedule.json`` if present)."""
    out = Path(out_dir)
    trace = read_trace_csv(out / "trace.csv", cfg.packet_period)
    sched_path = out / "schedule.json"
    schedule = DosSchedule.from_dict(json.loads(sched_path.read_text())) if sched_path.exists() else None
    return report_json(assess(cfg, trace, prepare(cfg), schedule))
