"""DoS attack schedules with frequency/energy limits, and the tolerable-interval calculators.

Schedules live on the control packet grid.  Interval endpoints are integer tick
counts and the constraint constants are exact fractions, so both limits are checked
in integer arithmetic.

frequency:  n(tau, t) <= n0 + (t - tau) / tau_D    (attack onsets in [tau, t))
energy:     |attacked time in [tau, t)| <= Pi0 + (t - tau) / T

The energy offset Pi0 (seconds) lets a single burst exist when T > 1; with
Pi0 = 0 no non-empty schedule can satisfy the energy limit.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import InfeasibleSchedule


def exact(x) -> Fraction:
    """Exact rational from an int, a Fraction, or the shortest decimal form of a float."""
    if isinstance(x, (int, Fraction)):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    if math.isinf(x):
        raise ValueError("infinite values have no rational form")
    return Fraction(repr(float(x)))


@dataclass(frozen=True)
class DosParams:
    """Attacker budget and shape of the random rectangular wave."""

    n0: int = 1
    tau_D: float = 2.0
    T: float = 4.0
    duty: float | None = None  # long-run attacked fraction; default half of 1/T
    min_on: float = 0.05
    max_on: float = 0.4
    targets: tuple[int, ...] = (1,)
    seed: int = 0
    energy_offset: float | None = None  # Pi0 in seconds; defaults to max_on

    def __post_init__(self):
        if self.energy_offset is not None and self.energy_offset < 0:
            raise ValueError("energy offset must be non-negative")
        if self.tau_D <= 0:
            raise ValueError("tau_D must be positive")
        if self.T < 1:
            raise ValueError("T must be at least 1")
        if self.n0 < 0:
            raise ValueError("n0 must be non-negative")
        if not 0 < self.min_on <= self.max_on:
            raise ValueError("need 0 < min_on <= max_on")


@dataclass(frozen=True)
class DosSchedule:
    """Attack windows [start, end) in ticks, per target agent."""

    tick: Fraction
    n_ticks: int
    intervals: dict[int, tuple[tuple[int, int], ...]]
    n0: int
    tau_D: Fraction
    T: Fraction
    seed: int = 0
    energy_offset: Fraction = Fraction(0)

    def seconds(self, agent: int) -> list[tuple[float, float]]:
        h = float(self.tick)
        return [(a * h, b * h) for a, b in self.intervals.get(agent, ())]

    def blocked_mask(self, n_agents: int) -> np.ndarray:
        """Boolean (n_ticks, n_agents) table of blocked packets; column i-1 is follower i."""
        mask = np.zeros((self.n_ticks, n_agents), dtype=bool)
        for agent, ivs in self.intervals.items():
            if not 1 <= agent <= n_agents:
                raise ValueError(f"attack target {agent} is not a follower")
            for a, b in ivs:
                mask[a:b, agent - 1] = True
        return mask

    def to_dict(self) -> dict:
        return {
            "tick": str(self.tick),
            "n_ticks": self.n_ticks,
            "horizon": float(self.tick * self.n_ticks),
            "n0": self.n0,
            "tau_D": str(self.tau_D),
            "T": str(self.T),
            "seed": self.seed,
            "energy_offset": str(self.energy_offset),
            "intervals": {str(k): [[a * float(self.tick), b * float(self.tick)] for a, b in v]
                          for k, v in sorted(self.intervals.items())},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DosSchedule":
        tick = exact(d["tick"])
        n_ticks = int(d["n_ticks"]) if "n_ticks" in d else int(round(exact(d["horizon"]) / tick))
        ivs = {}
        for k, pairs in d.get("intervals", {}).items():
            ivs[int(k)] = tuple(sorted((int(round(exact(a) / tick)), int(round(exact(b) / tick))) for a, b in pairs))
        return cls(tick=tick, n_ticks=n_ticks, intervals=ivs, n0=int(d["n0"]),
                   tau_D=exact(d["tau_D"]), T=exact(d["T"]), seed=int(d.get("seed", 0)),
                   energy_offset=exact(d.get("energy_offset", 0)))


def schedule_from_mask(mask: np.ndarray, tick, n0: int, tau_D, T, seed: int = 0,
                       energy_offset=0) -> DosSchedule:
    """Rebuild interval lists from a realised blocked-packet table."""
    mask = np.asarray(mask, dtype=bool)
    ivs = {}
    for col in range(mask.shape[1]):
        runs = blocked_runs(mask[:, col])
        if runs:
            ivs[col + 1] = tuple(runs)
    return DosSchedule(exact(tick), mask.shape[0], ivs, n0, exact(tau_D), exact(T), seed, exact(energy_offset))


def blocked_runs(flags: np.ndarray) -> list[tuple[int, int]]:
    """Maximal runs of True as half-open [start, end) index pairs."""
    f = np.concatenate([[False], np.asarray(flags, dtype=bool), [False]])
    d = np.diff(f.astype(np.int8))
    return list(zip(np.flatnonzero(d == 1).tolist(), np.flatnonzero(d == -1).tolist()))


@dataclass(frozen=True)
class ScheduleViolation:
    agent: int
    tau: float
    t: float
    bound: str  # "frequency" or "energy"


def _frequency_ok(count: int, length_ticks: int, n0: int, tau_D: Fraction, tick: Fraction) -> bool:
    return (count - n0) * tau_D <= length_ticks * tick


def _energy_ok(measure_ticks: int, length_ticks: int, T: Fraction, slack: Fraction) -> bool:
    """``slack`` is the energy offset expressed in ticks."""
    return (measure_ticks - slack) * T <= length_ticks


def _exact_pairs(ivs, n0, tau_D, T, tick, slack=Fraction(0)):
    """Yield (tau, t, bound) for every violated extremal window."""
    starts = [a for a, _ in ivs]
    for a in range(len(ivs)):
        dur = 0
        for b in range(a, len(ivs)):
            dur += ivs[b][1] - ivs[b][0]
            if not _frequency_ok(b - a + 1, starts[b] - starts[a], n0, tau_D, tick):
                yield starts[a], starts[b] + 1, "frequency"
            if not _energy_ok(dur, ivs[b][1] - starts[a], T, slack):
                yield starts[a], ivs[b][1], "energy"


def validate_schedule(s: DosSchedule, probes: int = 1000, seed: int = 0) -> list[ScheduleViolation]:
    """Check both attacker limits on every extremal window plus ``probes`` random windows per agent."""
    if probes < 1:
        raise ValueError("probes must be at least 1")
    h = float(s.tick)
    out: list[ScheduleViolation] = []
    rng = np.random.default_rng(seed)
    tdp, tdq = s.tau_D.numerator, s.tau_D.denominator
    hp, hq = s.tick.numerator, s.tick.denominator
    Tp, Tq = s.T.numerator, s.T.denominator
    slack = s.energy_offset / s.tick
    sp, sq = slack.numerator, slack.denominator
    for agent, ivs in sorted(s.intervals.items()):
        ivs = list(ivs)
        for (x, y), (x2, _) in zip(ivs, ivs[1:] + [(None, None)]):
            if not 0 <= x < y or (x2 is not None and x2 < y):
                raise ValueError(f"intervals of agent {agent} are not sorted, disjoint and non-empty")
        for a, b, bound in _exact_pairs(ivs, s.n0, s.tau_D, s.T, s.tick, slack):
            out.append(ScheduleViolation(agent, a * h, b * h, bound))
        if not ivs:
            continue
        st = np.array([a for a, _ in ivs], dtype=np.int64)
        en = np.array([b for _, b in ivs], dtype=np.int64)
        span = max(s.n_ticks, int(en[-1]))
        lo = rng.integers(0, span, size=probes)
        hi = rng.integers(0, span + 1, size=probes)
        tau, t = np.minimum(lo, hi), np.maximum(lo, hi)
        keep = t > tau
        tau, t = tau[keep], t[keep]
        count = np.searchsorted(st, t, side="left") - np.searchsorted(st, tau, side="left")
        measure = (np.clip(np.minimum(en[None, :], t[:, None]) - np.maximum(st[None, :], tau[:, None]), 0, None)
                   .sum(axis=1))
        # exact rationals can carry huge numerators, so compare in Python integers
        count, measure = count.astype(object), measure.astype(object)
        length = (t - tau).astype(object)
        freq_bad = (count - s.n0) * tdp * hq > length * hp * tdq
        energy_bad = (measure * sq - sp) * Tp > length * Tq * sq
        freq_bad, energy_bad = freq_bad.astype(bool), energy_bad.astype(bool)
        for k in np.flatnonzero(freq_bad):
            out.append(ScheduleViolation(agent, tau[k] * h, t[k] * h, "frequency"))
        for k in np.flatnonzero(energy_bad):
            out.append(ScheduleViolation(agent, tau[k] * h, t[k] * h, "energy"))
    return out


def _fits(ivs: list[tuple[int, int]], cand: tuple[int, int], n0, tau_D, T, tick, slack=Fraction(0)) -> bool:
    """Exact check of every extremal window that ends at the candidate interval."""
    trial = ivs + [cand]
    b = len(trial) - 1
    dur = 0
    for a in range(b, -1, -1):
        dur += trial[a][1] - trial[a][0]
        if not _frequency_ok(b - a + 1, cand[0] - trial[a][0], n0, tau_D, tick):
            return False
        if not _energy_ok(dur, cand[1] - trial[a][0], T, slack):
            return False
    return True


def generate_schedule(params: DosParams, horizon: float, tick: float = 0.01,
                      max_attempts: int = 100) -> DosSchedule:
    """Random rectangular wave per target, resampling any pulse that would breach a limit."""
    tick_q = exact(tick)
    tau_D, T = exact(params.tau_D), exact(params.T)
    n_ticks = int(round(exact(horizon) / tick_q))
    if n_ticks <= 0:
        raise ValueError("horizon must cover at least one tick")
    duty = params.duty if params.duty is not None else 0.5 / float(T)
    if not 0 < duty <= 1:
        raise InfeasibleSchedule(f"duty {duty} outside (0, 1]")
    if duty > 1 / float(T):
        raise InfeasibleSchedule(f"requested duty {duty:g} exceeds the energy limit 1/T = {1 / float(T):g}")
    h = float(tick_q)
    offset = exact(params.energy_offset if params.energy_offset is not None else params.max_on)
    slack = offset / tick_q
    on_lo = max(1, int(round(params.min_on / h)))
    on_hi = max(on_lo, int(round(params.max_on / h)))
    mean_on = 0.5 * (on_lo + on_hi)
    mean_off = max(mean_on * (1 - duty) / duty, float(tau_D) / h / max(params.n0, 1))
    intervals: dict[int, tuple[tuple[int, int], ...]] = {}
    for agent in params.targets:
        rng = np.random.default_rng([params.seed, agent])
        for _ in range(max_attempts):
            ivs: list[tuple[int, int]] = []
            cursor = int(rng.exponential(mean_off))
            while cursor < n_ticks:
                on = int(rng.integers(on_lo, on_hi + 1))
                cand = (cursor, min(cursor + on, n_ticks))
                placed = False
                for _ in range(8):
                    if params.n0 >= 1 and _fits(ivs, cand, params.n0, tau_D, T, tick_q, slack):
                        ivs.append(cand)
                        placed = True
                        break
                    shorter = max(1, (cand[1] - cand[0]) // 2)
                    cand = (cand[0], cand[0] + shorter)
                end = ivs[-1][1] if placed else cursor
                cursor = end + 1 + int(rng.exponential(mean_off))
            sched = DosSchedule(tick_q, n_ticks, {agent: tuple(ivs)}, params.n0, tau_D, T, params.seed, offset)
            if not validate_schedule(sched, probes=1, seed=params.seed):
                intervals[agent] = tuple(ivs)
                break
        else:
            raise InfeasibleSchedule(f"no valid schedule for agent {agent} after {max_attempts} draws")
    return DosSchedule(tick_q, n_ticks, intervals, params.n0, tau_D, T, params.seed, offset)


# ---------------------------------------------------------------------------
# Tolerable attack length


def max_tolerable_interval(A_norm: float, gamma: float) -> float:
    """(1/||A||) ln(1 + gamma ||A||); tends to gamma as ||A|| -> 0."""
    if A_norm < 0 or gamma < 0:
        raise ValueError("norm and gamma must be non-negative")
    x = gamma * A_norm
    if x < 1e-8:
        # series form; also covers norms so small that the product underflows
        return gamma * (1.0 - x / 2.0)
    return math.log1p(x) / A_norm


def spectral_norm(M) -> float:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[1] == 1 or M.shape[0] == 1:
        return float(np.linalg.norm(M))
    return float(np.linalg.norm(M, 2))


@dataclass(frozen=True)
class Snapshot:
    """Controller quantities at the last successful update before an attack."""

    E: np.ndarray
    neighbor_E: tuple[tuple[float, np.ndarray], ...]  # (alpha_ij, E_j(k)); leader contributes zero
    u_hat_d: np.ndarray
    eta_hat_norm: float


@dataclass(frozen=True)
class DeltaConstants:
    A: np.ndarray
    B: np.ndarray
    B_w: np.ndarray
    B_f: np.ndarray
    B_f0: np.ndarray
    P: np.ndarray
    K_u: np.ndarray
    K_C: np.ndarray
    omega_star: float
    sigma_d_star: float
    eps_star: float
    eps0: float


def delta_terms(snap: Snapshot, c: DeltaConstants) -> dict[str, float]:
    """Each summand of the snapshot forcing bound, every vector or matrix taken in norm."""
    E = np.asarray(snap.E, dtype=float)
    BBt = np.outer(c.B, c.B)
    BBtP = spectral_norm(BBt @ c.P)
    tanhPE = np.tanh(c.P @ E)
    K_u = np.diag(c.K_u) if np.ndim(c.K_u) == 1 else np.asarray(c.K_u)
    K_C = np.diag(c.K_C) if np.ndim(c.K_C) == 1 else np.asarray(c.K_C)
    alpha_sum = sum(a for a, _ in snap.neighbor_E)
    cross = sum(a * float(np.linalg.norm(Ej)) for a, Ej in snap.neighbor_E)
    return {
        "disturbance": spectral_norm(c.B_w) * c.omega_star,
        "drift": float(np.linalg.norm(c.A @ E)),
        "consensus_self": 0.5 * alpha_sum * BBtP * float(np.linalg.norm(E)),
        "consensus_neighbors": 0.5 * BBtP * spectral_norm(np.diag(tanhPE)) * spectral_norm(np.eye(E.size) - K_C) * cross,
        "switching": spectral_norm(K_u) * float(np.linalg.norm(tanhPE)),
        "observer": spectral_norm(BBt) * float(np.linalg.norm(snap.u_hat_d)),
        "virtual_disturbance": c.sigma_d_star,
        "approximation": spectral_norm(c.B_f) * c.eps_star,
        "weights": 2.0 * snap.eta_hat_norm,
        "leader": spectral_norm(c.B_f0) * c.eps0,
    }


def delta_1k(snap: Snapshot, c: DeltaConstants) -> float:
    return float(sum(delta_terms(snap, c).values()))


def gamma_1i(zeta: float, delta: float, P, G) -> float:
    """zeta / (delta ||P G P||); infinite when delta vanishes."""
    P = np.asarray(P, dtype=float)
    norm = spectral_norm(P @ np.asarray(G, dtype=float) @ P)
    if norm <= 0:
        raise ValueError("||P G P|| must be positive")
    if delta <= 0:
        warnings.warn("delta is zero; gamma is unbounded", stacklevel=2)
        return math.inf
    return zeta / (delta * norm)


@dataclass(frozen=True)
class DeviationParams:
    zeta: float
    gamma: float
    delta: float
    a: tuple[float, float, float, float, float]
    max_interval: float
    design_margin: float  # gamma - (zeta + ||P K_u|| + a1 + a2 + a3 + a5); positive when satisfied

    @property
    def deviation_bound(self) -> float:
        return self.gamma * self.delta


def deviation_params(zeta: float, delta: float, P, G, A, K_u, a=None) -> DeviationParams:
    P = np.asarray(P, dtype=float)
    gamma = gamma_1i(zeta, delta, P, G)
    K_u = np.diag(K_u) if np.ndim(K_u) == 1 else np.asarray(K_u)
    base = zeta + spectral_norm(P @ K_u)
    if a is None:
        avail = gamma - base
        share = avail / 5.0 if avail > 0 and math.isfinite(avail) else 0.0
        a = (share,) * 5
    a = tuple(float(x) for x in a)
    margin = gamma - (base + a[0] + a[1] + a[2] + a[4])
    return DeviationParams(zeta, gamma, delta, a, max_tolerable_interval(spectral_norm(A), gamma), margin)
