"""Scenario configuration, fixed-step integration and the simulation driver."""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernel
from .controller import ControllerGains
from .dos import DosParams, DosSchedule, generate_schedule, exact
from .errors import ConfigError, NumericalBlowup, Violation
from .estimator import NeuralConfig
from .observer import check_gain_condition
from .plant import (TABLE_VEHICLES, AgentParams, DisturbanceProfile, LeaderProfile, build_matrices,
                    cav_agent, chain_matrix, resistance_coefficients)
from .riccati import RiccatiProblem, solve_are
from .topology import Topology, build_lpf, validate

BUNDLED_CONFIGS = Path(__file__).with_name("configs")


# ---------------------------------------------------------------------------
# Generic integrator


def rk4_step(f, t: float, y, dt: float):
    """Classical fourth-order Runge-Kutta step of y' = f(t, y)."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    y = np.asarray(y, dtype=float)
    k1 = f(t, y)
    k2 = f(t + dt / 2, y + dt / 2 * k1)
    k3 = f(t + dt / 2, y + dt / 2 * k2)
    k4 = f(t + dt, y + dt * k3)
    out = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise NumericalBlowup(t + dt, -1, "state")
    return out


def rk4_solve(f, y0, t0: float, t1: float, dt: float):
    steps = int(round((t1 - t0) / dt))
    y = np.asarray(y0, dtype=float)
    for k in range(steps):
        y = rk4_step(f, t0 + k * dt, y, dt)
    return y


# ---------------------------------------------------------------------------
# Configuration


@dataclass(frozen=True)
class AnalysisSettings:
    zeta: float = 1.0e10
    position_threshold: float = 0.5
    settle_time: float = 20.0
    envelope_slack: float = 0.05
    trace_stride: int = 40


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    agents: tuple[AgentParams, ...]
    leader_tau: float
    profile: LeaderProfile
    eps0: float
    topology: Topology
    gains: ControllerGains
    K_o: np.ndarray
    xi: float
    psi: float
    neural: NeuralConfig
    disturbance: DisturbanceProfile
    dos: DosParams | None
    dos_schedule: DosSchedule | None
    dt: float
    packet_period: float
    horizon: float
    input_mechanism: str
    gain_mode: str
    detection_window: float
    initial_offset: np.ndarray
    observer_offset: np.ndarray
    seed: int
    analysis: AnalysisSettings
    raw: dict = field(repr=False, compare=False, default_factory=dict)

    @property
    def n(self) -> int:
        return self.K_o.size

    @property
    def n_followers(self) -> int:
        return len(self.agents)

    @property
    def substeps(self) -> int:
        return int(round(self.packet_period / self.dt))

    @property
    def n_ticks(self) -> int:
        return int(round(self.horizon / self.packet_period))

    def with_overrides(self, **changes) -> "ScenarioConfig":
        """Rebuild from the raw document with top-level keys replaced."""
        raw = copy.deepcopy(self.raw)
        raw.update(changes)
        return config_from_dict(raw)

    def schedule(self) -> DosSchedule | None:
        if self.dos_schedule is not None:
            return self.dos_schedule
        if self.dos is None:
            return None
        return generate_schedule(self.dos, self.horizon, self.packet_period)


def _vec(x, n, name):
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        return np.full(n, float(arr))
    if arr.ndim == 2:
        if not np.allclose(arr, np.diag(np.diag(arr))):
            raise ConfigError([Violation("NOT_DIAGONAL", f"{name} must be diagonal")])
        arr = np.diag(arr)
    if arr.shape != (n,):
        raise ConfigError([Violation("BAD_SHAPE", f"{name} must have {n} entries")])
    return arr


def default_document() -> dict:
    """The platoon scenario with the tabulated vehicle and gain values."""
    return json.loads((BUNDLED_CONFIGS / "nominal.json").read_text())


def config_from_dict(doc: dict) -> ScenarioConfig:
    doc = copy.deepcopy(doc)
    n = int(doc.get("state_dim", 3))
    bounds = doc.get("bounds", {})
    agents = []
    for idx, veh in enumerate(doc["followers"], start=1):
        veh = dict(veh)
        own_bounds = {**bounds, **veh.pop("bounds", {})}
        if "a" in veh or "b" in veh:
            agents.append(AgentParams(index=idx, **veh, **own_bounds))
        else:
            agents.append(cav_agent(idx, **veh, **own_bounds))
    leader = doc.get("leader", {})
    prof = leader.get("profile", {})
    profile = LeaderProfile(tuple(prof.get("times", (0.0, 10.0, 15.0, 20.0))),
                            tuple(prof.get("velocities", (0.0, 20.0, 20.0, 10.0))),
                            float(prof.get("position0", 0.0)))
    topo_doc = doc.get("topology", "lpf")
    topology = build_lpf(len(agents)) if topo_doc == "lpf" else Topology(np.array(topo_doc))
    g = doc.get("gains", {})
    d_0 = float(doc.get("standstill_gap", agents[0].vehicle.standstill_gap if agents[0].vehicle else 0.0))
    D0 = np.asarray(g.get("D0", [-d_0] + [0.0] * (n - 1)), dtype=float)
    gains = ControllerGains(K_C=_vec(g.get("K_C", 2.0), n, "K_C"), K_u=_vec(g.get("K_u", 1000.0), n, "K_u"),
                            rho=float(g.get("rho", 2.0)), eps_reg=_vec(g.get("eps_reg", 0.5), n, "eps_reg"), D0=D0)
    nn = doc.get("neural", {})
    neural = NeuralConfig.evenly_spaced(int(nn.get("neurons", 25)), n, float(nn.get("low", -10.0)),
                                        float(nn.get("high", 30.0)), _vec(g.get("K_eta", 1000.0), n, "K_eta"),
                                        scale=float(nn.get("scale", 1.0)), literal=bool(nn.get("literal", False)),
                                        K_eta_star=float(nn.get("K_eta_star", math.inf)))
    dist = doc.get("disturbance", {})
    disturbance = DisturbanceProfile(kind=dist.get("kind", "sinusoid"), ratio=float(dist.get("ratio", 0.8)),
                                     frequency=float(dist.get("frequency", 0.5)),
                                     noise_std=float(dist.get("noise_std", 0.3)),
                                     noise_cutoff=float(dist.get("noise_cutoff", 2.0)),
                                     seed=int(dist.get("seed", doc.get("seed", 0))))
    seed = int(doc.get("seed", 0))
    dos = schedule = None
    dd = doc.get("dos")
    if dd:
        if "intervals" in dd:
            schedule = DosSchedule.from_dict({"tick": dd.get("tick", doc.get("packet_period", 0.00025)),
                                              "horizon": doc.get("horizon", 25.0), **dd})
        else:
            dos = DosParams(n0=int(dd.get("n0", 1)), tau_D=float(dd.get("tau_D", 2.0)), T=float(dd.get("T", 4.0)),
                            duty=dd.get("duty"), min_on=float(dd.get("min_on", 0.05)),
                            max_on=float(dd.get("max_on", 0.4)), targets=tuple(dd.get("targets", (1,))),
                            seed=int(dd.get("seed", seed)), energy_offset=dd.get("energy_offset"))
    init = doc.get("initial", {})
    an = doc.get("analysis", {})
    return ScenarioConfig(
        name=str(doc.get("name", "scenario")),
        agents=tuple(agents),
        leader_tau=float(leader.get("tau", TABLE_VEHICLES[0]["tau"])),
        profile=profile,
        eps0=float(leader.get("eps0", 40.0)),
        topology=topology,
        gains=gains,
        K_o=_vec(g.get("K_o", 1000.0), n, "K_o"),
        xi=float(g.get("xi", 2.0)),
        psi=float(g.get("psi", 1000.0)),
        neural=neural,
        disturbance=disturbance,
        dos=dos,
        dos_schedule=schedule,
        dt=float(doc.get("dt", 0.00025)),
        packet_period=float(doc.get("packet_period", 0.00025)),
        horizon=float(doc.get("horizon", 25.0)),
        input_mechanism=str(doc.get("input_mechanism", "hold")),
        gain_mode=str(doc.get("input_gain", "drivetrain")),
        detection_window=float(doc.get("detection_window", 1.5)),
        initial_offset=_vec(init.get("offset", [0.5] + [0.0] * (n - 1)), n, "initial offset"),
        observer_offset=_vec(init.get("observer_offset", 0.0), n, "observer offset"),
        seed=seed,
        analysis=AnalysisSettings(**an),
        raw=doc,
    )


def resolve_config_path(path: str | Path) -> Path:
    p = Path(path)
    if p.exists():
        return p
    bundled = BUNDLED_CONFIGS / p.name
    if bundled.exists():
        return bundled
    raise FileNotFoundError(f"config not found: {path}")


def load_config(path: str | Path) -> ScenarioConfig:
    return config_from_dict(json.loads(resolve_config_path(path).read_text()))


def config_violations(cfg: ScenarioConfig) -> list[Violation]:
    out: list[Violation] = []
    topo_problems = validate(cfg.topology)
    out += [Violation("TOPOLOGY", p) for p in topo_problems]
    if cfg.topology.n_followers != cfg.n_followers:
        out.append(Violation("TOPOLOGY", f"graph has {cfg.topology.n_followers} followers, config lists {cfg.n_followers}"))
    if cfg.horizon <= 0:
        out.append(Violation("HORIZON", "horizon must be positive"))
    if cfg.dt <= 0 or cfg.packet_period <= 0:
        out.append(Violation("STEP", "dt and packet period must be positive"))
    elif abs(cfg.packet_period / cfg.dt - cfg.substeps) > 1e-9 or cfg.substeps < 1:
        out.append(Violation("STEP", f"dt {cfg.dt} does not divide packet period {cfg.packet_period}"))
    if cfg.input_mechanism not in ("hold", "zero"):
        out.append(Violation("MECHANISM", f"input mechanism must be hold or zero, got {cfg.input_mechanism!r}"))
    if cfg.gain_mode not in ("mass", "drivetrain"):
        out.append(Violation("INPUT_GAIN", f"input gain must be mass or drivetrain, got {cfg.gain_mode!r}"))
    if cfg.detection_window < 1:
        out.append(Violation("DETECTION", "detection window must be at least one packet period"))
    if cfg.psi <= 0:
        out.append(Violation("PSI", "psi must be positive"))
    if cfg.xi <= 1:
        out.append(Violation("XI_NOT_GT_ONE", f"xi must exceed 1, got {cfg.xi}"))
    if cfg.gains.D0.shape != (cfg.n,):
        out.append(Violation("BAD_SHAPE", f"D0 must have {cfg.n} entries"))
    seen_gain_codes = set()
    for p in cfg.agents:
        for v in cfg.gains.violations(1.0, p.omega_star, p.u_d_star):
            if v.code not in seen_gain_codes:
                seen_gain_codes.add(v.code)
                out.append(v)
        if cfg.xi > 1:
            chk = check_gain_condition(cfg.K_o, cfg.xi, p.sigma_d_star, p.eta_star)
            if not chk.ok:
                out.append(Violation("KO_GAIN_CONDITION",
                                     f"agent {p.index}: min K_o must exceed xi (sigma_d* + 2 eta*), margin {chk.margin:g}"))
    if cfg.dos_schedule is not None:
        from .dos import validate_schedule
        for v in validate_schedule(cfg.dos_schedule, probes=100, seed=cfg.seed):
            out.append(Violation("DOS_SCHEDULE", f"agent {v.agent}: {v.bound} limit broken on [{v.tau:g}, {v.t:g})"))
        bad = [a for a in cfg.dos_schedule.intervals if not 1 <= a <= cfg.n_followers]
        out += [Violation("DOS_TARGET", f"attack target {a} is not a follower") for a in bad]
    elif cfg.dos is not None:
        bad = [a for a in cfg.dos.targets if not 1 <= a <= cfg.n_followers]
        out += [Violation("DOS_TARGET", f"attack target {a} is not a follower") for a in bad]
    return out


# ---------------------------------------------------------------------------
# Prepared numerics


@dataclass(frozen=True)
class Prepared:
    A: np.ndarray  # (N, n, n)
    A0: np.ndarray
    B: np.ndarray  # (N, n)
    G: np.ndarray  # (N, n, n)
    P: np.ndarray  # (N, n, n)
    residuals: np.ndarray
    Minv: np.ndarray
    kdrag: np.ndarray
    kconst: np.ndarray
    omega: np.ndarray


def prepare(cfg: ScenarioConfig) -> Prepared:
    N, n = cfg.n_followers, cfg.n
    A = np.empty((N, n, n))
    B = np.empty((N, n))
    G = np.empty((N, n, n))
    P = np.empty((N, n, n))
    res = np.empty(N)
    Minv = np.empty((N, n, n))
    for k, p in enumerate(cfg.agents):
        M = build_matrices(p, n, cfg.gain_mode)
        A[k], B[k] = M.A, M.B
        G[k] = cfg.topology.degree(p.index) * np.outer(M.B, M.B)
        sol = solve_are(RiccatiProblem(M.A, G[k], cfg.psi))
        P[k], res[k] = sol.P, sol.residual_norm
        Minv[k] = np.linalg.inv(np.outer(M.B, M.B) + np.diag(cfg.gains.eps_reg))
    coeffs = np.array([resistance_coefficients(p) for p in cfg.agents])
    return Prepared(A=A, A0=chain_matrix(n, -1.0 / cfg.leader_tau), B=B, G=G, P=P, residuals=res, Minv=Minv,
                    kdrag=coeffs[:, 0].copy(), kconst=coeffs[:, 1].copy(),
                    omega=np.array([p.omega_star for p in cfg.agents]))


def leader_profile(t: float, profile: LeaderProfile | None = None) -> tuple[float, float]:
    """Leader (velocity, acceleration) at time t."""
    if t < 0:
        raise ValueError("time must be non-negative")
    return (profile or LeaderProfile()).velocity_acceleration(t)


# ---------------------------------------------------------------------------
# Trace


@dataclass
class SimTrace:
    """Per-tick record; every per-agent array has the agent on axis 1."""

    t: np.ndarray
    tick: np.ndarray
    X: np.ndarray
    X_hat: np.ndarray
    E: np.ndarray
    u: np.ndarray
    u_hat_d: np.ndarray
    eta_norm: np.ndarray
    eta_changed: np.ndarray
    eps: np.ndarray
    blocked: np.ndarray
    X0: np.ndarray
    f_hat: np.ndarray
    packet_period: float
    newton_iterations: int = 0

    @property
    def E_o(self) -> np.ndarray:
        return self.X - self.X_hat

    @property
    def n_followers(self) -> int:
        return self.X.shape[1]

    def rows(self, idx) -> "SimTrace":
        idx = np.asarray(idx)
        return SimTrace(self.t[idx], self.tick[idx], self.X[idx], self.X_hat[idx], self.E[idx], self.u[idx],
                        self.u_hat_d[idx], self.eta_norm[idx], self.eta_changed[idx], self.eps[idx],
                        self.blocked[idx], self.X0[idx], self.f_hat[idx], self.packet_period, self.newton_iterations)


TERM_NAMES = {_kernel.TERM_STATE: "state", _kernel.TERM_OBSERVER: "observer state",
              _kernel.TERM_WEIGHTS: "network weights", _kernel.TERM_CONTROL: "control"}


def run_scenario(cfg: ScenarioConfig, prepared: Prepared | None = None,
                 schedule: DosSchedule | None = None) -> SimTrace:
    """Simulate the platoon; raises ConfigError before stepping and NumericalBlowup on divergence."""
    problems = config_violations(cfg)
    if problems:
        raise ConfigError(problems)
    prep = prepared or prepare(cfg)
    N, n, K = cfg.n_followers, cfg.n, cfg.n_ticks
    h = cfg.packet_period
    if schedule is None:
        schedule = cfg.schedule()
    if schedule is not None:
        if exact(schedule.tick) != exact(h):
            raise ConfigError([Violation("DOS_SCHEDULE", "schedule tick differs from the packet period")])
        blocked = schedule.blocked_mask(N)
        if blocked.shape[0] < K:
            blocked = np.vstack([blocked, np.zeros((K - blocked.shape[0], N), dtype=bool)])
        blocked = blocked[:K]
    else:
        blocked = np.zeros((K, N), dtype=bool)
    blocked = np.ascontiguousarray(blocked)

    tk, vk, pk = cfg.profile.knots()
    X0 = cfg.profile.state(0.0)
    X0 = np.concatenate([X0, np.zeros(max(0, n - 3))])[:n]
    X = np.array([X0 + (p.index) * cfg.gains.D0 + cfg.initial_offset for p in cfg.agents])
    Xh = X + cfg.observer_offset
    eta = np.zeros((N, n, cfg.neural.m))
    noise = cfg.disturbance.noise_table(N, K, h)
    dkind = {"zero": 0, "sinusoid": 1, "filtered-noise": 1}[cfg.disturbance.kind]

    outX = np.zeros((K, N, n))
    outXh = np.zeros((K, N, n))
    outE = np.zeros((K, N, n))
    outU = np.zeros((K, N))
    outUd = np.zeros((K, N, n))
    outEtaN = np.zeros((K, N))
    outEtaChg = np.zeros((K, N), dtype=np.bool_)
    outEps = np.zeros((K, N), dtype=np.int64)
    outX0 = np.zeros((K, n))
    outFh = np.zeros((K, N))
    status = np.zeros(4, dtype=np.int64)
    adj = cfg.topology.adjacency.astype(float)

    iters = _kernel.simulate(
        h, cfg.substeps, K, adj, prep.A, prep.A0, prep.B, prep.P, prep.Minv,
        cfg.gains.K_u, cfg.K_o, cfg.gains.K_C, cfg.neural.K_eta, cfg.gains.rho, cfg.gains.D0,
        np.ascontiguousarray(cfg.neural.centers), np.ascontiguousarray(cfg.neural.scales),
        prep.kdrag, prep.kconst, dkind, cfg.disturbance.ratio, cfg.disturbance.frequency, prep.omega, noise,
        tk, vk, pk, blocked, cfg.input_mechanism == "zero", cfg.detection_window,
        X, Xh, eta,
        outX, outXh, outE, outU, outUd, outEtaN, outEtaChg, outEps, outX0, outFh, status)
    if status[0] != _kernel.OK:
        k, i, term = int(status[1]), int(status[2]), int(status[3])
        raise NumericalBlowup((k + 1) * h, i + 1, TERM_NAMES[term])
    ticks = np.arange(K, dtype=np.int64)
    return SimTrace(t=ticks * h, tick=ticks, X=outX, X_hat=outXh, E=outE, u=outU, u_hat_d=outUd,
                    eta_norm=outEtaN, eta_changed=outEtaChg, eps=outEps.astype(np.int8), blocked=blocked,
                    X0=outX0, f_hat=outFh, packet_period=h, newton_iterations=int(iters))
