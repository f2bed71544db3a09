"""Follower and leader dynamics for chain-of-integrator agents and the CAV longitudinal model."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

AIR_DENSITY = 1.225
GRAVITY = 9.81


@dataclass(frozen=True)
class VehicleParams:
    """Longitudinal resistance and spacing constants of one vehicle."""

    drag_coeff: float
    frontal_area: float
    rolling_coeff: float
    grade_angle: float  # rad
    min_gap: float = 5.0
    headway: float = 1.2
    standstill_gap: float = 7.0


@dataclass(frozen=True)
class AgentParams:
    """Physical and bound constants of one follower.

    ``a`` and ``b`` describe a generic agent whose last matrix row is ``a`` and
    whose input gain is ``b``; they are ignored when ``vehicle`` is set.
    """

    index: int
    tau: float = 1.0
    mass: float = 1.0
    a: float = 0.0
    b: float = 1.0
    omega_star: float = 1.0
    eta_star: float = 5.0
    eps_star: float = 1.0
    sigma_d_star: float = 10.0
    u_d_star: float = 10.0
    vehicle: VehicleParams | None = None

    def __post_init__(self):
        if self.tau <= 0 or self.mass <= 0:
            raise ValueError("tau and mass must be positive")
        for name in ("omega_star", "eta_star", "eps_star", "sigma_d_star", "u_d_star"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class SystemMatrices:
    A: np.ndarray
    B: np.ndarray
    B_f: np.ndarray
    B_w: np.ndarray
    C: np.ndarray

    @property
    def n(self) -> int:
        return self.A.shape[0]


def chain_matrix(n: int, last: float) -> np.ndarray:
    """Integrator chain whose bottom-right entry is ``last``."""
    A = np.diag(np.ones(n - 1), 1)
    A[-1, -1] = last
    return A


def unit_column(n: int) -> np.ndarray:
    e = np.zeros(n)
    e[-1] = 1.0
    return e


def input_gain(p: AgentParams, mode: str) -> float:
    """Last entry of B: ``mass`` uses 1/(m tau), ``drivetrain`` uses 1/tau."""
    if p.vehicle is None:
        return p.b
    if mode == "mass":
        return 1.0 / (p.mass * p.tau)
    if mode == "drivetrain":
        return 1.0 / p.tau
    raise ValueError(f"unknown input-gain mode {mode!r}")


def build_matrices(p: AgentParams, n: int = 3, gain_mode: str = "mass") -> SystemMatrices:
    if n < 2:
        raise ValueError("state dimension must be at least 2")
    last = -1.0 / p.tau if p.vehicle is not None else p.a
    B = unit_column(n) * input_gain(p, gain_mode)
    e = unit_column(n)
    return SystemMatrices(A=chain_matrix(n, last), B=B, B_f=e.copy(), B_w=e.copy(), C=np.eye(n))


def resistance_coefficients(p: AgentParams) -> tuple[float, float]:
    """Return (k_drag, k_const) with f(X) = -(k_drag v^2 + k_const)."""
    veh = p.vehicle
    if veh is None:
        return 0.0, 0.0
    k_drag = 0.5 * AIR_DENSITY * veh.drag_coeff * veh.frontal_area / p.mass
    k_const = GRAVITY * (veh.rolling_coeff * math.cos(veh.grade_angle) + math.sin(veh.grade_angle))
    return k_drag, k_const


def true_nonlinearity(p: AgentParams, X) -> float:
    """Drag, rolling and grade resistance per unit mass (zero for generic agents)."""
    k_drag, k_const = resistance_coefficients(p)
    v = float(np.asarray(X)[1])
    return -(k_drag * v * v + k_const)


def follower_derivative(p: AgentParams, M: SystemMatrices, X, u: float, w: float,
                        nonlinearity=true_nonlinearity) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.shape != (M.n,):
        raise ValueError(f"state has shape {X.shape}, expected ({M.n},)")
    f = nonlinearity(p, X) if nonlinearity is not None else 0.0
    return M.A @ X + M.B * u + M.B_f * f + M.B_w * w


@dataclass(frozen=True)
class LeaderModel:
    A0: np.ndarray
    B_f0: np.ndarray
    f0: object  # callable state -> scalar
    eps0: float = 0.0


def leader_derivative(L: LeaderModel, X0) -> np.ndarray:
    X0 = np.asarray(X0, dtype=float)
    return L.A0 @ X0 + L.B_f0 * L.f0(X0)


def profile_leader(tau0: float, n: int = 3, eps0: float = 0.0) -> LeaderModel:
    """Leader whose f_0 cancels the drivetrain lag, so acceleration stays put between breakpoints."""
    A0 = chain_matrix(n, -1.0 / tau0)
    return LeaderModel(A0=A0, B_f0=unit_column(n), f0=lambda X: -float(A0[-1] @ X), eps0=eps0)


@dataclass(frozen=True)
class LeaderProfile:
    """Piecewise-linear velocity through (times[k], velocities[k]); constant after the last knot."""

    times: tuple[float, ...] = (0.0, 10.0, 15.0, 20.0)
    velocities: tuple[float, ...] = (0.0, 20.0, 20.0, 10.0)
    position0: float = 0.0

    def __post_init__(self):
        if len(self.times) != len(self.velocities) or len(self.times) < 1:
            raise ValueError("profile needs matching, non-empty knot lists")
        if self.times[0] != 0.0:
            raise ValueError("profile must start at t = 0")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("profile knot times must be strictly increasing")

    def knots(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Knot times, velocities and the exactly integrated positions at the knots."""
        tk = np.asarray(self.times, dtype=float)
        vk = np.asarray(self.velocities, dtype=float)
        pk = np.empty_like(tk)
        pk[0] = self.position0
        for k in range(1, tk.size):
            pk[k] = pk[k - 1] + 0.5 * (vk[k - 1] + vk[k]) * (tk[k] - tk[k - 1])
        return tk, vk, pk

    def state(self, t: float) -> np.ndarray:
        tk, vk, pk = self.knots()
        return profile_state(t, tk, vk, pk)

    def velocity_acceleration(self, t: float) -> tuple[float, float]:
        s = self.state(t)
        return float(s[1]), float(s[2])


def profile_state(t, tk, vk, pk) -> np.ndarray:
    """[p, v, a] of the piecewise-linear velocity profile; acceleration is right-continuous."""
    k = int(np.searchsorted(tk, t, side="right")) - 1
    k = max(k, 0)
    if k >= tk.size - 1:
        s = t - tk[-1]
        return np.array([pk[-1] + vk[-1] * s, vk[-1], 0.0])
    slope = (vk[k + 1] - vk[k]) / (tk[k + 1] - tk[k])
    s = t - tk[k]
    return np.array([pk[k] + vk[k] * s + 0.5 * slope * s * s, vk[k] + slope * s, slope])


@dataclass(frozen=True)
class DisturbanceProfile:
    """Bounded acceleration-channel disturbance.

    ``sinusoid`` gives ratio * omega_star * sin(freq t + i); ``filtered-noise`` adds a
    first-order low-passed Gaussian sequence drawn once per packet tick; both are clamped.
    """

    kind: str = "sinusoid"
    ratio: float = 0.8
    frequency: float = 0.5
    noise_std: float = 0.3
    noise_cutoff: float = 2.0  # rad/s
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("sinusoid", "filtered-noise", "zero"):
            raise ValueError(f"unknown disturbance kind {self.kind!r}")

    def noise_table(self, n_agents: int, n_ticks: int, tick: float, seed: int | None = None) -> np.ndarray:
        """Per-tick additive noise, shape (n_ticks, n_agents); zeros unless filtered-noise."""
        table = np.zeros((n_ticks, n_agents))
        if self.kind != "filtered-noise":
            return table
        rng = np.random.default_rng(self.seed if seed is None else seed)
        raw = rng.normal(0.0, self.noise_std, size=(n_ticks, n_agents))
        alpha = 1.0 - math.exp(-self.noise_cutoff * tick)
        acc = np.zeros(n_agents)
        for k in range(n_ticks):
            acc = acc + alpha * (raw[k] - acc)
            table[k] = acc
        return table


def disturbance_value(profile: DisturbanceProfile, omega_star: float, i: int, t: float,
                      noise: float = 0.0) -> float:
    if profile.kind == "zero":
        return 0.0
    w = profile.ratio * omega_star * math.sin(profile.frequency * t + i) + noise
    return min(max(w, -omega_star), omega_star)


def cav_agent(index: int, tau: float, mass: float, drag_coeff: float, frontal_area: float,
              rolling_coeff: float, grade_deg: float = 30.0, min_gap: float = 5.0,
              headway: float = 1.2, standstill_gap: float = 7.0, **bounds) -> AgentParams:
    veh = VehicleParams(drag_coeff, frontal_area, rolling_coeff, math.radians(grade_deg),
                        min_gap, headway, standstill_gap)
    return AgentParams(index=index, tau=tau, mass=mass, vehicle=veh, **bounds)


# Leader first, then followers 1..5.
TABLE_VEHICLES = (
    dict(tau=0.1, mass=1500.0, min_gap=5.0, headway=1.2, frontal_area=2.2, drag_coeff=0.35, rolling_coeff=0.02),
    dict(tau=0.1, mass=1500.0, min_gap=5.0, headway=1.2, frontal_area=2.2, drag_coeff=0.35, rolling_coeff=0.02),
    dict(tau=0.3, mass=2000.0, min_gap=7.0, headway=1.5, frontal_area=4.2, drag_coeff=0.40, rolling_coeff=0.04),
    dict(tau=0.5, mass=2500.0, min_gap=9.0, headway=1.8, frontal_area=6.2, drag_coeff=0.45, rolling_coeff=0.06),
    dict(tau=0.7, mass=3000.0, min_gap=11.0, headway=2.1, frontal_area=8.2, drag_coeff=0.50, rolling_coeff=0.08),
    dict(tau=0.9, mass=3500.0, min_gap=13.0, headway=2.4, frontal_area=10.2, drag_coeff=0.55, rolling_coeff=0.10),
)
