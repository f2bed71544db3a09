"""Neural variable-structure consensus control with hold/zero input switching under DoS."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import Violation


@dataclass(frozen=True)
class ControllerGains:
    K_C: np.ndarray  # diagonal, every entry > 1
    K_u: np.ndarray  # diagonal of the switching gain
    rho: float
    eps_reg: np.ndarray  # diagonal regulariser of B B'
    D0: np.ndarray  # per-step formation offset

    def __post_init__(self):
        for name in ("K_C", "K_u", "eps_reg", "D0"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))

    def violations(self, B_w_norm: float = 1.0, omega_star: float = 0.0, u_d_star: float = 0.0) -> list[Violation]:
        out = []
        if (self.K_C <= 1).any():
            out.append(Violation("KC_NOT_GT_ONE", f"every K_C diagonal must exceed 1, got {self.K_C.tolist()}"))
        if self.rho <= 1:
            out.append(Violation("RHO_NOT_GT_ONE", f"sharpness rho must exceed 1, got {self.rho}"))
        if (self.eps_reg <= 0).any():
            out.append(Violation("EPS_NOT_PD", f"regulariser diagonal must be positive, got {self.eps_reg.tolist()}"))
        need = B_w_norm * omega_star + u_d_star
        if np.abs(self.K_u).max() < need:
            out.append(Violation("KU_TOO_SMALL", f"||K_u|| = {np.abs(self.K_u).max():g} below ||B_w|| w* + u_d* = {need:g}"))
        return out


def error_vector(X_i, X_0, i: int, D0) -> np.ndarray:
    return np.asarray(X_i, dtype=float) - np.asarray(X_0, dtype=float) - i * np.asarray(D0, dtype=float)


def sign_weighted(E, rho: float) -> np.ndarray:
    """Componentwise e * tanh(rho e), an even, non-negative smoothing of |e|."""
    if rho <= 1:
        raise ValueError("rho must exceed 1")
    E = np.asarray(E, dtype=float)
    return E * np.tanh(rho * E)


def regularized_inverse(B, eps_reg) -> np.ndarray:
    """(B B' + eps)^{-1} for a single input column B."""
    B = np.asarray(B, dtype=float)
    return np.linalg.inv(np.outer(B, B) + np.diag(np.asarray(eps_reg, dtype=float)))


@dataclass(frozen=True)
class NeighborPacket:
    """What agent i knows about in-neighbour j: the edge weight and j's tracking error."""

    alpha: float
    E: np.ndarray
    E_bar: np.ndarray


def leader_packet(n: int) -> NeighborPacket:
    z = np.zeros(n)
    return NeighborPacket(1.0, z, z)


def consensus_vector(P, E_i, neighbors: list[NeighborPacket], K_C) -> np.ndarray:
    """State-space consensus correction; the scalar control contribution is B' times this."""
    P = np.asarray(P, dtype=float)
    E_i = np.asarray(E_i, dtype=float)
    D = np.tanh(P @ E_i)
    inner = np.zeros_like(E_i)
    for nb in neighbors:
        inner += nb.alpha * (E_i - D * nb.E) + nb.alpha * np.asarray(K_C) * D * nb.E_bar
    return -0.5 * (P @ inner)


def exogenous_control(f_hat: float, f0_val: float, K_u, P, E_i, A_i, A_0, X_0, i: int, D0,
                      B_f, B_f0) -> np.ndarray:
    K_u = np.asarray(K_u, dtype=float)
    K_u = np.diag(K_u) if K_u.ndim == 1 else K_u
    X_0 = np.asarray(X_0, dtype=float)
    return (-np.asarray(B_f) * f_hat + np.asarray(B_f0) * f0_val
            - K_u @ np.tanh(np.asarray(P) @ np.asarray(E_i, dtype=float))
            - (np.asarray(A_i) - np.asarray(A_0)) @ X_0 - i * (np.asarray(A_i) @ np.asarray(D0)))


def virtual_disturbance_of(u_bar, B, eps_reg) -> np.ndarray:
    """The part of the exogenous control the singular input gain cannot realise."""
    return np.diag(np.asarray(eps_reg, dtype=float)) @ regularized_inverse(B, eps_reg) @ np.asarray(u_bar)


def control_nominal(P, gains: ControllerGains, E_i, neighbors: list[NeighborPacket], u_bar, u_hat_d, B) -> float:
    if not neighbors:
        raise ValueError("control needs at least one neighbour packet")
    B = np.asarray(B, dtype=float)
    c = consensus_vector(P, E_i, neighbors, gains.K_C)
    return float(B @ c + B @ np.asarray(u_hat_d) + B @ regularized_inverse(B, gains.eps_reg) @ np.asarray(u_bar))


@dataclass(frozen=True)
class HeldControl:
    t_k: float
    u_ia_k: float
    u_bar_ia_k: np.ndarray
    u_hat_d_k: np.ndarray
    E_i_k: np.ndarray
    E_oi_k: np.ndarray
    eta_hat_k: np.ndarray


@dataclass
class ControllerState:
    P: np.ndarray
    eta_hat: np.ndarray
    X_hat: np.ndarray
    held: HeldControl | None = None
    attack_flag: int = 0
    last_packet_time: float = 0.0
    last_update: HeldControl | None = field(default=None, repr=False)


def record_update(state: ControllerState, t: float, u: float, u_bar, u_hat_d, E_i, E_o) -> None:
    """Remember the most recent successfully delivered control as the candidate snapshot."""
    state.last_update = HeldControl(t, float(u), np.array(u_bar, dtype=float), np.array(u_hat_d, dtype=float),
                                    np.array(E_i, dtype=float), np.array(E_o, dtype=float),
                                    np.array(state.eta_hat, dtype=float))


def capture_hold(state: ControllerState) -> HeldControl:
    if state.held is not None:
        raise RuntimeError("hold captured twice without release")
    if state.last_update is None:
        raise RuntimeError("no delivered control to hold")
    state.held = state.last_update
    return state.held


def detect_dos(state: ControllerState, t: float, expected_period: float, packet_arrived: bool,
               window: float = 1.5) -> int:
    """Timeout detector: flag an attack once no packet has arrived for window * period.

    Captures the hold snapshot on the 0 -> 1 transition and releases it on the first fresh packet.
    """
    if expected_period <= 0:
        raise ValueError("expected period must be positive")
    if packet_arrived:
        state.last_packet_time = t
        state.attack_flag = 0
        state.held = None
        return 0
    flag = int(t - state.last_packet_time > window * expected_period)
    if flag and not state.attack_flag:
        capture_hold(state)
    state.attack_flag = flag
    return flag


def control_switched(state: ControllerState, u_live: float, mechanism: str = "hold") -> float:
    """Live control when no attack is detected; otherwise the held snapshot or zero."""
    if not state.attack_flag:
        return u_live
    if mechanism == "zero":
        return 0.0
    if mechanism != "hold":
        raise ValueError(f"unknown input mechanism {mechanism!r}")
    return state.held.u_ia_k
