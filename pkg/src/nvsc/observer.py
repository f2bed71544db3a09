"""Observer that reconstructs each agent's state and estimates the virtual disturbance."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .controller import NeighborPacket, consensus_vector
from .errors import ConfigError, Violation


@dataclass
class ObserverState:
    X_hat: np.ndarray
    K_o: np.ndarray  # diagonal
    xi: float

    def __post_init__(self):
        self.K_o = np.asarray(self.K_o, dtype=float)
        self.X_hat = np.asarray(self.X_hat, dtype=float)
        if (self.K_o <= 0).any():
            raise ValueError("observer gain diagonal must be positive")
        if self.xi <= 1:
            raise ValueError("xi must exceed 1")


def virtual_disturbance(K_o, P, E_o) -> np.ndarray:
    """Observer estimate -K_o tanh(P E_o), bounded componentwise by K_o."""
    return -np.asarray(K_o, dtype=float) * np.tanh(np.asarray(P) @ np.asarray(E_o, dtype=float))


def observer_derivative(X_hat, A, B, B_f, P, E_i, neighbors: list[NeighborPacket], K_C, u_bar, u_hat_d,
                        f_hat_at_x_hat: float) -> np.ndarray:
    """Right-hand side of the observer with the learned nonlinearity at the estimated state."""
    X_hat = np.asarray(X_hat, dtype=float)
    B = np.asarray(B, dtype=float)
    if X_hat.shape != B.shape:
        raise ValueError("state and input column dimensions differ")
    BBt = np.outer(B, B)
    c = consensus_vector(P, E_i, neighbors, K_C)
    u_hat_d = np.asarray(u_hat_d, dtype=float)
    return (np.asarray(A) @ X_hat + BBt @ c + BBt @ u_hat_d + np.asarray(u_bar) - u_hat_d
            + np.asarray(B_f) * f_hat_at_x_hat)


def implicit_step(X_hat, X_next, A, P, K_o, drive, dt: float, live: bool = True,
                  tol: float = 1e-10, max_iter: int = 200) -> tuple[np.ndarray, int]:
    """Backward-Euler step of y' = A y + drive + K_o tanh(P (X - y)).

    ``drive`` collects every term frozen over the step.  With ``live`` false the
    disturbance estimate is held (already inside ``drive``) and the step is linear.
    Newton iterations use a halving line search on the residual norm.
    """
    X_hat = np.asarray(X_hat, dtype=float)
    A = np.asarray(A, dtype=float)
    n = X_hat.size
    I = np.eye(n)
    if not live:
        return np.linalg.solve(I - dt * A, X_hat + dt * np.asarray(drive)), 0
    K_o = np.asarray(K_o, dtype=float)
    P = np.asarray(P, dtype=float)

    def residual(y):
        z = np.tanh(P @ (X_next - y))
        return y - X_hat - dt * (A @ y + drive + K_o * z), z

    y = X_hat.copy()
    R, z = residual(y)
    nr = np.linalg.norm(R)
    it = 0
    while nr >= tol and it < max_iter:
        J = I - dt * A + dt * (K_o * (1 - z * z))[:, None] * P
        dy = np.linalg.solve(J, R)
        lam = 1.0
        for _ in range(60):
            y_new = y - lam * dy
            R_new, z_new = residual(y_new)
            nr_new = np.linalg.norm(R_new)
            if nr_new <= nr * (1 - 1e-4 * lam):
                break
            lam *= 0.5
        y, R, z, nr = y_new, R_new, z_new, nr_new
        it += 1
    return y, it


@dataclass(frozen=True)
class GainCheck:
    ok: bool
    margin: float


def check_gain_condition(K_o, xi: float, sigma_d_star: float, eta_star: float) -> GainCheck:
    """min_n K_o,n > xi (sigma_d* + 2 eta*); margin is the difference."""
    if xi <= 1:
        raise ConfigError([Violation("XI_NOT_GT_ONE", f"xi must exceed 1, got {xi}")])
    margin = float(np.min(np.abs(np.asarray(K_o, dtype=float)))) - xi * (sigma_d_star + 2 * eta_star)
    return GainCheck(margin > 0, margin)


def residual_level(sigma_d_star: float, eta_star: float, xi: float) -> float:
    """2 (sigma_d* + 2 eta*) (1 + xi) atanh(1/xi): the steady level driving the observer envelope."""
    return 2.0 * (sigma_d_star + 2.0 * eta_star) * (1.0 + xi) * math.atanh(1.0 / xi)
