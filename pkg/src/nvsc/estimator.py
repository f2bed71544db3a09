"""Tanh-feature network that approximates each agent's unknown nonlinearity online."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class NeuralConfig:
    """Feature layout: ``m`` tanh neurons per state channel.

    Neuron k responds to tanh(scales[k] * (x_l - centers[k])).  With ``literal`` set,
    every neuron uses a zero center and unit scale, so all m features of a channel coincide.
    """

    m: int
    n: int
    centers: np.ndarray
    scales: np.ndarray
    K_eta: np.ndarray  # diagonal of the n x n adaptation gain
    K_eta_star: float = float("inf")
    literal: bool = False

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("need at least one neuron per channel")
        centers = np.asarray(self.centers, dtype=float)
        scales = np.asarray(self.scales, dtype=float)
        K_eta = np.asarray(self.K_eta, dtype=float)
        if centers.shape != (self.m,) or scales.shape != (self.m,):
            raise ValueError("centers and scales need one entry per neuron")
        if (scales <= 0).any():
            raise ValueError("neuron scales must be positive")
        if K_eta.shape != (self.n,):
            raise ValueError("K_eta needs one diagonal entry per state channel")
        if (K_eta <= 0).any():
            raise ValueError("K_eta must be positive definite (zero diagonal is singular)")
        if K_eta.max() > self.K_eta_star:
            warnings.warn(f"adaptation gain norm {K_eta.max():g} exceeds the design cap {self.K_eta_star:g}",
                          stacklevel=2)
        for name, arr in (("centers", centers), ("scales", scales), ("K_eta", K_eta)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def evenly_spaced(cls, m: int, n: int, low: float, high: float, K_eta, scale: float = 1.0,
                      literal: bool = False, K_eta_star: float = float("inf")) -> "NeuralConfig":
        if literal:
            centers, scales = np.zeros(m), np.ones(m)
        else:
            centers = np.linspace(low, high, m) if m > 1 else np.array([0.5 * (low + high)])
            scales = np.full(m, float(scale))
        K = np.broadcast_to(np.asarray(K_eta, dtype=float), (n,)).copy()
        return cls(m=m, n=n, centers=centers, scales=scales, K_eta=K, K_eta_star=K_eta_star, literal=literal)


@dataclass(frozen=True)
class NeuralState:
    eta_hat: np.ndarray  # n x m
    frozen: bool = False

    @classmethod
    def zeros(cls, cfg: NeuralConfig) -> "NeuralState":
        return cls(np.zeros((cfg.n, cfg.m)))


def activations(cfg: NeuralConfig, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.shape != (cfg.n,):
        raise ValueError(f"state has shape {X.shape}, expected ({cfg.n},)")
    return np.tanh(cfg.scales[None, :] * (X[:, None] - cfg.centers[None, :]))


def estimate(st: NeuralState, phi: np.ndarray) -> float:
    if st.eta_hat.shape != np.shape(phi):
        raise ValueError("weight and activation shapes differ")
    return float(np.sum(st.eta_hat * phi))


def adaptation_rate(st: NeuralState, cfg: NeuralConfig, phi: np.ndarray, E, P, B_f,
                    frozen: bool | None = None) -> np.ndarray:
    """d(eta_hat)/dt = K_eta^{-1} phi (E' P B_f); identically zero while frozen."""
    if frozen if frozen is not None else st.frozen:
        return np.zeros_like(st.eta_hat)
    s = float(np.asarray(E) @ np.asarray(P) @ np.asarray(B_f))
    return (phi / cfg.K_eta[:, None]) * s


def adapt_step(st: NeuralState, cfg: NeuralConfig, phi, E, P, B_f, dt: float,
               frozen: bool = False) -> NeuralState:
    """Single explicit step of the adaptive law; a frozen state is returned unchanged."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if frozen:
        return NeuralState(st.eta_hat, frozen=True)
    rate = adaptation_rate(st, cfg, phi, E, P, B_f, frozen=False)
    return NeuralState(st.eta_hat + dt * rate, frozen=False)
