"""Continuous-time algebraic Riccati solver for PA + A'P - PGP + psi I = 0."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import NoStabilizingSolution, UncertifiedSolution


@dataclass(frozen=True)
class RiccatiProblem:
    A: np.ndarray
    G: np.ndarray
    psi: float

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        G = np.atleast_2d(np.asarray(self.G, dtype=float))
        if A.shape[0] != A.shape[1] or G.shape != A.shape:
            raise ValueError("A and G must be square matrices of equal size")
        if self.psi <= 0:
            raise ValueError("psi must be positive")
        if not np.allclose(G, G.T, atol=1e-12 * max(1.0, np.abs(G).max())):
            raise ValueError("G must be symmetric")
        if np.linalg.eigvalsh(G).min() < -1e-10 * max(1.0, np.abs(G).max()):
            raise ValueError("G must be positive semidefinite")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "G", G)


@dataclass(frozen=True)
class RiccatiSolution:
    P: np.ndarray
    residual_norm: float


def are_residual(P, prob: RiccatiProblem) -> float:
    """Frobenius norm of PA + A'P - PGP + psi I."""
    P = np.atleast_2d(np.asarray(P, dtype=float))
    if P.shape != prob.A.shape:
        raise ValueError("P does not match the problem dimension")
    R = P @ prob.A + prob.A.T @ P - P @ prob.G @ P + prob.psi * np.eye(P.shape[0])
    return float(np.linalg.norm(R, "fro"))


def is_stabilizable(A: np.ndarray, G: np.ndarray, tol: float = 1e-9) -> bool:
    """PBH test on every eigenvalue with non-negative real part."""
    n = A.shape[0]
    scale = max(1.0, np.abs(A).max(), np.abs(G).max())
    for lam in np.linalg.eigvals(A):
        if lam.real < -tol * scale:
            continue
        M = np.hstack([A - lam * np.eye(n), G])
        s = np.linalg.svd(M, compute_uv=False)
        if s[n - 1] <= tol * scale:
            return False
    return True


def _schur_solution(prob: RiccatiProblem) -> np.ndarray:
    n = prob.A.shape[0]
    H = np.block([[prob.A, -prob.G], [-prob.psi * np.eye(n), -prob.A.T]])
    scale = max(1.0, np.abs(H).max())
    _, Z, sdim = sla.schur(H / scale, sort="lhp")
    if sdim != n:
        raise NoStabilizingSolution("Hamiltonian has eigenvalues on the imaginary axis")
    U1, U2 = Z[:n, :n], Z[n:, :n]
    if np.linalg.cond(U1) > 1e14:
        raise NoStabilizingSolution("stable invariant subspace is not a graph")
    P = np.linalg.solve(U1.T, U2.T).T
    return 0.5 * (P + P.T)


def _newton_kleinman(P: np.ndarray, prob: RiccatiProblem, iters: int = 30) -> np.ndarray:
    """Newton steps in residual-correction form; keeps the best iterate seen."""
    A, G, n = prob.A, prob.G, prob.A.shape[0]
    best, best_res = P, are_residual(P, prob)
    stalls = 0
    for _ in range(iters):
        Acl = A - G @ P
        if np.linalg.eigvals(Acl).real.max() >= 0:
            break
        R = P @ A + A.T @ P - P @ G @ P + prob.psi * np.eye(n)
        dP = sla.solve_continuous_lyapunov(Acl.T, -R)
        P = P + 0.5 * (dP + dP.T)
        res = are_residual(P, prob)
        if res < best_res:
            stalls = 0 if res < 0.5 * best_res else stalls + 1
            best, best_res = P, res
        else:
            stalls += 1
        if stalls >= 3:
            break
    return best


def solve_are(prob: RiccatiProblem, tol: float = 1e-9) -> RiccatiSolution:
    if not is_stabilizable(prob.A, prob.G):
        raise NoStabilizingSolution("(A, G) is not stabilizable")
    P = _newton_kleinman(_schur_solution(prob), prob)
    res = are_residual(P, prob)
    if np.linalg.eigvalsh(P).min() <= 0:
        raise NoStabilizingSolution("solution is not positive definite")
    if res > tol:
        raise UncertifiedSolution(f"residual {res:.3e} exceeds {tol:.1e}")
    return RiccatiSolution(P=P, residual_norm=res)
