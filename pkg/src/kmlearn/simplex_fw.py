"""Frank-Wolfe solver for the simplex-constrained PMF refinement QP.

Minimizes ``f(theta) = theta' (Q + lam I) theta - 2 theta' r`` over the unit
probability simplex.  The linear subproblem over the simplex is solved by a
coordinate argmin, so each iteration costs O(D) once the gradient is
maintained incrementally.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .model import NEG_TOL, SUM_TOL


@dataclass(frozen=True)
class SimplexQpProblem:
    Q: np.ndarray
    r: np.ndarray
    lam: float = 0.0

    def __post_init__(self):
        Q = np.ascontiguousarray(self.Q, dtype=np.float64)
        r = np.ascontiguousarray(self.r, dtype=np.float64)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1] or r.shape != (Q.shape[0],):
            raise ValueError(f"shape mismatch: Q {Q.shape}, r {r.shape}")
        if np.max(np.abs(Q - Q.T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(Q), initial=0.0)):
            raise ValueError("Q must be symmetric")
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "r", r)

    @property
    def D(self) -> int:
        return len(self.r)

    @property
    def Q_reg(self) -> np.ndarray:
        return self.Q + self.lam * np.eye(self.D)

    def value(self, theta: np.ndarray) -> float:
        theta = self._check(theta)
        return float(theta @ self.Q_reg @ theta - 2.0 * theta @ self.r)

    def _check(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (self.D,):
            raise ValueError(f"dimension mismatch: theta {theta.shape}, problem D={self.D}")
        return theta


@dataclass(frozen=True)
class FwConfig:
    """Stopping rules: step norm ``<= epsilon`` or ``max_iters`` iterations.

    ``gap_tol > 0`` additionally stops once the duality-gap certificate of
    the current iterate is at most ``gap_tol``.
    """

    epsilon: float = 1e-7
    max_iters: int = 500
    gap_tol: float = 0.0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.gap_tol < 0:
            raise ValueError("gap_tol must be >= 0")


@dataclass(frozen=True)
class FwResult:
    theta: np.ndarray
    iters: int
    k: int  # schedule position reached; pass as ``k0`` to resume
    gap: float
    value: float
    accepted: bool  # False when the warm start was kept


def lp_on_simplex(c) -> int:
    """Vertex index (0-based) minimizing ``c' x`` over the simplex; lowest index on ties."""
    c = np.asarray(c, dtype=np.float64)
    if c.ndim != 1 or c.size == 0:
        raise ValueError("c must be a non-empty vector")
    return int(np.argmin(c))


def fw_gradient(problem: SimplexQpProblem, theta) -> np.ndarray:
    theta = problem._check(theta)
    return 2.0 * (problem.Q_reg @ theta) - 2.0 * problem.r


def fw_gap(problem: SimplexQpProblem, theta) -> float:
    """Frank-Wolfe duality gap ``grad' (theta - e_j*)``; upper-bounds ``f(theta) - f*``."""
    g = fw_gradient(problem, theta)
    return float(g @ theta - g[lp_on_simplex(g)])


def check_pmf(theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=np.float64)
    if theta.ndim != 1 or theta.size == 0:
        raise ValueError("theta must be a non-empty vector")
    if np.any(theta < -NEG_TOL) or abs(theta.sum() - 1.0) > SUM_TOL:
        raise ValueError("theta is not on the probability simplex")
    return theta


@numba.njit(cache=True, nogil=True)
def _fw_kernel(Qr, r, theta, eps, k0, max_iters, gap_tol):
    D = theta.shape[0]
    h = Qr @ theta
    g = np.empty(D)
    for d in range(D):
        g[d] = 2.0 * (h[d] - r[d])
    eps2 = eps * eps
    for k in range(k0 + 1, k0 + max_iters + 1):
        j = 0
        for d in range(1, D):
            if g[d] < g[j]:
                j = d
        if gap_tol > 0.0:
            gap = -g[j]
            for d in range(D):
                gap += g[d] * theta[d]
            if gap <= gap_tol:
                return k - 1
        a = 2.0 / (k + 2.0)
        b = 1.0 - a
        step2 = (1.0 - theta[j]) * (1.0 - theta[j]) - theta[j] * theta[j]
        for d in range(D):
            t = theta[d]
            step2 += t * t
            theta[d] = b * t
            h[d] = b * h[d] + a * Qr[d, j]
            g[d] = 2.0 * (h[d] - r[d])
        theta[j] += a
        if k & 1023 == 0:
            h = Qr @ theta
            for d in range(D):
                g[d] = 2.0 * (h[d] - r[d])
        if a * a * step2 <= eps2:
            return k
    return k0 + max_iters


def frank_wolfe(problem: SimplexQpProblem, theta0, cfg: FwConfig = FwConfig(), k0: int = 0) -> FwResult:
    """Run Frank-Wolfe from ``theta0`` with step ``2 / (k + 2)``, ``k = k0 + 1, k0 + 2, ...``.

    ``k0 > 0`` resumes an earlier run on the same problem whose last iterate
    was ``theta0``.  The returned point never has a larger objective than
    ``theta0``: if the last iterate is worse, the warm start is returned.
    """
    theta0 = check_pmf(problem._check(theta0))
    if k0 < 0:
        raise ValueError("k0 must be >= 0")
    theta = np.ascontiguousarray(theta0.copy())
    Qr = problem.Q_reg
    k = _fw_kernel(Qr, problem.r, theta, cfg.epsilon, int(k0), cfg.max_iters, cfg.gap_tol)
    f0 = float(theta0 @ Qr @ theta0 - 2.0 * theta0 @ problem.r)
    f1 = float(theta @ Qr @ theta - 2.0 * theta @ problem.r)
    accepted = f1 <= f0
    if not accepted:
        theta, f1 = theta0.copy(), f0
    g = 2.0 * (Qr @ theta) - 2.0 * problem.r
    gap = float(g @ theta - g.min())
    return FwResult(theta, int(k - k0), int(k), gap, f1, bool(accepted))


def solve_simplex_qp(problem: SimplexQpProblem, theta0, cfg: FwConfig = FwConfig()) -> np.ndarray:
    return frank_wolfe(problem, theta0, cfg).theta
