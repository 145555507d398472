"""Unit-diagonal SDP ``min tr(S X) s.t. X >= 0, diag(X) = 1`` via a low-rank factor.

``X = V' V`` with unit-norm columns of ``V``.  Each column is updated in turn
to its exact minimizer on the sphere, ``v_k = -g_k / |g_k|`` with
``g_k = sum_{j != k} S_kj v_j``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np


@dataclass(frozen=True)
class SdpConfig:
    """``rank=None`` picks ``ceil(sqrt(2n)) + 1`` for an ``n x n`` problem."""

    rank: int | None = None
    tol: float = 1e-9
    max_sweeps: int = 2000

    def __post_init__(self):
        if self.rank is not None and self.rank < 2:
            raise ValueError("rank must be >= 2")
        if not self.tol > 0:
            raise ValueError("tol must be > 0")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be >= 1")

    def rank_for(self, n: int) -> int:
        return self.rank if self.rank is not None else default_rank(n)


def default_rank(n: int) -> int:
    return math.ceil(math.sqrt(2 * n)) + 1


@dataclass
class GramFactor:
    """``V`` is ``rank x n``; column ``k`` is the vector of variable ``k``."""

    V: np.ndarray
    sweeps: int = 0

    @property
    def rank(self) -> int:
        return self.V.shape[0]

    @property
    def n(self) -> int:
        return self.V.shape[1]

    def gram(self) -> np.ndarray:
        return self.V.T @ self.V


def _check_sym(S) -> np.ndarray:
    S = np.ascontiguousarray(S, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError(f"S must be square, got {S.shape}")
    if np.max(np.abs(S - S.T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(S), initial=0.0)):
        raise ValueError("S must be symmetric")
    return S


def sdp_objective(S, V) -> float:
    """``tr(S V'V)``."""
    V = V.V if isinstance(V, GramFactor) else V
    return float(np.sum(S * (V.T @ V)))


def random_factor(n: int, rank: int, rng: np.random.Generator) -> np.ndarray:
    V = rng.standard_normal((rank, n))
    V /= np.linalg.norm(V, axis=0)
    return V


def row_update(V, S, k: int) -> np.ndarray:
    """New value of column ``k``: the minimizer of the objective in ``v_k`` alone.

    Returns the unchanged column when the local field ``g_k`` vanishes.
    """
    V = V.V if isinstance(V, GramFactor) else np.asarray(V, dtype=np.float64)
    S = np.asarray(S, dtype=np.float64)
    if not 0 <= k < V.shape[1]:
        raise IndexError(f"column {k} out of range")
    g = V @ S[:, k] - S[k, k] * V[:, k]
    norm = np.linalg.norm(g)
    if norm <= 1e-12:
        return V[:, k].copy()
    return -g / norm


@numba.njit(cache=True, nogil=True)
def _objective(S, V):
    n = S.shape[0]
    r = V.shape[0]
    total = 0.0
    for a in range(n):
        for b in range(n):
            s = S[a, b]
            if s != 0.0:
                dot = 0.0
                for t in range(r):
                    dot += V[t, a] * V[t, b]
                total += s * dot
    return total


@numba.njit(cache=True, nogil=True)
def _mixing_kernel(S, V, tol, max_sweeps):
    n = S.shape[0]
    r = V.shape[0]
    g = np.empty(r)
    prev = _objective(S, V)
    sweeps = 0
    for it in range(max_sweeps):
        for k in range(n):
            for t in range(r):
                g[t] = 0.0
            for j in range(n):
                s = S[k, j]
                if j != k and s != 0.0:
                    for t in range(r):
                        g[t] += s * V[t, j]
            norm = 0.0
            for t in range(r):
                norm += g[t] * g[t]
            norm = np.sqrt(norm)
            if norm > 1e-12:
                for t in range(r):
                    V[t, k] = -g[t] / norm
        sweeps = it + 1
        cur = _objective(S, V)
        if prev - cur < tol * (1.0 + abs(prev)):
            break
        prev = cur
    return sweeps


def solve_sdp(S_tilde, cfg: SdpConfig = SdpConfig(), seed=None, *, rng: np.random.Generator | None = None) -> GramFactor:
    """Solve the unit-diagonal SDP relaxation of ``min x' S x, x in {-1, 1}^n``.

    Columns start on the unit sphere (normalized Gaussians from ``rng`` or
    ``seed``) and are swept in ascending order until a sweep lowers the
    objective by less than ``tol`` relative, or ``max_sweeps`` is reached.
    """
    S = _check_sym(S_tilde)
    if rng is None:
        rng = np.random.default_rng(seed)
    n = S.shape[0]
    V = np.ascontiguousarray(random_factor(n, cfg.rank_for(n), rng))
    sweeps = _mixing_kernel(S, V, cfg.tol, cfg.max_sweeps)
    # renormalize away round-off drift
    V /= np.linalg.norm(V, axis=0)
    return GramFactor(V, int(sweeps))
