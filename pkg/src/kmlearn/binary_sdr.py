"""Binary QP ``min_{psi in {0,1}^D} psi' S psi - 2 (v - mu/2)' psi``.

Solved approximately by homogenizing to a +-1 quadratic form, relaxing to a
unit-diagonal SDP and rounding with random Gaussian hyperplanes, or exactly
by enumeration for small D.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numba
import numpy as np

from .sdp_mixing import SdpConfig, GramFactor, solve_sdp

MAX_EXHAUSTIVE_D = 24

Mode = Literal["sdr", "exhaustive"]


@dataclass(frozen=True)
class BinaryQpProblem:
    S: np.ndarray
    v: np.ndarray
    mu: float = 0.0

    def __post_init__(self):
        S = np.ascontiguousarray(self.S, dtype=np.float64)
        v = np.ascontiguousarray(self.v, dtype=np.float64)
        if S.ndim != 2 or S.shape[0] != S.shape[1] or v.shape != (S.shape[0],):
            raise ValueError(f"shape mismatch: S {S.shape}, v {v.shape}")
        if np.max(np.abs(S - S.T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(S), initial=0.0)):
            raise ValueError("S must be symmetric")
        if self.mu < 0:
            raise ValueError("mu must be >= 0")
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "v", v)

    @property
    def D(self) -> int:
        return len(self.v)

    @property
    def v_eff(self) -> np.ndarray:
        """Linear term with the l1 penalty folded in."""
        return self.v - 0.5 * self.mu


@dataclass(frozen=True)
class HomogenizedProblem:
    """``g(psi) = x' S_tilde x + offset`` for ``x = [2 psi - 1; 1]``."""

    S_tilde: np.ndarray
    offset: float


@dataclass(frozen=True)
class SdrConfig:
    m_rnd: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.m_rnd < 1:
            raise ValueError("m_rnd must be >= 1")


def _check_psi(problem: BinaryQpProblem, psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=np.float64)
    if psi.shape != (problem.D,):
        raise ValueError(f"dimension mismatch: psi {psi.shape}, problem D={problem.D}")
    return psi


def g_value(problem: BinaryQpProblem, psi) -> float:
    psi = _check_psi(problem, psi)
    return float(psi @ problem.S @ psi - 2.0 * problem.v_eff @ psi)


def homogenize(problem: BinaryQpProblem) -> HomogenizedProblem:
    S, w = problem.S, problem.v_eff
    D = problem.D
    t = w - 0.5 * S.sum(axis=1)
    St = np.zeros((D + 1, D + 1))
    St[:D, :D] = 0.25 * S
    St[:D, D] = -0.5 * t
    St[D, :D] = -0.5 * t
    offset = 0.25 * S.sum() - w.sum()
    return HomogenizedProblem(St, float(offset))


@numba.njit(cache=True, nogil=True)
def _enumerate(S, w):
    # lexicographic order over psi (psi[0] most significant); amortized O(D) per step
    D = w.shape[0]
    psi = np.zeros(D)
    Spsi = np.zeros(D)
    val = 0.0
    best = 0.0
    best_psi = np.zeros(D)
    total = 1 << D
    for _ in range(1, total):
        d = D - 1
        while psi[d] == 1.0:
            val += -2.0 * Spsi[d] + S[d, d] + 2.0 * w[d]
            for e in range(D):
                Spsi[e] -= S[e, d]
            psi[d] = 0.0
            d -= 1
        val += 2.0 * Spsi[d] + S[d, d] - 2.0 * w[d]
        for e in range(D):
            Spsi[e] += S[e, d]
        psi[d] = 1.0
        if val < best - 1e-12 * (1.0 + abs(best)):
            best = val
            best_psi[:] = psi
    return best_psi


def solve_binary_exhaustive(problem: BinaryQpProblem) -> tuple[np.ndarray, float]:
    """Global minimizer by enumeration; the lexicographically smallest one on ties."""
    if problem.D > MAX_EXHAUSTIVE_D:
        raise ValueError(f"D={problem.D} too large for exhaustive search (max {MAX_EXHAUSTIVE_D})")
    psi = _enumerate(problem.S, problem.v_eff)
    return psi, g_value(problem, psi)


def dehomogenize(x: np.ndarray) -> np.ndarray:
    """Map a +-1 vector ``[z; w]`` to ``psi = (z w + 1) / 2``."""
    z = x[:-1] * x[-1]
    return (z + 1.0) / 2.0


def randomized_rounding(
    V: GramFactor | np.ndarray,
    h: HomogenizedProblem,
    cfg: SdrConfig = SdrConfig(),
    *,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Best of ``cfg.m_rnd`` Gaussian-hyperplane roundings of the factor ``V``.

    Each draw ``u`` gives ``x = sign(V' u)`` (zero mapped to +1); the draw with
    the smallest ``x' S_tilde x`` is kept and de-homogenized.
    """
    V = V.V if isinstance(V, GramFactor) else np.asarray(V, dtype=np.float64)
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    U = rng.standard_normal((V.shape[0], cfg.m_rnd))
    X = np.where(V.T @ U >= 0.0, 1.0, -1.0)
    vals = np.einsum("km,km->m", X, h.S_tilde @ X)
    return dehomogenize(X[:, int(np.argmin(vals))])


def sdr_candidate(
    problem: BinaryQpProblem,
    cfg: SdrConfig = SdrConfig(),
    sdp: SdpConfig = SdpConfig(),
    *,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Homogenize, solve the relaxation and round."""
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    h = homogenize(problem)
    factor = solve_sdp(h.S_tilde, sdp, rng=rng)
    return randomized_rounding(factor, h, cfg, rng=rng)


@dataclass(frozen=True)
class RefineResult:
    psi: np.ndarray
    value: float
    candidate_value: float
    accepted: bool


def refine(
    problem: BinaryQpProblem,
    psi_prev,
    cfg: SdrConfig = SdrConfig(),
    mode: Mode = "sdr",
    sdp: SdpConfig = SdpConfig(),
    *,
    rng: np.random.Generator | None = None,
) -> RefineResult:
    """Guarded update: the candidate replaces ``psi_prev`` only if it is no worse."""
    psi_prev = _check_psi(problem, psi_prev)
    if mode == "exhaustive":
        cand, cval = solve_binary_exhaustive(problem)
    elif mode == "sdr":
        cand = sdr_candidate(problem, cfg, sdp, rng=rng)
        cval = g_value(problem, cand)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    prev = g_value(problem, psi_prev)
    if cval <= prev:
        return RefineResult(cand, cval, cval, True)
    return RefineResult(psi_prev.copy(), prev, cval, False)


def refine_indicator(
    problem: BinaryQpProblem,
    psi_prev,
    cfg: SdrConfig = SdrConfig(),
    mode: Mode = "sdr",
    sdp: SdpConfig = SdpConfig(),
    *,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    return refine(problem, psi_prev, cfg, mode, sdp, rng=rng).psi
