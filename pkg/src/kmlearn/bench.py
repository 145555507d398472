"""SDR-versus-exhaustive error rate on synthetic fully observed data."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .binary_sdr import MAX_EXHAUSTIVE_D
from .model import ObservationSet
from .trainer import TrainConfig, ikm_step, init_model, run_seeds


@dataclass
class BenchResult:
    D: int
    audited: int
    mismatches: int
    objective_traces: list[list[float]]

    @property
    def rate(self) -> float:
        return self.mismatches / self.audited if self.audited else 0.0


def synthetic_obs(n_users: int, n_items: int, rng: np.random.Generator) -> ObservationSet:
    """Fully observed matrix of i.i.d. Uniform[0, 1] probabilities."""
    return ObservationSet.from_matrix(rng.random((n_users, n_items)))


def sdr_error_rate(
    D: int,
    cfg: TrainConfig | None = None,
    *,
    n_users: int = 20,
    n_items: int = 40,
    runs: int = 5,
    seed: int = 0,
) -> BenchResult:
    """Fraction of indicator subproblems, over all BCD steps of ``runs`` training
    runs, where the SDR candidate is worse than the exhaustive optimum.

    Each run draws its own data matrix and initialization.
    """
    if D > MAX_EXHAUSTIVE_D:
        raise ValueError(f"D={D} too large for the exhaustive oracle (max {MAX_EXHAUSTIVE_D})")
    cfg = replace(cfg or TrainConfig(bcd_iters=10), D=D)
    audited = mismatches = 0
    traces = []
    for s in run_seeds(seed, runs):
        rng = np.random.default_rng(s)
        obs = synthetic_obs(n_users, n_items, rng)
        model = init_model(obs, cfg, s)
        trace = []
        fw_k = None
        for n in range(1, cfg.bcd_iters + 1):
            model, stats = ikm_step(model, obs, cfg, n, run_seed=s, fw_k=fw_k, audit=True)
            fw_k = stats.fw_k
            audited += stats.audited
            mismatches += stats.mismatches
            trace.append(stats.objective)
        traces.append(trace)
    return BenchResult(D, audited, mismatches, traces)
