import numpy as np
import pytest

from kmlearn.bench import sdr_error_rate, synthetic_obs
from kmlearn.simplex_fw import FwConfig
from kmlearn.trainer import TrainConfig


class TestSyntheticSetup:
    def test_fully_observed_uniform(self):
        obs = synthetic_obs(20, 40, np.random.default_rng(0))
        assert (obs.n_users, obs.n_items, len(obs)) == (20, 40, 800)
        assert 0 <= obs.p.min() and obs.p.max() <= 1


class TestErrorRate:
    def test_exhaustive_is_exact(self):
        res = sdr_error_rate(4, TrainConfig(bcd_iters=3, q2_mode="exhaustive"), runs=2)
        assert res.audited == 2 * 3 * 40
        assert res.mismatches == 0 and res.rate == 0.0

    def test_counts_and_traces(self):
        res = sdr_error_rate(3, TrainConfig(bcd_iters=4), n_users=6, n_items=9, runs=3)
        assert res.audited == 3 * 4 * 9
        assert 0 <= res.mismatches <= res.audited
        assert len(res.objective_traces) == 3
        for t in res.objective_traces:
            assert np.all(np.diff(t) <= 1e-9)

    def test_deterministic(self):
        cfg = TrainConfig(bcd_iters=2, fw=FwConfig(max_iters=50))
        a = sdr_error_rate(5, cfg, runs=2, seed=3)
        b = sdr_error_rate(5, cfg, runs=2, seed=3)
        assert (a.mismatches, a.objective_traces) == (b.mismatches, b.objective_traces)

    def test_dimension_limit(self):
        with pytest.raises(ValueError, match="too large"):
            sdr_error_rate(25, runs=1)
