import json

import numpy as np
import pytest

from rjmlt.errors import InitializationError, InvalidStateError
from rjmlt.psscore import (ChainStats, HistogramAccumulator, PerturbationMix, apply_offset,
                           bootstrap, large_step, mh_acceptance, random_vector, run_chain,
                           small_step)
from rjmlt.rng import Stream


class TestLargeStep:
    def test_range(self):
        u = large_step(Stream(1), 3)
        assert u.shape == (3,) and np.all((u >= 0) & (u < 1))

    def test_deterministic(self):
        assert np.array_equal(large_step(Stream(4), 5), large_step(Stream(4), 5))

    def test_mean_per_dimension(self):
        u = large_step(Stream(2), 3 * 1_000_000).reshape(-1, 3)
        assert np.all(np.abs(u.mean(axis=0) - 0.5) < 0.002)

    def test_rejects_zero_dim(self):
        with pytest.raises(ValueError):
            large_step(Stream(0), 0)


class TestSmallStep:
    def test_forced_offset_no_wrap(self):
        assert apply_offset(np.array([0.5]), 0.3)[0] == pytest.approx(0.8)

    def test_forced_offset_wraps(self):
        assert apply_offset(np.array([0.9]), 0.3)[0] == pytest.approx(0.2)

    def test_mean_displacement_is_zero(self):
        u = np.full(1_000_000, 0.5)
        d = small_step(Stream(7), u) - u
        sigma = d.std() / np.sqrt(d.size)
        assert abs(d.mean()) < 3 * sigma

    def test_offset_magnitudes_within_bounds(self):
        u = np.full(100_000, 0.5)
        d = np.abs(small_step(Stream(8), u, 1 / 64, 1 / 1024) - u)
        assert d.min() >= 1 / 1024 - 1e-15 and d.max() <= 1 / 64 + 1e-15

    def test_symmetric_kernel(self):
        # forward and reverse offset histograms agree when mirrored
        u = np.full(400_000, 0.5)
        d = small_step(Stream(9), u, 0.1, 0.001) - u
        edges = np.linspace(0, 0.1, 21)
        pos, _ = np.histogram(d[d > 0], edges)
        neg, _ = np.histogram(-d[d < 0], edges)
        tol = 5 * np.sqrt(pos + neg + 1)
        assert np.all(np.abs(pos - neg) < tol)

    def test_parameter_check(self):
        with pytest.raises(ValueError):
            small_step(Stream(0), np.array([0.5]), 1 / 1024, 1 / 64)


class TestAcceptance:
    @pytest.mark.parametrize("args,expected", [
        ((1, 2, 1, 1, 1), 1.0), ((2, 1, 1, 1, 1), 0.5), ((1, 0, 1, 1, 1), 0.0)])
    def test_examples(self, args, expected):
        assert mh_acceptance(*args) == pytest.approx(expected)

    def test_zero_current_is_invalid(self):
        with pytest.raises(InvalidStateError):
            mh_acceptance(0.0, 1.0)

    @pytest.mark.parametrize("lam", [1e-6, 0.3, 7.0, 1e8])
    def test_scale_invariant(self, lam):
        assert mh_acceptance(3 * lam, 2 * lam, 1.3, 0.7, 1.1) == pytest.approx(
            mh_acceptance(3, 2, 1.3, 0.7, 1.1), rel=1e-12)


class TestMix:
    def test_defaults(self):
        assert PerturbationMix().as_array().tolist() == [0.1, 0.85, 0.05]

    def test_parse(self):
        assert PerturbationMix.parse("0.2,0.8,0") == PerturbationMix(0.2, 0.8, 0.0)

    @pytest.mark.parametrize("bad", ["0.5,0.5,0.5", "-0.1,1.1,0", "1,0"])
    def test_invalid(self, bad):
        with pytest.raises(ValueError):
            PerturbationMix.parse(bad)


def test_random_vector_validation():
    assert random_vector([0.0, 0.5]).tolist() == [0.0, 0.5]
    with pytest.raises(ValueError):
        random_vector([1.0])


class TestRunChain:
    def test_constant_target_accepts_everything(self):
        acc = HistogramAccumulator(10)
        stats = run_chain(lambda u: 1.0, PerturbationMix(0.0, 1.0, 0.0), 1, seed=0,
                          accumulator=acc, bootstrap_samples=10)
        assert stats.acceptance_rate("small") == 1.0

    def test_deterministic(self):
        a, b = HistogramAccumulator(20), HistogramAccumulator(20)
        target = lambda u: 1.0 + np.sin(6 * u[0])  # noqa: E731
        for acc in (a, b):
            run_chain(target, PerturbationMix(0.1, 0.9, 0.0), 2000, seed=3, accumulator=acc,
                      bootstrap_samples=100)
        assert np.array_equal(a.counts, b.counts)

    def test_splat_mass_is_one_per_step(self):
        acc = HistogramAccumulator(20)
        run_chain(lambda u: u[0] + 0.1, PerturbationMix(0.3, 0.7, 0.0), 500, seed=1,
                  accumulator=acc, bootstrap_samples=100)
        assert acc.total == pytest.approx(500)

    def test_matches_target_histogram(self):
        # linear target 2x: bin masses are (2b+1)/bins^2
        acc = HistogramAccumulator(10)
        run_chain(lambda u: u[0], PerturbationMix(0.2, 0.8, 0.0), 200_000, seed=5,
                  accumulator=acc, bootstrap_samples=1000)
        expected = (2 * np.arange(10) + 1) / 100.0
        assert np.max(np.abs(acc.counts / acc.total - expected)) < 0.01

    def test_zero_target_fails_initialization(self):
        with pytest.raises(InitializationError):
            bootstrap(lambda u: 0.0, 2, Stream(0), 50)

    def test_jump_requires_proposal(self):
        with pytest.raises(ValueError):
            run_chain(lambda u: 1.0, PerturbationMix(), 10, 0, HistogramAccumulator())


def test_chain_stats_json_schema():
    s = ChainStats()
    s.record("small", 0.5, True, length=2)
    s.record("jump", 1.0, True, length=2)
    d = json.loads(s.to_json())
    assert d["2"]["small"] == {"proposed": 1, "accepted": 1, "mean_r": 0.5}
    merged = ChainStats().merge(s).merge(s)
    assert merged.counter("jump", 2).proposed == 2
