import json
import math

import numpy as np
import pytest

from rjmlt import oned, rjump
from rjmlt.errors import InvalidStateError, NumericError
from rjmlt.lt.bdpt import SceneContext, TechniqueLayout
from rjmlt.psscore import MultiplexedState
from rjmlt.rng import Stream


def scene_states(ctx, n, seed=0):
    """Nonzero states of length ctx.k with the technique drawn uniformly."""
    rng = Stream(seed)
    dim = TechniqueLayout(ctx.k).dims
    out = []
    while len(out) < n:
        i = min(int(rng.uniform() * (ctx.k + 1)), ctx.k)
        s = ctx.evaluate(i, rng.uniforms(dim))
        if s.target_value > 0:
            out.append(s)
    return out


class TestChooseTechnique:
    def test_frequencies(self):
        rng = Stream(1)
        w = np.array([0.2, 0.5, 0.3])
        draws = np.bincount([rjump.choose_proposal_technique(w, rng) for _ in range(30_000)],
                            minlength=3) / 30_000
        assert np.allclose(draws, w, atol=0.015)

    def test_single_nonzero(self):
        rng = Stream(2)
        assert all(rjump.choose_proposal_technique([0, 0, 1, 0], rng) == 2 for _ in range(200))

    def test_all_zero(self):
        with pytest.raises(InvalidStateError):
            rjump.choose_proposal_technique([0.0, 0.0], Stream(0))

    def test_negative(self):
        with pytest.raises(InvalidStateError):
            rjump.choose_proposal_technique([0.5, -0.1], Stream(0))


class TestAcceptance:
    def test_exact_balance_is_one(self):
        assert rjump.rj_acceptance(2.0, 2.0, 0.5, 0.5, 0.25, 0.25) == 1.0

    def test_half(self):
        assert rjump.rj_acceptance(2.0, 1.0, 0.5, 0.5, 0.25, 0.25) == pytest.approx(0.5)

    def test_clamped(self):
        assert rjump.rj_acceptance(1.0, 4.0, 0.5, 0.5, 0.25, 0.25) == 1.0

    def test_ratio_of_all_terms(self):
        r = rjump.rj_acceptance(3.0, 2.0, 0.4, 0.3, 0.5, 0.7, mixture_factor=0.9)
        assert r == pytest.approx(min(1.0, 2.0 * 0.3 * 0.7 / (3.0 * 0.4 * 0.5) * 0.9))

    @pytest.mark.parametrize("bad", [(0.0, 1, 1, 1, 1, 1), (1, 1, 1, 1, 1, math.nan),
                                     (1, 1, 1, 1, 0.0, 1)])
    def test_degenerate_terms(self, bad):
        with pytest.raises(NumericError):
            rjump.rj_acceptance(*bad)


class TestOneD:
    def state(self, u):
        ctx = oned.OneDContext()
        t, _ = oned._forward(np.asarray(u, float))
        return ctx, ctx.evaluate(t, u)

    def test_naive_same_technique_is_identity(self):
        ctx, s = self.state([0.1, 0.3, 0.3])
        prop, a = rjump.naive_technique_perturbation(s, ctx, Stream(0), j=s.technique)
        assert prop is s and a == 1.0

    def test_naive_switch_is_inconsistent_state(self):
        ctx, s = self.state([0.1, 0.3, 0.3])
        prop, a = rjump.naive_technique_perturbation(s, ctx, Stream(0), j=1)
        assert a == 0.0 and prop.target_value == 0.0

    def test_jumps_keep_x_and_accept(self):
        rng = Stream(5)
        for _ in range(3000):
            ctx, s = self.state(rng.uniforms(3))
            if s.target_value <= 0 or not 0 < s.path < 1:
                continue
            nxt, rec = rjump.reversible_jump(s, ctx, rng, debug=True)
            assert rec.verified and rec.acceptance == pytest.approx(1.0, abs=1e-9)
            assert abs(nxt.path - s.path) < 1e-9

    def test_dropped_jacobian_breaks_optimality(self):
        ctx = oned.OneDContext(drop_jacobian=True)
        rs = []
        rng = Stream(6)
        for _ in range(500):
            u = rng.uniforms(3)
            s = ctx.evaluate(oned._forward(u)[0], u)
            if s.target_value > 0 and 0 < s.path < 1:
                rs.append(rjump.reversible_jump(s, ctx, rng)[1].acceptance)
        assert min(rs) < 0.9
    def test_verify_rejects_perturbed_coordinate(self):
        ctx, s = self.state([0.1, 0.3, 0.3])
        v, _, _ = ctx.invert(1, s.path, Stream(1))
        assert rjump.forward_verify(ctx, 1, v, s.path)
        v[1] += 1e-3
        assert not rjump.forward_verify(ctx, 1, v, s.path)

    def test_zero_state_rejected(self):
        ctx = oned.OneDContext()
        with pytest.raises(InvalidStateError):
            rjump.reversible_jump(MultiplexedState(0, np.zeros(3)), ctx, Stream(0))

    def test_record_json(self):
        ctx, s = self.state([0.1, 0.3, 0.3])
        _, rec = rjump.reversible_jump(s, ctx, Stream(3))
        d = json.loads(rec.to_json())
        assert d["from_technique"] == 0 and d["verified"] is True


class TestScene:
    @pytest.mark.parametrize("k", [1, 2, 3, 4])
    def test_jumps_near_one(self, tiny_cornell, k):
        ctx = SceneContext(tiny_cornell, k)
        rng = Stream(10 + k)
        rs = []
        for s in scene_states(ctx, 300, seed=k):
            nxt, rec = rjump.reversible_jump(s, ctx, rng)
            if rec.verified:
                rs.append(rec.acceptance)
                assert nxt.path is not None
        assert len(rs) >= 290
        assert min(rs) > 1 - 1e-6

    def test_verify_rejects_perturbed_coordinate(self, tiny_cornell):
        ctx = SceneContext(tiny_cornell, 2)
        s = scene_states(ctx, 1, seed=3)[0]
        v, _, _ = ctx.invert(1, s.path, Stream(0))
        assert rjump.forward_verify(ctx, 1, v, s.path)
        v[0] += 0.05
        assert not rjump.forward_verify(ctx, 1, v, s.path)

    def test_tolerance_sweep(self, tiny_cornell):
        ctx = SceneContext(tiny_cornell, 3)
        rng = Stream(7)
        fails = {tol: 0 for tol in (1e-6, 1e-9, 1e-12)}
        states = scene_states(ctx, 400, seed=9)
        for s in states:
            for j in range(ctx.k + 1):
                v, _, _ = ctx.invert(j, s.path, rng)
                for tol in fails:
                    fails[tol] += not rjump.forward_verify(ctx, j, v, s.path, tol)
        n = len(states) * (ctx.k + 1)
        assert fails[1e-6] == 0 and fails[1e-9] == 0
        assert fails[1e-12] / n < 0.01

    @pytest.mark.parametrize("k", [3, 4])
    def test_naive_switch_is_worse(self, tiny_cornell, k):
        ctx = SceneContext(tiny_cornell, k)
        rng = Stream(k)
        naive = []
        for s in scene_states(ctx, 400, seed=20 + k):
            j = rjump.choose_proposal_technique(s.mis_weights, rng)
            if j == s.technique:
                continue
            _, a = rjump.naive_technique_perturbation(s, ctx, rng, j=j)
            naive.append(a)
        assert np.mean(naive) < 0.9
