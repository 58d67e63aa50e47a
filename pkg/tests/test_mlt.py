import numpy as np
import pytest

from rjmlt import oned, rjump
from rjmlt.errors import InitializationError
from rjmlt.lt.mlt import allocate, bootstrap_length, mlt_render
from rjmlt.lt.scene import Scene, cornell_box
from rjmlt.psscore import PerturbationMix
from rjmlt.rng import Stream

MIX = PerturbationMix(0.1, 0.6, 0.3)


@pytest.fixture(scope="module")
def small_run(tiny_cornell):
    return mlt_render(tiny_cornell, "rjmlt", 200_000, MIX, seed=4, kmax=5, bootstrap_samples=2000,
                      trace_jumps=50, debug=True)


class TestAllocate:
    def test_sums_to_budget(self):
        out = allocate(1000, [0.5, 0.3, 0.2, 0.0])
        assert out.sum() == 1000 and out[-1] == 0
        assert list(out) == [500, 300, 200, 0]

    def test_largest_remainder(self):
        assert list(allocate(10, [1, 1, 1])) == [4, 3, 3]

    def test_all_zero(self):
        with pytest.raises(InitializationError):
            allocate(10, [0, 0])


class TestBootstrap:
    def test_start_state_carries_light(self, tiny_cornell):
        b, u0 = bootstrap_length(tiny_cornell, 2, 0, 2000)
        assert b > 0 and u0 is not None and u0.shape == (16,)

    def test_brightness_matches_between_seeds(self, tiny_cornell):
        a = sum(bootstrap_length(tiny_cornell, k, 1, 20_000)[0] for k in (1, 2, 3))
        b = sum(bootstrap_length(tiny_cornell, k, 2, 20_000)[0] for k in (1, 2, 3))
        assert a == pytest.approx(b, rel=0.1)


class TestRender:
    def test_same_seed_bit_identical(self, tiny_cornell, small_run):
        again = mlt_render(tiny_cornell, "rjmlt", 200_000, MIX, seed=4, kmax=5,
                           bootstrap_samples=2000, trace_jumps=50, debug=True)
        assert np.array_equal(small_run.image, again.image)
        assert small_run.stats_dict() == again.stats_dict()

    def test_threads_bit_identical(self, tiny_cornell, small_run):
        par = mlt_render(tiny_cornell, "rjmlt", 200_000, MIX, seed=4, kmax=5,
                         bootstrap_samples=2000, trace_jumps=50, threads=3)
        assert np.array_equal(small_run.image, par.image)

    def test_different_seed_differs(self, tiny_cornell, small_run):
        other = mlt_render(tiny_cornell, "rjmlt", 200_000, MIX, seed=5, kmax=5,
                           bootstrap_samples=2000)
        assert not np.array_equal(small_run.image, other.image)

    def test_budget_and_counters(self, small_run):
        per = small_run.stats_dict()
        assert sum(d["mutations"] for d in per.values()) == 200_000
        for d in per.values():
            n = d["large"]["proposed"] + d["small"]["proposed"] + d["jump"]["proposed"]
            assert n == d["mutations"]
            assert d["small_technique_change"]["proposed"] == 0

    def test_jumps_are_optimal(self, small_run):
        for d in small_run.stats_dict().values():
            j = d["jump"]
            assert j["verified_fail"] == 0 and j["deviations_over_tol"] == 0
            assert j["max_acceptance_deviation"] <= 1e-9
            if j["proposed"]:
                assert j["mean_acceptance"] == pytest.approx(1.0, abs=1e-9)

    def test_jump_records(self, small_run):
        recs = small_run.jump_records()
        assert 0 < len(recs) <= 50 * 5
        for r in recs:
            assert r["verified"] and r["acceptance"] == pytest.approx(1.0, abs=1e-9)
            assert 1 <= r["length"] <= 5

    def test_image_shape_and_sign(self, small_run):
        assert small_run.image.shape == (8, 8, 3)
        assert np.all(small_run.image >= 0) and small_run.image.sum() > 0

    def test_mean_brightness_is_bootstrap_total(self, small_run):
        # expected-value splatting keeps the total image luminance at sum_k b_k * Npix
        lum = small_run.image @ np.array([0.2126, 0.7152, 0.0722])
        assert lum.mean() == pytest.approx(small_run.brightness, rel=1e-9)

    def test_mmlt_has_no_jumps_but_changes_techniques(self, tiny_cornell):
        res = mlt_render(tiny_cornell, "mmlt", 100_000, MIX, seed=1, kmax=4,
                         bootstrap_samples=2000)
        per = res.stats_dict()
        assert all(d["jump"]["proposed"] == 0 for d in per.values())
        assert sum(d["small_technique_change"]["proposed"] for d in per.values()) > 0
        # the jump share goes to large and small steps in proportion 0.1 : 0.6
        large = sum(d["large"]["proposed"] for d in per.values())
        assert large / 100_000 == pytest.approx(0.1 / 0.7, abs=0.01)


class TestErrors:
    def test_budget_below_bootstrap(self, tiny_cornell):
        with pytest.raises(ValueError):
            mlt_render(tiny_cornell, "rjmlt", 100, MIX, seed=0, bootstrap_samples=1000)

    def test_unknown_algorithm(self, tiny_cornell):
        with pytest.raises(ValueError):
            mlt_render(tiny_cornell, "pssmlt", 10_000, MIX, seed=0, bootstrap_samples=1000)

    def test_scene_without_light_carrying_paths(self):
        d = cornell_box(resolution=(4, 4)).to_dict()
        # an emitter behind the camera that faces away from the scene
        d["emitters"][0].update(corner=[0.3, 0.3, -2.0], edge1=[0, 0.4, 0], edge2=[0.4, 0, 0])
        scene = Scene.from_dict(d)
        with pytest.raises(InitializationError):
            mlt_render(scene, "rjmlt", 20_000, MIX, seed=0, kmax=3, bootstrap_samples=2000)

    def test_scene_without_emitter(self):
        d = cornell_box(resolution=(4, 4)).to_dict()
        d["emitters"] = []
        with pytest.raises(ValueError):
            mlt_render(Scene.from_dict(d), "rjmlt", 20_000, MIX, seed=0, bootstrap_samples=2000)

    def test_debug_assert_fires_on_suboptimal_jump(self):
        ctx = oned.OneDContext(drop_jacobian=True)
        rng = Stream(2)
        with pytest.raises(AssertionError):
            for _ in range(200):
                u = rng.uniforms(3)
                s = ctx.evaluate(oned._forward(u)[0], u)
                if s.target_value > 0 and 0 < s.path < 1:
                    rjump.reversible_jump(s, ctx, rng, debug=True)
