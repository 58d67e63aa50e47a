import math

import numpy as np
import pytest

from rjmlt.lt import warp
from rjmlt.lt.geometry import EPS, INF, intersect, intersect_brute, visible
from rjmlt.lt.scene import Scene, SceneError, cornell_box

UNIT_SPHERE = {
    "camera": {"position": [0, 0, -5], "look_at": [0, 0, 0]},
    "materials": [{"id": "m", "albedo": [0.5, 0.5, 0.5]}],
    "primitives": [
        {"type": "sphere", "center": [0, 0, 0], "radius": 1.0, "material": "m"},
        {"type": "rect", "corner": [-1, -2, -1], "edge1": [0, 0, 2], "edge2": [2, 0, 0],
         "material": "m"},
    ],
}


def unit_dirs(rng, n):
    d = rng.normal(size=(n, 3))
    return d / np.linalg.norm(d, axis=1, keepdims=True)


class TestIntersect:
    def test_sphere_front_hit(self):
        sc = Scene.from_dict(UNIT_SPHERE).arrays()
        t, prim = intersect(sc, (0.0, 0.0, -2.0), (0.0, 0.0, 1.0), EPS, INF)
        assert t == pytest.approx(1.0) and prim == 0
        hit = np.array([0, 0, -2.0]) + t * np.array([0, 0, 1.0])
        assert np.allclose(hit, [0, 0, -1])

    def test_parallel_to_rect_misses(self):
        sc = Scene.from_dict(UNIT_SPHERE).arrays()
        t, prim = intersect(sc, (-3.0, -2.0, 0.0), (1.0, 0.0, 0.0), EPS, INF)
        assert prim == -1 and t == INF

    def test_from_inside_sphere_hits_far_side(self):
        sc = Scene.from_dict(UNIT_SPHERE).arrays()
        t, prim = intersect(sc, (0.0, 0.0, 0.0), (0.0, 1.0, 0.0), EPS, INF)
        assert t == pytest.approx(1.0) and prim == 0

    def test_matches_brute_force(self, cornell, nprng):
        sc = cornell.arrays()
        origins = nprng.uniform(0.02, 0.98, size=(3000, 3))
        for o, d in zip(origins, unit_dirs(nprng, 3000)):
            t, prim = intersect(sc, tuple(o), tuple(d), EPS, INF)
            tb, pb = intersect_brute(sc, o, d)
            assert prim == pb
            if prim >= 0:
                assert t == pytest.approx(tb, rel=1e-9, abs=1e-12)

    def test_visibility_is_symmetric(self, cornell, nprng):
        sc = cornell.arrays()
        pts = nprng.uniform(0.02, 0.98, size=(500, 2, 3))
        for p, q in pts:
            assert visible(sc, tuple(p), tuple(q)) == visible(sc, tuple(q), tuple(p))


class TestScene:
    def test_roundtrip_json(self, tmp_path):
        scene = cornell_box()
        scene.save(tmp_path / "c.json")
        again = Scene.load(tmp_path / "c.json")
        for a, b in zip(scene.arrays(), again.arrays()):
            assert np.array_equal(a, b)

    def test_malformed_json(self, tmp_path):
        (tmp_path / "bad.json").write_text("{not json")
        with pytest.raises(SceneError):
            Scene.load(tmp_path / "bad.json")

    def test_missing_camera(self):
        with pytest.raises(SceneError):
            Scene.from_dict({"materials": []})

    def test_unknown_material(self):
        d = dict(UNIT_SPHERE, primitives=[{"type": "sphere", "center": [0, 0, 0], "radius": 1,
                                           "material": "nope"}])
        with pytest.raises(SceneError):
            Scene.from_dict(d)

    def test_energy_conservation_enforced(self):
        d = dict(UNIT_SPHERE, materials=[{"id": "m", "kind": "lambert_phong_mixture",
                                          "albedo": [0.6, 0.6, 0.6],
                                          "spec_albedo": [0.5, 0.5, 0.5], "alpha_diffuse": 0.5}])
        with pytest.raises(SceneError):
            Scene.from_dict(d)

    def test_camera_inside_sphere(self):
        d = dict(UNIT_SPHERE, camera={"position": [0, 0, 0.5], "look_at": [0, 0, 1]})
        with pytest.raises(SceneError):
            Scene.from_dict(d)

    def test_emitter_required_for_rendering(self):
        with pytest.raises(SceneError):
            Scene.from_dict(UNIT_SPHERE).validate()


class TestWarps:
    def test_cosine_hemisphere_roundtrip(self, nprng):
        for n in unit_dirs(nprng, 200):
            n = tuple(n)
            u1, u2 = nprng.random(2)
            w = warp.cosine_hemisphere(n, u1, u2)
            ok, v1, v2 = warp.cosine_hemisphere_inv(n, w)
            assert ok and v1 == pytest.approx(u1, abs=1e-9) and v2 == pytest.approx(u2, abs=1e-9)

    def test_phong_roundtrip(self, nprng):
        for axis in unit_dirs(nprng, 200):
            axis = tuple(axis)
            u1, u2 = nprng.uniform(0.01, 0.99, 2)
            w = warp.phong_lobe(axis, 20.0, u1, u2)
            ok, v1, v2 = warp.phong_lobe_inv(axis, 20.0, w)
            assert ok and v1 == pytest.approx(u1, abs=1e-9) and v2 == pytest.approx(u2, abs=1e-9)

    def test_phong_inverse_rejects_back_hemisphere(self):
        ok, _, _ = warp.phong_lobe_inv((0.0, 0.0, 1.0), 10.0, (0.0, 0.0, -1.0))
        assert not ok

    @pytest.mark.parametrize("exponent", [0.0, 5.0, 40.0])
    def test_phong_pdf_normalized(self, exponent, nprng):
        # uniform sphere sampling: E[pdf] * 4 pi = 1
        ws = unit_dirs(nprng, 400_000)
        axis = (0.0, 0.0, 1.0)
        vals = np.array([warp.phong_lobe_pdf(axis, exponent, tuple(w)) for w in ws[:100_000]])
        assert vals.mean() * 4 * math.pi == pytest.approx(1.0, rel=0.05)

    def test_cosine_pdf_matches_fd_jacobian(self, nprng):
        n = (0.0, 0.0, 1.0)
        for _ in range(50):
            u1, u2 = nprng.uniform(0.05, 0.95, 2)
            h = 1e-6
            w = np.array(warp.cosine_hemisphere(n, u1, u2))
            du = (np.array(warp.cosine_hemisphere(n, u1 + h, u2)) -
                  np.array(warp.cosine_hemisphere(n, u1 - h, u2))) / (2 * h)
            dv = (np.array(warp.cosine_hemisphere(n, u1, u2 + h)) -
                  np.array(warp.cosine_hemisphere(n, u1, u2 - h))) / (2 * h)
            area = np.linalg.norm(np.cross(du, dv))
            assert 1 / area == pytest.approx(warp.cosine_hemisphere_pdf(n, tuple(w)), rel=1e-5)

    def test_rect_roundtrip(self, nprng):
        p0, e1, e2 = (0.1, 0.2, 0.3), (0.0, 0.0, 0.7), (0.4, 0.0, 0.0)
        for u1, u2 in nprng.random((100, 2)):
            x = warp.rect_point(p0, e1, e2, u1, u2)
            ok, a, b = warp.rect_point_inv(p0, e1, e2, x)
            assert ok and a == pytest.approx(u1, abs=1e-12) and b == pytest.approx(u2, abs=1e-12)
        assert warp.rect_area(e1, e2) == pytest.approx(0.28)

    def test_discrete_select(self):
        cdf = np.array([0.0, 0.25, 0.25, 1.0])
        assert warp.discrete_select(cdf, 0.1) == 0
        assert warp.discrete_select(cdf, 0.25) == 2
        assert warp.discrete_select(cdf, 0.99) == 2

    def test_film_roundtrip(self, cornell, nprng):
        sc = cornell.arrays()
        for fx, fy in nprng.random((200, 2)):
            d = warp.film_direction(sc, fx, fy)
            ok, gx, gy = warp.film_inv(sc, d)
            assert ok and gx == pytest.approx(fx, abs=1e-12) and gy == pytest.approx(fy, abs=1e-12)

    def test_camera_pdf_integrates_to_one(self, cornell, nprng):
        sc = cornell.arrays()
        _, fwd, *_ = warp.camera_basis(sc)
        ws = unit_dirs(nprng, 200_000)
        ws = ws[ws @ np.array(fwd) > 0]
        vals = np.array([warp.camera_pdf(sc, tuple(w)) for w in ws])
        assert vals.sum() / 200_000 * 4 * math.pi == pytest.approx(1.0, rel=0.05)
