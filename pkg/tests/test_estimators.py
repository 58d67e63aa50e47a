import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from rjmlt import oned
from rjmlt.estimators import MLTRenderer, OneDIntegrator, PathTracer
from rjmlt.lt.mlt import mlt_render
from rjmlt.lt.pt import path_trace_reference
from rjmlt.psscore import PerturbationMix


def test_params_roundtrip():
    est = MLTRenderer(algorithm="mmlt", mutations=5000, mix="0.2,0.8,0.0")
    params = est.get_params()
    assert params["algorithm"] == "mmlt" and params["mix"] == "0.2,0.8,0.0"
    twin = clone(est)
    assert twin.get_params() == params and not hasattr(twin, "image_")


def test_oned_matches_function():
    est = OneDIntegrator(variant="baseline", steps=20_000, bins=10, seed=2).fit()
    ref = oned.run_variant("baseline", 20_000, 2, bins=10)
    assert np.array_equal(est.histograms_.state_hist, ref.state_hist)
    assert (est.chi2_, est.pvalue_) == ref.chi_square()
    assert est.table().shape == (10, len(oned.CSV_HEADER))


def test_path_tracer_matches_function(tiny_cornell):
    est = PathTracer(spp=4, seed=1).fit(tiny_cornell)
    assert np.array_equal(est.image_, path_trace_reference(tiny_cornell, 4, 1))
    assert est.score(None, est.image_) == 0.0


def test_renderer_accepts_scene_dict(tiny_cornell):
    est = MLTRenderer(mutations=20_000, bootstrap_samples=2000, kmax=3, seed=1)
    est.fit(tiny_cornell.to_dict())
    ref = mlt_render(tiny_cornell, "rjmlt", 20_000, PerturbationMix(), 1, kmax=3,
                     bootstrap_samples=2000)
    assert np.array_equal(est.image_, ref.image)
    assert est.brightness_ == ref.brightness and est.stats_ == ref.stats_dict()
    assert est.score(None, np.zeros_like(est.image_)) < 0


def test_unfitted_score():
    with pytest.raises(NotFittedError):
        PathTracer().score(None, np.zeros((2, 2, 3)))


def test_bad_algorithm(tiny_cornell):
    with pytest.raises(ValueError):
        MLTRenderer(algorithm="bdpt").fit(tiny_cornell)
