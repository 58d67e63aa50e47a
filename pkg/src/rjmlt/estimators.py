"""Estimator-style wrappers: configure in ``__init__``, run in ``fit``, read ``*_`` attributes."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import oned
from .diagnostics import mse
from .lt.bdpt import KMAX_DEFAULT
from .lt.mlt import ALGORITHMS, mlt_render
from .lt.pt import path_trace_reference
from .lt.scene import Scene
from .psscore import BOOTSTRAP_SAMPLES, DEFAULT_S1, DEFAULT_S2, PerturbationMix


def _scene(X) -> Scene:
    if isinstance(X, Scene):
        return X
    if isinstance(X, dict):
        return Scene.from_dict(X)
    return Scene.load(X)


class _ImageMixin:
    def score(self, X, y):
        """Negative MSE of the fitted image against reference ``y``."""
        check_is_fitted(self, "image_")
        return -mse(self.image_, y)


class OneDIntegrator(BaseEstimator):
    """One of the four 1D integrators; ``X`` is ignored."""

    def __init__(self, variant="full", steps=10_000_000, bins=100, seed=0,
                 p_jump=oned.DEFAULT_JUMP_PROB, s1=oned.ONED_S1, s2=oned.ONED_S2):
        self.variant = variant
        self.steps = steps
        self.bins = bins
        self.seed = seed
        self.p_jump = p_jump
        self.s1 = s1
        self.s2 = s2

    def fit(self, X=None, y=None):
        self.histograms_ = oned.run_variant(self.variant, self.steps, self.seed, bins=self.bins,
                                            p_jump=self.p_jump, s1=self.s1, s2=self.s2)
        self.chi2_, self.pvalue_ = self.histograms_.chi_square()
        self.counts_ = self.histograms_.counts
        return self

    def table(self) -> np.ndarray:
        check_is_fitted(self, "histograms_")
        return oned.histogram_table(self.histograms_)


class PathTracer(_ImageMixin, BaseEstimator):
    def __init__(self, spp=64, seed=0, kmax=KMAX_DEFAULT, threads=1):
        self.spp = spp
        self.seed = seed
        self.kmax = kmax
        self.threads = threads

    def fit(self, X, y=None):
        self.image_ = path_trace_reference(_scene(X), self.spp, self.seed, kmax=self.kmax,
                                           threads=self.threads)
        return self


class MLTRenderer(_ImageMixin, BaseEstimator):
    def __init__(self, algorithm="rjmlt", mutations=1_000_000, mix="0.1,0.85,0.05", seed=0,
                 kmax=KMAX_DEFAULT, s1=DEFAULT_S1, s2=DEFAULT_S2,
                 bootstrap_samples=BOOTSTRAP_SAMPLES, threads=1, trace_jumps=0):
        self.algorithm = algorithm
        self.mutations = mutations
        self.mix = mix
        self.seed = seed
        self.kmax = kmax
        self.s1 = s1
        self.s2 = s2
        self.bootstrap_samples = bootstrap_samples
        self.threads = threads
        self.trace_jumps = trace_jumps

    def fit(self, X, y=None):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}")
        mix = self.mix if isinstance(self.mix, PerturbationMix) else PerturbationMix.parse(self.mix)
        self.result_ = mlt_render(_scene(X), self.algorithm, self.mutations, mix, self.seed,
                                  kmax=self.kmax, s1=self.s1, s2=self.s2,
                                  bootstrap_samples=self.bootstrap_samples, threads=self.threads,
                                  trace_jumps=self.trace_jumps)
        self.image_ = self.result_.image
        self.stats_ = self.result_.stats_dict()
        self.brightness_ = self.result_.brightness
        return self
