"""Invertible sampling blocks and the bookkeeping for their Jacobians.

A block maps primary-sample coordinates to a sample. Inversion-method blocks
are exactly invertible and their inverse Jacobian equals the sampling density.
Discrete choices and unused coordinates are ambiguous intervals, inverted by
uniform resampling inside the interval. Mixtures pick a sub-block with one
coordinate and are inverted probabilistically.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import NonInvertibleError, NumericError
from .rng import as_stream

BISECTION_TOL = 1e-12


@dataclass
class BlockResult:
    sample: object
    jac_inv_det: float
    consumed: int = 1
    interval: Optional[tuple] = None

    def __post_init__(self):
        if not (self.jac_inv_det > 0.0 and math.isfinite(self.jac_inv_det)):
            raise NumericError(f"inverse Jacobian must be positive and finite, got {self.jac_inv_det}")


@dataclass(frozen=True)
class InversionBlock:
    """One-dimensional inversion-method sampler on ``support``.

    ``cdf_inverse`` may be omitted; the forward map then bisects the CDF.
    """

    pdf: Callable[[float], float]
    cdf: Callable[[float], float]
    cdf_inverse: Optional[Callable[[float], float]] = None
    support: tuple = (0.0, 1.0)
    name: str = ""

    def quantile(self, u: float) -> float:
        if self.cdf_inverse is not None:
            return self.cdf_inverse(u)
        return bisect_cdf(self.cdf, u, *self.support)

    def forward(self, u: float) -> BlockResult:
        x = self.quantile(u)
        p = self.pdf(x)
        if not p > 0.0:
            raise NonInvertibleError(f"block {self.name!r} produced x={x} with zero density")
        return BlockResult(x, p)

    def inverse(self, x: float):
        lo, hi = self.support
        if not (lo <= x <= hi):
            raise NonInvertibleError(f"x={x} outside support {self.support}")
        p = self.pdf(x)
        if not p > 0.0:
            raise NonInvertibleError(f"block {self.name!r} has zero density at x={x}")
        u = self.cdf(x)
        if u >= 1.0:
            raise NonInvertibleError(f"x={x} maps onto the excluded endpoint u=1")
        return u, p


@dataclass(frozen=True)
class NonInvertibleBlock:
    """Placeholder for samplers without a usable inverse (rejection, Box-Muller)."""

    name: str = "non-invertible"

    def pdf(self, x):
        return 0.0

    def inverse(self, x):
        raise NonInvertibleError(f"{self.name} has no inverse")


def bisect_cdf(cdf: Callable[[float], float], u: float, lo: float = 0.0, hi: float = 1.0,
               tol: float = BISECTION_TOL) -> float:
    a, b = lo, hi
    while b - a > tol:
        m = 0.5 * (a + b)
        if cdf(m) < u:
            a = m
        else:
            b = m
    return 0.5 * (a + b)


def inversion_block_forward(block: InversionBlock, u: float) -> BlockResult:
    """x = P^-1(u) with inverse Jacobian p(x)."""
    if not 0.0 <= u < 1.0:
        raise ValueError(f"u={u} outside [0, 1)")
    return block.forward(u)


def inversion_block_inverse(block: InversionBlock, x: float):
    """u = P(x), returned together with the inverse Jacobian p(x)."""
    return block.inverse(x)


def interval_inverse(a: float, b: float, gamma: float):
    """Map an auxiliary variate into the ambiguous interval [a, b)."""
    if not a < b:
        raise ValueError(f"degenerate interval [{a}, {b})")
    if not 0.0 <= gamma < 1.0:
        raise ValueError(f"gamma={gamma} outside [0, 1)")
    u = a + gamma * (b - a)
    # rounding can land exactly on b for gamma close to 1
    if u >= b:
        u = math.nextafter(b, a)
    return u, b - a


@dataclass(frozen=True)
class MixtureSpec:
    """Sub-block ``t`` chosen with probability ``weights[t]`` by the selector coordinate."""

    weights: Sequence[float]
    blocks: Sequence[InversionBlock]
    selector_dim: int = 0
    bounds: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if len(w) != len(self.blocks) or len(w) == 0:
            raise ValueError("need one weight per sub-block")
        if np.any(w <= 0.0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"mixture weights must be positive and sum to 1, got {w}")
        for b in self.blocks:
            if isinstance(b, MixtureSpec):
                raise NotImplementedError("nested mixtures deeper than one level are not supported")
        bounds = np.concatenate([[0.0], np.cumsum(w)])
        bounds[-1] = 1.0
        object.__setattr__(self, "bounds", bounds)

    def select(self, u1: float) -> int:
        t = int(np.searchsorted(self.bounds, u1, side="right")) - 1
        return min(max(t, 0), len(self.blocks) - 1)

    def interval(self, t: int) -> tuple:
        return float(self.bounds[t]), float(self.bounds[t + 1])

    def pdf(self, x) -> float:
        return float(sum(a * b.pdf(x) for a, b in zip(self.weights, self.blocks)))


def _split(spec: MixtureSpec, u):
    u = np.asarray(u, dtype=np.float64)
    sel = u[spec.selector_dim]
    rest = np.delete(u, spec.selector_dim)
    return sel, rest


def mixture_forward(spec: MixtureSpec, u):
    """Select a sub-block with the selector coordinate and sample with it.

    Returns ``(sample, t, BlockResult)``; the result's Jacobian is
    ``alpha_t * p_t(x)`` and its interval the selector bracket of ``t``.
    """
    sel, rest = _split(spec, u)
    t = spec.select(sel)
    sub = spec.blocks[t].forward(float(rest[0]))
    a, b = spec.interval(t)
    res = BlockResult(sub.sample, spec.weights[t] * sub.jac_inv_det, consumed=1 + sub.consumed,
                      interval=(a, b))
    return sub.sample, t, res


def mixture_selection_distribution(spec: MixtureSpec, x) -> np.ndarray:
    """T(t) proportional to alpha_t times the inverse Jacobian of sub-block t at x."""
    scores = np.array([a * _safe_pdf(b, x) for a, b in zip(spec.weights, spec.blocks)])
    total = scores.sum()
    if not total > 0.0:
        raise NonInvertibleError(f"no sub-block of the mixture can produce x={x}")
    return scores / total


def _safe_pdf(block, x) -> float:
    try:
        lo, hi = block.support
        if not lo <= x <= hi:
            return 0.0
    except AttributeError:
        pass
    p = block.pdf(x)
    return p if p > 0.0 else 0.0


def mixture_step_factor(spec: MixtureSpec, x) -> float:
    """Per-step acceptance factor of an optimally inverted mixture: sum_s alpha_s p_s(x)."""
    return float(sum(a * _safe_pdf(b, x) for a, b in zip(spec.weights, spec.blocks)))


def mixture_inverse(spec: MixtureSpec, x, gamma, rng=None, t: Optional[int] = None):
    """Probabilistic inverse of a mixture.

    ``t`` is drawn from :func:`mixture_selection_distribution` unless forced.
    ``gamma[0]`` places the selector inside the bracket of ``t``. Returns
    ``(u, t, jac_inv_det)`` with ``jac_inv_det = alpha_t * p_t(x)`` and ``u``
    laid out like the forward input.
    """
    T = mixture_selection_distribution(spec, x)
    if t is None:
        rng = as_stream(rng)
        xi = rng.uniform()
        t = int(np.searchsorted(np.cumsum(T), xi, side="right"))
        t = min(t, len(T) - 1)
        while T[t] == 0.0:
            t -= 1
    elif T[t] == 0.0:
        raise NonInvertibleError(f"sub-block {t} cannot produce x={x}")
    a, b = spec.interval(t)
    sel, _ = interval_inverse(a, b, float(np.atleast_1d(gamma)[0]))
    u_sub, p_sub = spec.blocks[t].inverse(x)
    u = np.empty(2)
    u[spec.selector_dim] = sel
    u[1 - spec.selector_dim] = u_sub
    return u, t, spec.weights[t] * p_sub


def chain_jacobian(results) -> float:
    """Product of the inverse-Jacobian determinants along a random walk."""
    jac = 1.0
    for r in results:
        j = r.jac_inv_det if isinstance(r, BlockResult) else float(r)
        if not (j > 0.0 and math.isfinite(j)):
            raise NumericError(f"non-positive or non-finite block Jacobian {j}")
        jac *= j
    return jac
