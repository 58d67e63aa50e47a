"""One-dimensional Markov chain integrator with three sampling techniques.

The chain targets ``1 + 0.9 sin(3 pi x)`` on [0, 1]. Primary sample space is
three-dimensional: coordinate 0 selects the technique in equal thirds,
coordinate 1 drives the inverse CDF, coordinate 2 selects the sub-technique
of the mixture and is otherwise unused. Four integrators are available:

``baseline``    multiplexed small steps only
``nojacobian``  small steps plus reversible jumps with Jacobians dropped
``fixedpoint``  jumps whose ambiguous intervals invert to their midpoint
``full``        jumps with Jacobians and uniformly parametrized inverses
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numba import njit
from scipy import integrate, special

from .errors import NonInvertibleError
from .invmap import (BlockResult, InversionBlock, MixtureSpec, interval_inverse,
                     mixture_forward, mixture_inverse)
from .psscore import MultiplexedState, kelemen_offset, wrap_unit
from .rng import Stream, next_double

VARIANTS = ("baseline", "nojacobian", "fixedpoint", "full")
_VARIANT_CODE = {name: i for i, name in enumerate(VARIANTS)}
N_TECHNIQUES = 3
MIX_ALPHA = (0.6, 0.4)
TARGET_AMPLITUDE = 0.9
TARGET_INTEGRAL = 1.0 + 2.0 * TARGET_AMPLITUDE / (3.0 * math.pi)
DEFAULT_JUMP_PROB = 0.5
# wide steps let the chain cross interval boundaries of the mixture selector
ONED_S1 = 0.25
ONED_S2 = 1.0 / 64.0
DEFAULT_BATCHES = 100
VERIFY_TOL = 1e-9


# -- closed-form densities (scalar, jitted; shared by kernel and Python API) --

@njit(cache=True)
def target_1d(x):
    return 1.0 + TARGET_AMPLITUDE * math.sin(3.0 * math.pi * x)


@njit(cache=True)
def _tri_pdf(x):
    return 2.0 * (1.0 - x) if 0.0 <= x <= 1.0 else 0.0


@njit(cache=True)
def _tri_cdf(x):
    return 1.0 - (1.0 - x) * (1.0 - x)


@njit(cache=True)
def _tri_inv(u):
    return 1.0 - math.sqrt(1.0 - u)


@njit(cache=True)
def _step_pdf(x):
    if x < 0.0 or x > 1.0:
        return 0.0
    return 1.5 if x < 0.5 else 0.5


@njit(cache=True)
def _step_cdf(x):
    return 1.5 * x if x < 0.5 else 0.75 + 0.5 * (x - 0.5)


@njit(cache=True)
def _step_inv(u):
    return u / 1.5 if u < 0.75 else 0.5 + (u - 0.75) / 0.5


@njit(cache=True)
def _sin_pdf(x):
    return 0.5 * math.pi * math.sin(math.pi * x) if 0.0 <= x <= 1.0 else 0.0


@njit(cache=True)
def _sin_cdf(x):
    return 0.5 * (1.0 - math.cos(math.pi * x))


@njit(cache=True)
def _sin_inv(u):
    return math.acos(1.0 - 2.0 * u) / math.pi


@njit(cache=True)
def _lin_pdf(x):
    return 2.0 * x if 0.0 <= x <= 1.0 else 0.0


@njit(cache=True)
def _lin_cdf(x):
    return x * x


@njit(cache=True)
def _lin_inv(u):
    return math.sqrt(u)


@njit(cache=True)
def _sub_pdf(s, x):
    return _sin_pdf(x) if s == 0 else _lin_pdf(x)


@njit(cache=True)
def _sub_cdf(s, x):
    return _sin_cdf(x) if s == 0 else _lin_cdf(x)


@njit(cache=True)
def _sub_inv(s, u):
    return _sin_inv(u) if s == 0 else _lin_inv(u)


@njit(cache=True)
def technique_pdf_1d(t, x):
    if t == 0:
        return _tri_pdf(x)
    if t == 1:
        return _step_pdf(x)
    return MIX_ALPHA[0] * _sin_pdf(x) + MIX_ALPHA[1] * _lin_pdf(x)


@njit(cache=True)
def _pdf_sum(x):
    return technique_pdf_1d(0, x) + technique_pdf_1d(1, x) + technique_pdf_1d(2, x)


@njit(cache=True)
def _select(u0):
    t = int(u0 * 3.0)
    return 2 if t > 2 else t


@njit(cache=True)
def _sub_select(u2):
    return 0 if u2 < MIX_ALPHA[0] else 1


@njit(cache=True)
def _forward(u):
    """(technique, x) for a primary sample."""
    t = _select(u[0])
    if t == 0:
        x = _tri_inv(u[1])
    elif t == 1:
        x = _step_inv(u[1])
    else:
        x = _sub_inv(_sub_select(u[2]), u[1])
    return t, x


@njit(cache=True)
def _target_value(t, x):
    p = technique_pdf_1d(t, x)
    if not p > 0.0:
        return 0.0
    return target_1d(x) / _pdf_sum(x)


@njit(cache=True)
def _forward_jac(t, x, u2):
    """(product of inverse-block Jacobians, selection probability of the sub-technique)."""
    if t < 2:
        return technique_pdf_1d(t, x) / 3.0, 1.0
    s = _sub_select(u2)
    score = MIX_ALPHA[s] * _sub_pdf(s, x)
    total = MIX_ALPHA[0] * _sin_pdf(x) + MIX_ALPHA[1] * _lin_pdf(x)
    return score / 3.0, score / total


@njit(cache=True)
def _invert(state, j, x, fixed_point, out):
    """Inverse random walk for technique j; returns (ok, jac, T(t))."""
    g0 = 0.5 if fixed_point else next_double(state)
    out[0] = (j + g0) / 3.0
    if j < 2:
        p = technique_pdf_1d(j, x)
        if not p > 0.0:
            return False, 0.0, 0.0
        out[1] = _tri_cdf(x) if j == 0 else _step_cdf(x)
        out[2] = 0.5 if fixed_point else next_double(state)
        return out[1] < 1.0, p / 3.0, 1.0
    a0 = MIX_ALPHA[0] * _sin_pdf(x)
    a1 = MIX_ALPHA[1] * _lin_pdf(x)
    total = a0 + a1
    if not total > 0.0:
        return False, 0.0, 0.0
    xi = next_double(state)
    s = 0 if xi * total < a0 else 1
    if s == 0 and a0 == 0.0:
        s = 1
    score = a0 if s == 0 else a1
    lo = 0.0 if s == 0 else MIX_ALPHA[0]
    g2 = 0.5 if fixed_point else next_double(state)
    out[2] = lo + g2 * MIX_ALPHA[s]
    out[1] = _sub_cdf(s, x)
    return out[1] < 1.0, score / 3.0, score / total


@njit(cache=True)
def _choose(state, w):
    xi = next_double(state) * (w[0] + w[1] + w[2])
    acc = 0.0
    for j in range(3):
        acc += w[j]
        if xi < acc and w[j] > 0.0:
            return j
    for j in range(2, -1, -1):
        if w[j] > 0.0:
            return j
    return -1


@njit(cache=True)
def _bin(x, bins):
    b = int(x * bins)
    if b >= bins:
        b = bins - 1
    if b < 0:
        b = 0
    return b


@njit(cache=True)
def _run_kernel(state, u_init, steps, bins, variant, p_jump, s1, s2, n_batches,
                state_batches, usage, counts):
    """Sequential chain. counts: [small_prop, small_acc, small_r, jump_prop,
    jump_acc, jump_r, verify_fail]."""
    u = u_init.copy()
    v = np.empty(3)
    w = np.empty(3)
    t, x = _forward(u)
    c = _target_value(t, x)
    batch_len = max(steps // n_batches, 1)
    use_jumps = variant != 0
    fixed_point = variant == 2
    drop_jac = variant == 1
    for it in range(steps):
        batch = min(it // batch_len, n_batches - 1)
        if use_jumps and next_double(state) < p_jump:
            kind = 1
            s = _pdf_sum(x)
            for q in range(3):
                w[q] = technique_pdf_1d(q, x) / s
            j = _choose(state, w)
            ok, jac_v, tv = _invert(state, j, x, fixed_point, v)
            r = 0.0
            tj = j
            xj = x
            cj = 0.0
            if ok:
                tj, xj = _forward(v)
                if tj != j or abs(xj - x) > VERIFY_TOL:
                    ok = False
                    counts[6] += 1
                else:
                    cj = _target_value(tj, xj)
                    jac_u, tu = _forward_jac(t, x, u[2])
                    if drop_jac:
                        jac_u = 1.0
                        jac_v = 1.0
                    r = (cj * w[t] * jac_v * tu) / (c * w[j] * jac_u * tv)
                    if r > 1.0:
                        r = 1.0
            else:
                counts[6] += 1
        else:
            kind = 0
            for d in range(3):
                v[d] = wrap_unit(u[d] + kelemen_offset(state, s1, s2))
            tj, xj = _forward(v)
            cj = _target_value(tj, xj)
            r = cj / c
            if r > 1.0:
                r = 1.0
        bv = _bin(xj, bins)
        bu = _bin(x, bins)
        if r > 0.0:
            state_batches[batch, bv] += r
            usage[bv, tj] += r
        if r < 1.0:
            state_batches[batch, bu] += 1.0 - r
            usage[bu, t] += 1.0 - r
        accepted = next_double(state) < r
        counts[3 * kind] += 1
        counts[3 * kind + 2] += r
        if accepted:
            counts[3 * kind + 1] += 1
            u[:] = v
            t = tj
            x = xj
            c = cj


# -- Python-level technique API --------------------------------------------

def _block(name, pdf, cdf, inv):
    return InversionBlock(pdf=pdf, cdf=cdf, cdf_inverse=inv, name=name)


TRIANGULAR = _block("triangular", _tri_pdf, _tri_cdf, _tri_inv)
STEP = _block("step", _step_pdf, _step_cdf, _step_inv)
SINE = _block("sine", _sin_pdf, _sin_cdf, _sin_inv)
LINEAR = _block("linear", _lin_pdf, _lin_cdf, _lin_inv)
MIXTURE = MixtureSpec(weights=MIX_ALPHA, blocks=(SINE, LINEAR))


@dataclass(frozen=True)
class OneDTechnique:
    id: str
    index: int
    block: object

    @property
    def interval(self):
        return self.index / 3.0, (self.index + 1) / 3.0

    @property
    def is_mixture(self) -> bool:
        return isinstance(self.block, MixtureSpec)

    def pdf(self, x: float) -> float:
        return float(technique_pdf_1d(self.index, x))


TECHNIQUES = (
    OneDTechnique("triangular", 0, TRIANGULAR),
    OneDTechnique("step", 1, STEP),
    OneDTechnique("mixture", 2, MIXTURE),
)


def technique_for(u0: float) -> OneDTechnique:
    return TECHNIQUES[_select(u0)]


def technique_sample_1d(t: OneDTechnique, u):
    """Sample with technique ``t``; returns ``(x, pdf, ledger)``.

    The ledger lists the selection interval, the position block and the third
    coordinate (mixture selector, or an unused full interval).
    """
    u = np.asarray(u, dtype=np.float64)
    a, b = t.interval
    ledger = [BlockResult(t.index, b - a, interval=(a, b))]
    if t.is_mixture:
        x, _, res = mixture_forward(MIXTURE, [u[2], u[1]])
        ledger.append(res)
    else:
        res = t.block.forward(u[1])
        x = res.sample
        ledger.append(res)
        ledger.append(BlockResult(None, 1.0, interval=(0.0, 1.0)))
    return x, t.pdf(x), ledger


def technique_invert_1d(t: OneDTechnique, x: float, gamma, rng=None, fixed_point: bool = False,
                        sub: Optional[int] = None):
    """Inverse of :func:`technique_sample_1d`; returns ``(u, jac_inv_det)``.

    ``gamma`` holds the auxiliary variates for coordinates 0 and 2. With
    ``fixed_point`` every ambiguous interval maps to its midpoint instead.
    """
    gamma = np.asarray(gamma, dtype=np.float64)
    g0, g2 = (0.5, 0.5) if fixed_point else (gamma[0], gamma[-1])
    a, b = t.interval
    u0, jac0 = interval_inverse(a, b, g0)
    if t.is_mixture:
        um, _, jac = mixture_inverse(MIXTURE, x, [g2], rng=rng, t=sub)
        return np.array([u0, um[1], um[0]]), jac0 * jac
    u1, p = t.block.inverse(x)
    u2, jac2 = interval_inverse(0.0, 1.0, g2)
    return np.array([u0, u1, u2]), jac0 * p * jac2


def mis_weights_1d(x: float) -> np.ndarray:
    p = np.array([technique_pdf_1d(t, x) for t in range(3)])
    return p / p.sum()


class OneDContext:
    """Evaluation/inversion context used by the generic reversible-jump code."""

    n_techniques = N_TECHNIQUES

    def __init__(self, fixed_point: bool = False, drop_jacobian: bool = False):
        self.fixed_point = fixed_point
        self.drop_jacobian = drop_jacobian

    def evaluate(self, technique: int, u) -> MultiplexedState:
        u = np.asarray(u, dtype=np.float64)
        t, x = _forward(u)
        if t != technique:
            # coordinate 0 disagrees with the explicit technique: not a valid state
            return MultiplexedState(technique, u, None, 0.0, None)
        jac, tsel = _forward_jac(t, x, u[2])
        if self.drop_jacobian:
            jac = 1.0
        return MultiplexedState(technique, u, x, float(_target_value(t, x)), mis_weights_1d(x),
                                jac=float(jac), mixture_t=float(tsel))

    def mis_weights(self, path) -> np.ndarray:
        return mis_weights_1d(path)

    def invert(self, technique: int, path, rng: Stream):
        v = np.empty(3)
        ok, jac, tsel = _invert(rng.state, technique, float(path), self.fixed_point, v)
        if not ok:
            raise NonInvertibleError(f"technique {technique} cannot produce x={path}")
        return v, 1.0 if self.drop_jacobian else float(jac), float(tsel)

    def verify(self, technique: int, u, expected, tol: float = VERIFY_TOL) -> bool:
        t, x = _forward(np.asarray(u, dtype=np.float64))
        return t == technique and abs(x - expected) <= tol

    def path_distance(self, a, b) -> float:
        return abs(a - b)


# -- statistics --------------------------------------------------------------

def target_bin_probabilities(bins: int) -> np.ndarray:
    """Exact probability mass of each uniform bin under the normalized target."""
    edges = np.linspace(0.0, 1.0, bins + 1)
    antideriv = edges - TARGET_AMPLITUDE * np.cos(3.0 * np.pi * edges) / (3.0 * np.pi)
    return np.diff(antideriv) / TARGET_INTEGRAL


def expected_usage(bins: int) -> np.ndarray:
    """Target-weighted mean balance-heuristic weight per bin, shape (bins, 3)."""
    edges = np.linspace(0.0, 1.0, bins + 1)
    out = np.empty((bins, 3))
    for b in range(bins):
        lo, hi = edges[b], edges[b + 1]
        mass = integrate.quad(target_1d, lo, hi, epsabs=1e-13)[0]
        for t in range(3):
            val = integrate.quad(lambda x: target_1d(x) * mis_weights_1d(x)[t], lo, hi,
                                 epsabs=1e-13)[0]
            out[b, t] = val / mass
    return out


def _merge_small_bins(obs, exp, min_expected=5.0):
    mo, me = [], []
    acc_o = acc_e = 0.0
    for o, e in zip(obs, exp):
        acc_o += o
        acc_e += e
        if acc_e >= min_expected:
            mo.append(acc_o)
            me.append(acc_e)
            acc_o = acc_e = 0.0
    if acc_e > 0.0:
        if me:
            mo[-1] += acc_o
            me[-1] += acc_e
        else:
            mo.append(acc_o)
            me.append(acc_e)
    return np.array(mo), np.array(me)


def chi_square(observed, expected, samples: float):
    """Pearson statistic and upper-tail p-value of ``observed`` against ``expected``.

    Both histograms are normalized and scaled to ``samples`` counts; bins with
    fewer than five expected counts are merged with their right neighbours.
    """
    obs = np.asarray(observed, dtype=np.float64)
    exp = np.asarray(expected, dtype=np.float64)
    if obs.size == 0 or obs.sum() <= 0.0 or exp.sum() <= 0.0:
        raise ValueError("empty histogram")
    if obs.shape != exp.shape:
        raise ValueError("histograms have different shapes")
    obs = obs / obs.sum() * samples
    exp = exp / exp.sum() * samples
    obs, exp = _merge_small_bins(obs, exp)
    stat = float(np.sum((obs - exp) ** 2 / exp))
    dof = len(exp) - 1
    if dof < 1:
        return stat, 1.0
    return stat, float(special.gammaincc(dof / 2.0, stat / 2.0))


def design_effect(batch_counts, probabilities) -> float:
    """Mean variance inflation of bin frequencies from batch means.

    Dividing the sample count by this factor turns a correlated chain's
    histogram into an equivalent independent one (first-order Rao-Scott).
    """
    batch_counts = np.asarray(batch_counts, dtype=np.float64)
    totals = batch_counts.sum(axis=1)
    keep = totals > 0
    freqs = batch_counts[keep] / totals[keep, None]
    nb = freqs.shape[0]
    n = totals.sum()
    var_mean = freqs.var(axis=0, ddof=1) / nb
    p = np.asarray(probabilities)
    mask = p > 0
    return float(np.sum(var_mean[mask] * n / p[mask]) / (mask.sum() - 1))


@dataclass
class HistogramPair:
    state_hist: np.ndarray
    usage_hist: np.ndarray
    visits: np.ndarray
    batch_counts: np.ndarray
    steps: int
    counts: dict

    @classmethod
    def merge(cls, pairs):
        pairs = list(pairs)
        visits = sum(p.visits for p in pairs)
        usage_mass = sum(p.usage_hist * p.visits[:, None] for p in pairs)
        usage = np.divide(usage_mass, visits[:, None], out=np.zeros_like(usage_mass),
                          where=visits[:, None] > 0)
        batches = np.concatenate([p.batch_counts for p in pairs])
        bins = len(visits)
        counts = {k: sum(p.counts[k] for p in pairs) for k in pairs[0].counts}
        return cls(visits / visits.sum() * bins, usage, visits, batches,
                   sum(p.steps for p in pairs), counts)

    def effective_samples(self) -> float:
        p = target_bin_probabilities(len(self.visits))
        return self.visits.sum() / max(design_effect(self.batch_counts, p), 1e-12)

    def chi_square(self):
        p = target_bin_probabilities(len(self.visits))
        return chi_square(self.visits, p, self.effective_samples())

    def usage_l1(self, min_visits: float = 1000.0):
        """Per-bin L1 distance to the balance weights on well-visited bins."""
        ref = expected_usage(len(self.visits))
        err = np.abs(self.usage_hist - ref).sum(axis=1)
        return err[self.visits >= min_visits]


def run_variant(variant: str, steps: int, seed: int, bins: int = 100,
                p_jump: float = DEFAULT_JUMP_PROB, s1: float = ONED_S1, s2: float = ONED_S2,
                n_batches: int = DEFAULT_BATCHES, bootstrap_samples: int = 10_000) -> HistogramPair:
    """Run one 1D integrator and return its state and technique-usage histograms.

    Large steps are disabled; the chain starts from a bootstrap resample.
    """
    if variant not in _VARIANT_CODE:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    if steps < 1 or bins < 1:
        raise ValueError("steps and bins must be positive")
    boot = Stream(seed, "bootstrap")
    pts = boot.uniforms(3 * bootstrap_samples).reshape(-1, 3)
    vals = np.array([_target_value(*_forward(p)) for p in pts])
    cdf = np.cumsum(vals) / vals.sum()
    start = pts[min(int(np.searchsorted(cdf, boot.uniform(), side="right")), len(pts) - 1)]

    chain = Stream(seed, f"chain-{variant}")
    n_batches = max(1, min(n_batches, steps))
    state_batches = np.zeros((n_batches, bins))
    usage = np.zeros((bins, 3))
    counts = np.zeros(7)
    _run_kernel(chain.state, start, int(steps), int(bins), _VARIANT_CODE[variant], float(p_jump),
                float(s1), float(s2), n_batches, state_batches, usage, counts)
    visits = state_batches.sum(axis=0)
    usage_hist = np.divide(usage, visits[:, None], out=np.zeros_like(usage),
                           where=visits[:, None] > 0)
    names = ("small_proposed", "small_accepted", "small_sum_r", "jump_proposed",
             "jump_accepted", "jump_sum_r", "verify_fail")
    return HistogramPair(visits / visits.sum() * bins, usage_hist, visits, state_batches,
                         int(steps), dict(zip(names, counts.tolist())))


def histogram_table(pair: HistogramPair) -> np.ndarray:
    """Rows of the CSV layout (bin_center, densities, usages, expected weights)."""
    bins = len(pair.visits)
    centers = (np.arange(bins) + 0.5) / bins
    expected_density = target_bin_probabilities(bins) * bins
    return np.column_stack([centers, pair.state_hist, expected_density, pair.usage_hist,
                            expected_usage(bins)])


CSV_HEADER = ("bin_center", "state_density", "expected_density", "usage_t1", "usage_t2",
              "usage_t3", "expected_w1", "expected_w2", "expected_w3")
