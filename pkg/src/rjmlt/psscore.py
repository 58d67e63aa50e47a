"""Primary sample space: random vectors, Kelemen mutations and a generic MH driver."""
from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

import numpy as np
from numba import njit

from .errors import InitializationError, InvalidStateError
from .rng import Stream, as_stream, next_double

DEFAULT_S1 = 1.0 / 64.0
DEFAULT_S2 = 1.0 / 1024.0
BOOTSTRAP_SAMPLES = 10_000


def random_vector(values) -> np.ndarray:
    """Validate and return a point of the unit hypercube as a float64 array."""
    u = np.array(values, dtype=np.float64).reshape(-1)
    if u.size == 0:
        raise ValueError("random vector must have at least one dimension")
    if not np.all((u >= 0.0) & (u < 1.0)):
        raise ValueError("random vector elements must lie in [0, 1)")
    return u


@dataclass(frozen=True)
class PerturbationMix:
    """Probabilities of proposing a large step, a small step or a reversible jump."""

    p_large: float = 0.10
    p_small: float = 0.85
    p_jump: float = 0.05

    def __post_init__(self):
        probs = (self.p_large, self.p_small, self.p_jump)
        if any(p < 0 or not math.isfinite(p) for p in probs):
            raise ValueError(f"perturbation probabilities must be nonnegative: {probs}")
        if abs(sum(probs) - 1.0) > 1e-9:
            raise ValueError(f"perturbation probabilities must sum to 1, got {sum(probs)}")

    @classmethod
    def parse(cls, text: str) -> "PerturbationMix":
        """Parse ``"large,small,jump"``, e.g. ``"0.1,0.85,0.05"``."""
        parts = [float(p) for p in text.split(",")]
        if len(parts) != 3:
            raise ValueError(f"mix needs three comma-separated values, got {text!r}")
        return cls(*parts)

    def as_array(self) -> np.ndarray:
        return np.array([self.p_large, self.p_small, self.p_jump])


@dataclass
class MultiplexedState:
    """Chain state: explicit technique index plus its random vector.

    ``path`` is whatever the evaluating context produces for ``(technique, u)``;
    ``target_value`` caches ``C_i(u) = w_i f_i / p_i``.
    """

    technique: int
    u: np.ndarray
    path: Any = None
    target_value: float = 0.0
    mis_weights: Optional[np.ndarray] = None
    # product of inverse-block Jacobians of the sub-techniques actually used,
    # and product of the selection probabilities T(t) of those sub-techniques
    jac: float = 1.0
    mixture_t: float = 1.0


# -- mutations -------------------------------------------------------------

@njit(cache=True)
def wrap_unit(x):
    x = x - math.floor(x)
    if x >= 1.0:
        x = 0.0
    return x


@njit(cache=True)
def kelemen_offset(state, s1, s2):
    """Signed offset with magnitude s1 * exp(-ln(s1/s2) * xi)."""
    r = next_double(state)
    if r < 0.5:
        return s1 * math.exp(-math.log(s1 / s2) * (2.0 * r))
    return -s1 * math.exp(-math.log(s1 / s2) * (2.0 * r - 1.0))


@njit(cache=True)
def kelemen_mutate(state, u, out, s1, s2):
    for d in range(u.shape[0]):
        out[d] = wrap_unit(u[d] + kelemen_offset(state, s1, s2))


@njit(cache=True)
def uniform_fill(state, out):
    for d in range(out.shape[0]):
        out[d] = next_double(state)


def large_step(rng, dim: int) -> np.ndarray:
    """Independent uniform point in [0,1)^dim."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    rng = as_stream(rng)
    out = np.empty(int(dim))
    uniform_fill(rng.state, out)
    return out


def apply_offset(u, offsets) -> np.ndarray:
    """Shift ``u`` by ``offsets`` and wrap back into [0, 1)."""
    u = np.asarray(u, dtype=np.float64)
    out = np.asarray(u + offsets, dtype=np.float64)
    out = out - np.floor(out)
    out[out >= 1.0] = 0.0
    return out


def small_step(rng, u, s1: float = DEFAULT_S1, s2: float = DEFAULT_S2) -> np.ndarray:
    """Kelemen exponential mutation of every coordinate, wrapped on [0,1)."""
    if not (0.0 < s2 < s1 < 1.0):
        raise ValueError(f"need 0 < s2 < s1 < 1, got s1={s1}, s2={s2}")
    rng = as_stream(rng)
    u = np.asarray(u, dtype=np.float64)
    out = np.empty_like(u)
    kelemen_mutate(rng.state, u, out, s1, s2)
    return out


@njit(cache=True)
def _mh(c_current, c_proposed, t_forward, t_reverse, jacobian):
    r = (c_proposed * t_reverse * jacobian) / (c_current * t_forward)
    if r >= 1.0:
        return 1.0
    if r > 0.0:
        return r
    return 0.0


def mh_acceptance(c_current, c_proposed, t_forward=1.0, t_reverse=1.0, jacobian=1.0) -> float:
    """min{1, c' T(y->x) |J| / (c T(x->y))}."""
    if not c_current > 0.0:
        raise InvalidStateError("current state has zero contribution")
    if c_proposed < 0 or t_forward <= 0 or t_reverse < 0 or jacobian < 0:
        raise ValueError("negative contribution, proposal density or Jacobian")
    return float(_mh(float(c_current), float(c_proposed), float(t_forward),
                     float(t_reverse), float(jacobian)))


# -- statistics ------------------------------------------------------------

PERTURBATION_TYPES = ("large", "small", "jump")


@dataclass
class _Counter:
    proposed: int = 0
    accepted: int = 0
    sum_r: float = 0.0

    def record(self, r: float, accepted: bool):
        self.proposed += 1
        self.accepted += int(accepted)
        self.sum_r += r

    @property
    def mean_r(self) -> float:
        return self.sum_r / self.proposed if self.proposed else 0.0

    def as_dict(self) -> dict:
        return {"proposed": self.proposed, "accepted": self.accepted, "mean_r": self.mean_r}


@dataclass
class ChainStats:
    """Acceptance counts per perturbation type, keyed additionally by path length."""

    per_length: dict = field(default_factory=lambda: defaultdict(lambda: defaultdict(_Counter)))

    def record(self, kind: str, r: float, accepted: bool, length: int = 0):
        self.per_length[length][kind].record(r, accepted)

    def add_counts(self, length: int, kind: str, proposed: int, accepted: int, sum_r: float):
        c = self.per_length[length][kind]
        c.proposed += int(proposed)
        c.accepted += int(accepted)
        c.sum_r += float(sum_r)

    def counter(self, kind: str, length: int = 0) -> _Counter:
        return self.per_length[length][kind]

    def acceptance_rate(self, kind: str, length: int = 0) -> float:
        c = self.per_length[length][kind]
        return c.accepted / c.proposed if c.proposed else float("nan")

    def mean_r(self, kind: str, length: int = 0) -> float:
        return self.per_length[length][kind].mean_r

    def merge(self, other: "ChainStats") -> "ChainStats":
        for k, kinds in other.per_length.items():
            for kind, c in kinds.items():
                self.add_counts(k, kind, c.proposed, c.accepted, c.sum_r)
        return self

    def to_dict(self) -> dict:
        return {
            str(k): {kind: self.per_length[k][kind].as_dict() for kind in sorted(self.per_length[k])}
            for k in sorted(self.per_length)
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


class HistogramAccumulator:
    """Expected-value splat sink: histogram of one coordinate of ``u``."""

    def __init__(self, bins: int = 100, coordinate: int = 0):
        self.bins = int(bins)
        self.coordinate = coordinate
        self.counts = np.zeros(self.bins)
        self.total = 0.0

    def splat(self, u, weight: float):
        if weight <= 0.0:
            return
        b = min(int(u[self.coordinate] * self.bins), self.bins - 1)
        self.counts[b] += weight
        self.total += weight

    def density(self) -> np.ndarray:
        return self.counts / self.total * self.bins


# -- generic driver -------------------------------------------------------

def bootstrap(target: Callable, dim: int, rng: Stream, n: int = BOOTSTRAP_SAMPLES):
    """Draw ``n`` uniform points; return (start point, mean target value).

    The start point is resampled proportionally to the target value.
    """
    values = np.empty(n)
    points = np.empty((n, dim))
    for s in range(n):
        points[s] = large_step(rng, dim)
        values[s] = target(points[s])
    total = values.sum()
    if not total > 0.0:
        raise InitializationError(
            f"all {n} bootstrap samples have zero contribution; nothing to sample")
    cdf = np.cumsum(values) / total
    pick = int(np.searchsorted(cdf, rng.uniform(), side="right"))
    pick = min(pick, n - 1)
    return points[pick].copy(), total / n


def run_chain(target: Callable, perturbations: PerturbationMix, steps: int, seed: int,
              accumulator, dim: int = 1, jump: Optional[Callable] = None,
              s1: float = DEFAULT_S1, s2: float = DEFAULT_S2,
              bootstrap_samples: int = BOOTSTRAP_SAMPLES) -> ChainStats:
    """Run ``steps`` Metropolis-Hastings iterations on ``target`` over [0,1)^dim.

    ``jump(u, rng) -> (v, r)`` supplies the jump proposal together with its
    acceptance probability; it is required when ``perturbations.p_jump > 0``.
    Every iteration splats the proposal with weight r and the current state
    with weight 1 - r.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if perturbations.p_jump > 0 and jump is None:
        raise ValueError("jump perturbations requested but no jump proposal given")
    rng_boot = Stream(seed, "bootstrap")
    rng = Stream(seed, "chain")
    u, _ = bootstrap(target, dim, rng_boot, bootstrap_samples)
    c = target(u)
    stats = ChainStats()
    for _ in range(steps):
        xi = rng.uniform()
        if xi < perturbations.p_large:
            kind = "large"
            v = large_step(rng, dim)
            r = mh_acceptance(c, target(v))
        elif xi < perturbations.p_large + perturbations.p_small:
            kind = "small"
            v = small_step(rng, u, s1, s2)
            r = mh_acceptance(c, target(v))
        else:
            kind = "jump"
            v, r = jump(u, rng)
        accumulator.splat(v, r)
        accumulator.splat(u, 1.0 - r)
        accepted = rng.uniform() < r
        stats.record(kind, r, accepted)
        if accepted:
            u = v
            c = target(u)
    return stats
