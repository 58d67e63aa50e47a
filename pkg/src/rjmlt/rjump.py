"""Strategy perturbations between sampling techniques.

A context object supplies the model-specific pieces:

``evaluate(technique, u) -> MultiplexedState``
    forward-sample and cache target value, MIS weights and forward ledger
``invert(technique, path, rng) -> (v, jac_inv_det, mixture_t)``
    inverse random walk; raises :class:`NonInvertibleError`
``verify(technique, v, path, tol) -> bool``
``n_techniques``

Both the 1D harness and the renderer provide one.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .errors import InvalidStateError, NonInvertibleError, NumericError
from .psscore import MultiplexedState
from .rng import as_stream

VERIFY_TOL = 1e-6
OPTIMAL_TOL = 1e-9


@dataclass
class JumpRecord:
    from_technique: int
    to_technique: int
    aux: tuple = ()
    forward_jac: float = float("nan")
    inverse_jac: float = float("nan")
    mixture_factor: float = float("nan")
    acceptance: float = 0.0
    verified: bool = False
    accepted: bool = False
    reason: str = ""

    def to_json(self) -> str:
        d = asdict(self)
        d["aux"] = [float(a) for a in self.aux]
        for key in ("forward_jac", "inverse_jac", "mixture_factor"):
            if not math.isfinite(d[key]):
                d[key] = None
        return json.dumps(d, sort_keys=True)


def choose_proposal_technique(weights, rng) -> int:
    """Draw j with probability proportional to ``weights[j]``."""
    w = np.asarray(weights, dtype=np.float64)
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise InvalidStateError(f"invalid proposal weights {w}")
    total = w.sum()
    if not total > 0.0:
        raise InvalidStateError("all proposal weights are zero")
    xi = as_stream(rng).uniform() * total
    cdf = np.cumsum(w)
    j = int(np.searchsorted(cdf, xi, side="right"))
    j = min(j, len(w) - 1)
    while w[j] == 0.0:
        j -= 1
    return j


def rj_acceptance(c_from, c_to, t_fwd, t_rev, jac_from_inverse, jac_to_inverse,
                  mixture_factor=1.0) -> float:
    """min{1, c_to T(j->i) |J S_j^-1| / (c_from T(i->j) |J S_i^-1|) * mixture_factor}."""
    terms = (c_from, c_to, t_fwd, t_rev, jac_from_inverse, jac_to_inverse, mixture_factor)
    if not all(math.isfinite(float(x)) for x in terms):
        raise NumericError(f"non-finite term in jump acceptance: {terms}")
    if c_from <= 0 or t_fwd <= 0 or jac_from_inverse <= 0:
        raise NumericError("zero denominator in jump acceptance")
    if jac_to_inverse <= 0 or mixture_factor <= 0:
        raise NumericError("non-positive Jacobian or mixture factor")
    r = (c_to * t_rev * jac_to_inverse) / (c_from * t_fwd * jac_from_inverse) * mixture_factor
    return min(1.0, max(0.0, r))


def forward_verify(context, technique: int, u, expected, tol: float = VERIFY_TOL) -> bool:
    """True iff sampling ``u`` with ``technique`` reproduces ``expected`` within ``tol``."""
    try:
        return bool(context.verify(technique, u, expected, tol))
    except NonInvertibleError:
        return False


def naive_technique_perturbation(state: MultiplexedState, context, rng, j: Optional[int] = None):
    """Keep u, switch technique (uniform proposal). Returns ``(proposal, acceptance)``."""
    rng = as_stream(rng)
    if j is None:
        j = int(rng.uniform() * context.n_techniques)
        j = min(j, context.n_techniques - 1)
    if j == state.technique:
        return state, 1.0
    proposal = context.evaluate(j, state.u)
    if not state.target_value > 0.0:
        raise InvalidStateError("current state has zero contribution")
    return proposal, min(1.0, proposal.target_value / state.target_value)


def reversible_jump(state: MultiplexedState, context, rng, tol: float = VERIFY_TOL,
                    debug: bool = False):
    """One reversible jump. Returns ``(next_state, JumpRecord)``.

    The proposal keeps the path: v = S_j^-1(S_i(u)). Inverse failures and
    verification mismatches reject the jump and return ``state`` unchanged.
    """
    rng = as_stream(rng)
    if not state.target_value > 0.0:
        raise InvalidStateError("current state has zero contribution")
    w = np.asarray(state.mis_weights, dtype=np.float64)
    i = state.technique
    j = choose_proposal_technique(w, rng)
    rec = JumpRecord(i, j)
    try:
        v, jac_v, t_v = context.invert(j, state.path, rng)
        rec.aux = tuple(getattr(context, "last_aux", ()))
    except NonInvertibleError as exc:
        rec.reason = f"non-invertible: {exc}"
        return state, rec
    if not forward_verify(context, j, v, state.path, tol):
        rec.reason = "verification failed"
        return state, rec
    rec.verified = True
    proposal = context.evaluate(j, v)
    wv = np.asarray(proposal.mis_weights, dtype=np.float64)
    rec.forward_jac = 1.0 / state.jac
    rec.inverse_jac = jac_v
    rec.mixture_factor = state.mixture_t / t_v
    try:
        r = rj_acceptance(state.target_value, proposal.target_value, w[j] / w.sum(),
                          wv[i] / wv.sum(), state.jac, jac_v, rec.mixture_factor)
    except NumericError as exc:
        rec.verified = False
        rec.reason = f"numeric: {exc}"
        return state, rec
    rec.acceptance = r
    if debug and abs(r - 1.0) > OPTIMAL_TOL:
        raise AssertionError(f"optimal jump acceptance violated: r={r!r}")
    if rng.uniform() < r:
        rec.accepted = True
        return proposal, rec
    return state, rec
