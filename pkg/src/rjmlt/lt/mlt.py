"""Multiplexed MLT and its reversible-jump extension, one chain per path length."""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from ..errors import InitializationError
from ..psscore import (BOOTSTRAP_SAMPLES, DEFAULT_S1, DEFAULT_S2, ChainStats, PerturbationMix,
                       kelemen_mutate, uniform_fill)
from ..rng import Stream, next_double
from .bdpt import (KMAX_DEFAULT, LUM, dims, evaluate, invert_path, path_terms, same_path,
                   sample_path)
from .scene import Scene

log = logging.getLogger(__name__)

ALGORITHMS = ("mmlt", "rjmlt")
VERIFY_TOL = 1e-6
OPTIMAL_TOL = 1e-9

# layout of the per-chain counter vector
(C_LARGE, C_LARGE_ACC, C_LARGE_R, C_SMALL, C_SMALL_ACC, C_SMALL_R, C_JUMP, C_JUMP_ACC, C_JUMP_R,
 C_JUMP_FAIL, C_TECH, C_TECH_ACC, C_TECH_R, C_JCHG, C_JCHG_ACC, C_JCHG_R, C_MAXDEV, C_NDEV,
 C_NONINV) = range(19)
N_COUNTERS = 19
TRACE_COLS = 8  # from, to, forward_jac, inverse_jac, mixture_factor, acceptance, verified, accepted


@njit(cache=True)
def technique_of(sel, k):
    j = int(sel * (k + 2))
    return min(j, k + 1)


@njit(cache=True)
def bootstrap_kernel(sc, k, n, state, us, cs):
    o = dims(k)
    verts = np.zeros((k + 1, 6))
    ids = np.zeros((k + 1, 2), dtype=np.int64)
    pdfs = np.zeros(k + 2)
    pe = np.zeros(k + 2)
    pl = np.zeros(k + 2)
    ledger = np.zeros(2 * k + 4)
    frgb = np.zeros(3)
    for m in range(n):
        uniform_fill(state, us[m])
        c, pix, jac, ts = evaluate(sc, k, technique_of(us[m, o], k), us[m, :o], verts, ids, pdfs,
                                   pe, pl, ledger, frgb)
        cs[m] = c


@njit(cache=True, nogil=True)
def chain_kernel(sc, k, rjmlt, steps, mix, s1, s2, state, u0, image, counts, trace, debug):
    o = dims(k)
    n = o + 1
    cu = u0.copy()
    pu = np.zeros(n)
    cv = np.zeros((k + 1, 6))
    pv = np.zeros((k + 1, 6))
    ci = np.zeros((k + 1, 2), dtype=np.int64)
    pi = np.zeros((k + 1, 2), dtype=np.int64)
    cp = np.zeros(k + 2)
    pp = np.zeros(k + 2)
    pe = np.zeros(k + 2)
    pl = np.zeros(k + 2)
    ledger = np.zeros(2 * k + 4)
    cf = np.zeros(3)
    pf = np.zeros(3)
    forced = np.full(k + 1, -1, dtype=np.int64)
    ctech = technique_of(cu[o], k)
    cc, cpix, cjac, cts = evaluate(sc, k, ctech, cu[:o], cv, ci, cp, pe, pl, ledger, cf)
    if not cc > 0.0:
        return -1
    p_large = mix[0]
    p_small = mix[1]
    if not rjmlt:
        total = mix[0] + mix[1]
        p_large = mix[0] / total
        p_small = mix[1] / total
    ntrace = 0
    cap = trace.shape[0]
    for it in range(steps):
        xi = next_double(state)
        kind = 0
        r = 0.0
        pc = 0.0
        ppix = -1
        pjac = 0.0
        pts = 0.0
        ptech = ctech
        if xi < p_large:
            uniform_fill(state, pu)
            ptech = technique_of(pu[o], k)
            pc, ppix, pjac, pts = evaluate(sc, k, ptech, pu[:o], pv, pi, pp, pe, pl, ledger, pf)
            r = min(1.0, pc / cc)
        elif xi < p_large + p_small:
            kind = 1
            if rjmlt:
                kelemen_mutate(state, cu[:o], pu[:o], s1, s2)
                pu[o] = cu[o]
            else:
                kelemen_mutate(state, cu, pu, s1, s2)
                ptech = technique_of(pu[o], k)
            pc, ppix, pjac, pts = evaluate(sc, k, ptech, pu[:o], pv, pi, pp, pe, pl, ledger, pf)
            r = min(1.0, pc / cc)
        else:
            kind = 2
            total = 0.0
            for q in range(k + 2):
                total += cp[q]
            x = next_double(state) * total
            ptech = 0
            acc = cp[0]
            while ptech < k + 1 and (acc <= x or cp[ptech] == 0.0):
                ptech += 1
                acc += cp[ptech]
            verified = False
            ok, pjac, pts = invert_path(sc, k, ptech, cv, ci, state, pu, forced)
            pu[o] = cu[o]
            if ok:
                okf, nl, fj, ft = sample_path(sc, k, ptech, pu[:o], pv, pi, ledger)
                verified = okf and same_path(k, pv, cv, VERIFY_TOL)
            else:
                counts[C_NONINV] += 1.0
            if verified:
                # the jump keeps the path: evaluate the proposal on the stored vertices
                pv[:, :] = cv
                pi[:, :] = ci
                pp[:] = cp
                pf[:] = cf
                pc = cc
                ppix = cpix
                raw = (pc * cp[ctech] * pjac * cts) / (cc * cp[ptech] * cjac * pts)
                dev = abs(raw - 1.0)
                if dev > counts[C_MAXDEV]:
                    counts[C_MAXDEV] = dev
                if dev > OPTIMAL_TOL:
                    counts[C_NDEV] += 1.0
                    if debug:
                        raise AssertionError("optimal jump acceptance violated")
                r = min(1.0, raw) if raw == raw else 0.0
            else:
                counts[C_JUMP_FAIL] += 1.0
                r = 0.0
            if ntrace < cap:
                trace[ntrace, 0] = ctech
                trace[ntrace, 1] = ptech
                trace[ntrace, 2] = 1.0 / cjac
                trace[ntrace, 3] = pjac if verified else np.nan
                trace[ntrace, 4] = cts / pts if verified else np.nan
                trace[ntrace, 5] = r
                trace[ntrace, 6] = 1.0 if verified else 0.0
        # expected-value splatting
        if r > 0.0 and ppix >= 0:
            w = r / pc
            image[ppix, 0] += w * pf[0]
            image[ppix, 1] += w * pf[1]
            image[ppix, 2] += w * pf[2]
        if r < 1.0:
            w = (1.0 - r) / cc
            image[cpix, 0] += w * cf[0]
            image[cpix, 1] += w * cf[1]
            image[cpix, 2] += w * cf[2]
        accepted = next_double(state) < r
        base = 3 * kind
        counts[base] += 1.0
        counts[base + 2] += r
        if accepted:
            counts[base + 1] += 1.0
        if kind == 1 and ptech != ctech:
            counts[C_TECH] += 1.0
            counts[C_TECH_R] += r
            if accepted:
                counts[C_TECH_ACC] += 1.0
        if kind == 2:
            if ptech != ctech:
                counts[C_JCHG] += 1.0
                counts[C_JCHG_R] += r
                if accepted:
                    counts[C_JCHG_ACC] += 1.0
            if ntrace < cap:
                trace[ntrace, 7] = 1.0 if accepted else 0.0
                ntrace += 1
        if accepted:
            cu[:] = pu
            cv[:, :] = pv
            ci[:, :] = pi
            cp[:] = pp
            cf[:] = pf
            cc = pc
            cpix = ppix
            cjac = pjac
            cts = pts
            ctech = ptech
    return ntrace


@dataclass
class LengthResult:
    k: int
    brightness: float
    mutations: int
    counts: np.ndarray
    trace: np.ndarray
    image: np.ndarray = field(repr=False)


@dataclass
class RenderResult:
    image: np.ndarray
    stats: ChainStats
    lengths: list
    brightness: float

    def jump_records(self):
        """Traced jumps as dicts (empty unless tracing was requested)."""
        out = []
        for res in self.lengths:
            for row in res.trace:
                out.append({
                    "length": res.k, "from_technique": int(row[0]), "to_technique": int(row[1]),
                    "forward_jac": _finite(row[2]), "inverse_jac": _finite(row[3]),
                    "mixture_factor": _finite(row[4]), "acceptance": float(row[5]),
                    "verified": bool(row[6]), "accepted": bool(row[7])})
        return out

    def stats_dict(self) -> dict:
        per = {}
        for res in self.lengths:
            c = res.counts
            per[str(res.k)] = {
                "mutations": res.mutations,
                "brightness": res.brightness,
                "large": _counter(c, C_LARGE),
                "small": _counter(c, C_SMALL),
                "small_technique_change": _counter(c, C_TECH),
                "jump": dict(_counter(c, C_JUMP), verified_fail=int(c[C_JUMP_FAIL]),
                             non_invertible=int(c[C_NONINV]),
                             max_acceptance_deviation=float(c[C_MAXDEV]),
                             deviations_over_tol=int(c[C_NDEV])),
                "jump_technique_change": _counter(c, C_JCHG),
            }
        return per


def _finite(x):
    return float(x) if np.isfinite(x) else None


def _counter(c, base):
    n = int(c[base])
    return {"proposed": n, "accepted": int(c[base + 1]),
            "mean_acceptance": float(c[base + 2] / n) if n else None}


def allocate(budget: int, weights) -> np.ndarray:
    """Split an integer budget proportionally to weights (largest remainder)."""
    w = np.asarray(weights, dtype=np.float64)
    if not w.sum() > 0:
        raise InitializationError("no path length carries any contribution")
    exact = budget * w / w.sum()
    out = np.floor(exact).astype(np.int64)
    rest = budget - int(out.sum())
    order = np.argsort(-(exact - out), kind="stable")
    out[order[:rest]] += 1
    return out


def bootstrap_length(scene: Scene, k: int, seed: int, n: int):
    """Returns (brightness b_k, start vector) for the length-k chain."""
    sc = scene.arrays()
    us = np.zeros((n, dims(k) + 1))
    cs = np.zeros(n)
    bootstrap_kernel(sc, k, n, Stream(seed, f"bootstrap-{k}").state, us, cs)
    b = (k + 2) * cs.mean()
    if not b > 0:
        return 0.0, None
    cdf = np.cumsum(cs)
    pick = int(np.searchsorted(cdf, Stream(seed, f"start-{k}").uniform() * cdf[-1], side="right"))
    pick = min(pick, n - 1)
    while cs[pick] == 0.0:
        pick -= 1
    return float(b), us[pick].copy()


def _run_length(scene, k, algorithm, steps, mix, seed, s1, s2, u0, trace_cap, debug):
    sc = scene.arrays()
    image = np.zeros((scene.n_pixels, 3))
    counts = np.zeros(N_COUNTERS)
    trace = np.zeros((trace_cap, TRACE_COLS))
    state = Stream(seed, f"chain-{k}").state
    n = chain_kernel(sc, k, algorithm == "rjmlt", steps, mix.as_array(), s1, s2, state, u0, image,
                     counts, trace, debug)
    if n < 0:
        raise InitializationError(f"start state of length {k} has zero contribution")
    return image, counts, trace[:n]


def mlt_render(scene: Scene, algorithm: str = "rjmlt", mutations: int = 1_000_000,
               mix: PerturbationMix = PerturbationMix(), seed: int = 0, kmax: int = KMAX_DEFAULT,
               s1: float = DEFAULT_S1, s2: float = DEFAULT_S2,
               bootstrap_samples: int = BOOTSTRAP_SAMPLES, threads: int = 1,
               trace_jumps: int = 0, debug: bool = False) -> RenderResult:
    """Render with one Markov chain per path length 1..kmax.

    ``mmlt`` ignores the jump share of ``mix`` (large/small renormalized) and
    lets small steps move the technique coordinate; ``rjmlt`` keeps the
    technique explicit and adds reversible jumps. ``trace_jumps`` caps the
    number of jump records kept per length.
    """
    if algorithm not in ALGORITHMS:
        raise ValueError(f"algorithm must be one of {ALGORITHMS}, got {algorithm!r}")
    if mutations < bootstrap_samples:
        raise ValueError(f"mutations ({mutations}) must be at least the bootstrap size "
                         f"({bootstrap_samples})")
    if kmax < 1:
        raise ValueError("kmax must be >= 1")
    scene.validate()
    ks = list(range(1, kmax + 1))
    boot = [bootstrap_length(scene, k, seed, bootstrap_samples) for k in ks]
    b = np.array([x[0] for x in boot])
    if not b.sum() > 0:
        raise InitializationError("bootstrap found no light-carrying path")
    budget = allocate(mutations, b)
    log.info("bootstrap brightness per length: %s", np.round(b, 6).tolist())

    def job(idx):
        k = ks[idx]
        if budget[idx] == 0 or boot[idx][1] is None:
            return (np.zeros((scene.n_pixels, 3)), np.zeros(N_COUNTERS),
                    np.zeros((0, TRACE_COLS)))
        return _run_length(scene, k, algorithm, int(budget[idx]), mix, seed, s1, s2, boot[idx][1],
                           trace_jumps, debug)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outs = list(pool.map(job, range(len(ks))))
    else:
        outs = [job(i) for i in range(len(ks))]

    npix = scene.n_pixels
    total = np.zeros((npix, 3))
    stats = ChainStats()
    lengths = []
    for idx, (img, counts, trace) in enumerate(outs):
        k = ks[idx]
        n = int(budget[idx])
        if n > 0:
            img = img * (b[idx] * npix / n)
        total += img
        lengths.append(LengthResult(k, float(b[idx]), n, counts, trace, img))
        for kind, base in (("large", C_LARGE), ("small", C_SMALL), ("jump", C_JUMP),
                           ("small_technique_change", C_TECH), ("jump_technique_change", C_JCHG)):
            stats.add_counts(k, kind, counts[base], counts[base + 1], counts[base + 2])
    w, h = scene.camera.resolution
    return RenderResult(total.reshape(h, w, 3), stats, lengths, float(b.sum()))


def path_state(scene: Scene, k: int, verts, ids):
    """(C, pixel, rgb F) of a stored path, without re-tracing."""
    pdfs = np.zeros(k + 2)
    pe = np.zeros(k + 2)
    pl = np.zeros(k + 2)
    fr, fg, fb, pix = path_terms(scene.arrays(), k, verts, ids, pdfs, pe, pl)
    total = pdfs.sum()
    if not total > 0 or pix < 0:
        return 0.0, -1, np.zeros(3)
    f = np.array([fr, fg, fb]) / total
    return float(np.dot(LUM, f)), int(pix), f
