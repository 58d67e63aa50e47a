"""Bidirectional path sampling techniques and their inverse random walks.

A path of length ``k`` has vertices ``x_0`` (pinhole) ... ``x_k`` (emitter).
Technique ``s`` in ``0..k+1`` takes ``s`` vertices from the light side and
``t = k+1-s`` from the camera side. The pinhole cannot be hit, so technique
``k+1`` always has zero density.

Primary sample layout for length ``k`` (``dims(k) = 8k - 1``)::

    [0, 2)                 film position
    2 + 4(m-1) + [0, 4)    eye scatter at x_m: lobe, two direction dims, spare
    L0 = 2 + 4(k-1)        light index
    L0 + [1, 3)            position on the emitter
    L0 + [3, 5)            emission direction
    L0 + 5 + 4(m-1) + ...  light scatter at y_m, same stride as the eye side

Coordinates a technique does not read are ambiguous full intervals.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from ..errors import NonInvertibleError
from ..psscore import MultiplexedState
from ..rng import Stream, next_double
from .geometry import (EMIT_CDF, EMIT_RAD, EMIT_RECT, EPS, MATS, RECT, RECT_MAT, dot, intersect,
                       normalize, prim_emitter, prim_material, prim_normal, seg3, vadd, visible,
                       vscale, vsub)
from .scene import LAMBERT, Scene
from .warp import (INV_PI, ONE_MINUS_EPS, camera_basis, camera_importance, camera_pdf,
                   cosine_hemisphere, cosine_hemisphere_inv, cosine_hemisphere_pdf, discrete_select,
                   film_direction, film_inv, film_pixel, phong_lobe, phong_lobe_inv,
                   phong_lobe_pdf, rect_area, rect_point, rect_point_inv, reflect)

STRIDE = 4
CAMERA_DIMS = 2
LIGHT_START_DIMS = 5
KMAX_DEFAULT = 10
LUM = (0.2126, 0.7152, 0.0722)


@njit(cache=True)
def dims(k):
    return CAMERA_DIMS + STRIDE * (k - 1) + LIGHT_START_DIMS + STRIDE * (k - 1)


@njit(inline="always", cache=True)
def eye_slot(m):
    return CAMERA_DIMS + STRIDE * (m - 1)


@njit(inline="always", cache=True)
def light_base(k):
    return CAMERA_DIMS + STRIDE * (k - 1)


@njit(inline="always", cache=True)
def light_slot(k, m):
    return light_base(k) + LIGHT_START_DIMS + STRIDE * (m - 1)


# -- per-vertex helpers ------------------------------------------------------

@njit(inline="always", cache=True)
def vpos(verts, i):
    return (verts[i, 0], verts[i, 1], verts[i, 2])


@njit(inline="always", cache=True)
def vnrm(verts, i):
    return (verts[i, 3], verts[i, 4], verts[i, 5])


@njit(cache=True)
def set_vertex(verts, ids, i, p, n, mat, emi):
    verts[i, 0] = p[0]
    verts[i, 1] = p[1]
    verts[i, 2] = p[2]
    verts[i, 3] = n[0]
    verts[i, 4] = n[1]
    verts[i, 5] = n[2]
    ids[i, 0] = mat
    ids[i, 1] = emi


@njit(cache=True)
def trace_vertex(sc, verts, ids, i, o, d):
    t, prim = intersect(sc, o, d, EPS, 1e30)
    if prim < 0:
        return False
    p = vadd(o, vscale(d, t))
    set_vertex(verts, ids, i, p, prim_normal(sc, prim, p), prim_material(sc, prim),
               prim_emitter(sc, prim))
    return True


@njit(cache=True)
def area_conv(p, q, nq):
    """Solid angle at p to area at q: |cos_q| / d^2."""
    d = vsub(q, p)
    d2 = dot(d, d)
    return abs(dot(nq, d)) / (math.sqrt(d2) * d2)


@njit(cache=True)
def direction(p, q):
    return normalize(vsub(q, p))


# -- BSDFs -------------------------------------------------------------------

@njit(cache=True)
def bsdf_eval(sc, m, n, wi, wo):
    ci = dot(n, wi)
    co = dot(n, wo)
    if ci * co <= 0.0:
        return 0.0, 0.0, 0.0
    mats = sc[MATS]
    r = mats[m, 1] * INV_PI
    g = mats[m, 2] * INV_PI
    b = mats[m, 3] * INV_PI
    if mats[m, 0] != LAMBERT:
        ns = n if ci > 0.0 else vscale(n, -1.0)
        e = mats[m, 7]
        c = dot(wo, reflect(wi, ns))
        if c > 0.0:
            lobe = (e + 2.0) / (2.0 * math.pi) * c ** e
            r += mats[m, 4] * lobe
            g += mats[m, 5] * lobe
            b += mats[m, 6] * lobe
    return r, g, b


@njit(cache=True)
def bsdf_pdf(sc, m, n, wi, wo):
    """Solid-angle density of sampling wo given wi (full mixture)."""
    ci = dot(n, wi)
    co = dot(n, wo)
    if ci * co <= 0.0:
        return 0.0
    ns = n if ci > 0.0 else vscale(n, -1.0)
    mats = sc[MATS]
    pd = cosine_hemisphere_pdf(ns, wo)
    if mats[m, 0] == LAMBERT:
        return pd
    ad = mats[m, 8]
    return ad * pd + (1.0 - ad) * phong_lobe_pdf(reflect(wi, ns), mats[m, 7], wo)


@njit(cache=True)
def scatter_sample(sc, m, n, wi, ul, u1, u2):
    """Returns (ok, wo, jac of the used sub-technique, its selection probability)."""
    ci = dot(n, wi)
    if ci == 0.0:
        return False, wi, 0.0, 0.0
    ns = n if ci > 0.0 else vscale(n, -1.0)
    mats = sc[MATS]
    if mats[m, 0] == LAMBERT:
        wo = cosine_hemisphere(ns, u1, u2)
        jac = cosine_hemisphere_pdf(ns, wo)
        return jac > 0.0, wo, jac, 1.0
    ad = mats[m, 8]
    e = mats[m, 7]
    axis = reflect(wi, ns)
    if ul < ad:
        wo = cosine_hemisphere(ns, u1, u2)
    else:
        wo = phong_lobe(axis, e, u1, u2)
    if not dot(ns, wo) > 0.0:
        return False, wo, 0.0, 0.0
    a0 = ad * cosine_hemisphere_pdf(ns, wo)
    a1 = (1.0 - ad) * phong_lobe_pdf(axis, e, wo)
    a = a0 if ul < ad else a1
    if not a > 0.0:
        return False, wo, 0.0, 0.0
    return True, wo, a, a / (a0 + a1)


@njit(cache=True)
def scatter_invert(sc, m, n, wi, wo, state, v, slot, fixed_t):
    """Invert one scattering step into v[slot:slot+3] (v[slot..] preset to gammas).

    ``fixed_t`` >= 0 forces the mixture sub-technique instead of drawing it.
    Returns (ok, jac of the chosen sub-technique, its selection probability).
    """
    ci = dot(n, wi)
    if ci == 0.0:
        return False, 0.0, 0.0
    ns = n if ci > 0.0 else vscale(n, -1.0)
    if not dot(ns, wo) > 0.0:
        return False, 0.0, 0.0
    mats = sc[MATS]
    if mats[m, 0] == LAMBERT:
        ok, u1, u2 = cosine_hemisphere_inv(ns, wo)
        v[slot + 1] = u1
        v[slot + 2] = u2
        return ok, cosine_hemisphere_pdf(ns, wo), 1.0
    ad = mats[m, 8]
    e = mats[m, 7]
    axis = reflect(wi, ns)
    a0 = ad * cosine_hemisphere_pdf(ns, wo)
    a1 = (1.0 - ad) * phong_lobe_pdf(axis, e, wo)
    total = a0 + a1
    if not total > 0.0:
        return False, 0.0, 0.0
    if fixed_t >= 0:
        sub = fixed_t
    else:
        sub = 0 if next_double(state) * total < a0 else 1
    if sub == 0 and a0 <= 0.0:
        sub = 1
    elif sub == 1 and a1 <= 0.0:
        sub = 0
    if sub == 0:
        ok, u1, u2 = cosine_hemisphere_inv(ns, wo)
        lo = 0.0
        width = ad
        a = a0
    else:
        ok, u1, u2 = phong_lobe_inv(axis, e, wo)
        lo = ad
        width = 1.0 - ad
        a = a1
    sel = lo + v[slot] * width
    if sel >= lo + width:
        sel = lo + width * ONE_MINUS_EPS
    v[slot] = sel
    v[slot + 1] = u1
    v[slot + 2] = u2
    return ok, a, a / total


# -- forward sampling -----------------------------------------------------

@njit(cache=True)
def sample_path(sc, k, s, u, verts, ids, ledger):
    """Build the length-k path of technique s from u.

    Returns (ok, number of ledger entries, jac, tsel): ``jac`` is the product
    of inverse-block Jacobians (area measure, sub-technique level), ``tsel``
    the product of mixture selection probabilities. ``ledger`` receives the
    per-block factors.
    """
    t = k + 1 - s
    nl = 0
    if s > k or s < 0:
        return False, nl, 0.0, 0.0
    pos, fwd, right, up, tanh, aspect = camera_basis(sc)
    set_vertex(verts, ids, 0, pos, fwd, -1, -1)
    jac = 1.0
    tsel = 1.0
    if t >= 2:
        d = film_direction(sc, u[0], u[1])
        if not trace_vertex(sc, verts, ids, 1, pos, d):
            return False, nl, 0.0, 0.0
        f = camera_pdf(sc, d) * area_conv(pos, vpos(verts, 1), vnrm(verts, 1))
        ledger[nl] = f
        nl += 1
        jac *= f
        for m in range(1, t - 1):
            xm = vpos(verts, m)
            wi = direction(xm, vpos(verts, m - 1))
            sl = eye_slot(m)
            ok, wo, js, ts = scatter_sample(sc, ids[m, 0], vnrm(verts, m), wi, u[sl], u[sl + 1],
                                            u[sl + 2])
            if not ok:
                return False, nl, 0.0, 0.0
            if not trace_vertex(sc, verts, ids, m + 1, xm, wo):
                return False, nl, 0.0, 0.0
            f = js * area_conv(xm, vpos(verts, m + 1), vnrm(verts, m + 1))
            ledger[nl] = f
            nl += 1
            jac *= f
            tsel *= ts
    if s >= 1:
        L0 = light_base(k)
        cdf = sc[EMIT_CDF]
        if cdf.shape[0] < 2:
            return False, nl, 0.0, 0.0
        li = discrete_select(cdf, u[L0])
        q = cdf[li + 1] - cdf[li]
        r = sc[EMIT_RECT][li]
        rect = sc[RECT]
        p0 = seg3(rect, r, 0)
        e1 = seg3(rect, r, 3)
        e2 = seg3(rect, r, 6)
        ne = normalize((e1[1] * e2[2] - e1[2] * e2[1], e1[2] * e2[0] - e1[0] * e2[2],
                        e1[0] * e2[1] - e1[1] * e2[0]))
        p = rect_point(p0, e1, e2, u[L0 + 1], u[L0 + 2])
        set_vertex(verts, ids, k, p, ne, sc[RECT_MAT][r], li)
        ledger[nl] = q
        ledger[nl + 1] = 1.0 / rect_area(e1, e2)
        nl += 2
        jac *= q / rect_area(e1, e2)
        if s >= 2:
            wo = cosine_hemisphere(ne, u[L0 + 3], u[L0 + 4])
            pe = cosine_hemisphere_pdf(ne, wo)
            if not pe > 0.0:
                return False, nl, 0.0, 0.0
            if not trace_vertex(sc, verts, ids, k - 1, p, wo):
                return False, nl, 0.0, 0.0
            f = pe * area_conv(p, vpos(verts, k - 1), vnrm(verts, k - 1))
            ledger[nl] = f
            nl += 1
            jac *= f
            for m in range(1, s - 1):
                idx = k - m
                xm = vpos(verts, idx)
                wi = direction(xm, vpos(verts, idx + 1))
                sl = light_slot(k, m)
                ok, wo, js, ts = scatter_sample(sc, ids[idx, 0], vnrm(verts, idx), wi, u[sl],
                                                u[sl + 1], u[sl + 2])
                if not ok:
                    return False, nl, 0.0, 0.0
                if not trace_vertex(sc, verts, ids, idx - 1, xm, wo):
                    return False, nl, 0.0, 0.0
                f = js * area_conv(xm, vpos(verts, idx - 1), vnrm(verts, idx - 1))
                ledger[nl] = f
                nl += 1
                jac *= f
                tsel *= ts
        if t == 1:
            if not visible(sc, pos, vpos(verts, 1)):
                return False, nl, 0.0, 0.0
        elif not visible(sc, vpos(verts, t - 1), vpos(verts, t)):
            return False, nl, 0.0, 0.0
    return True, nl, jac, tsel


# -- contribution and technique densities -----------------------------------

@njit(cache=True)
def path_terms(sc, k, verts, ids, pdfs, pe, pl):
    """Unoccluded contribution f (rgb), pixel index and all technique densities.

    ``pdfs[s]`` receives the area-measure density of technique s.
    Visibility of the segments is assumed, not tested.
    """
    pos = vpos(verts, 0)
    fwd = vnrm(verts, 0)
    x1 = vpos(verts, 1)
    d01 = direction(pos, x1)
    ok, fx, fy = film_inv(sc, d01)
    pix = film_pixel(sc, fx, fy) if ok else -1

    # eye-direction densities: pe[m] = density of x_m from x_{m-1}
    pe[1] = camera_pdf(sc, d01) * area_conv(pos, x1, vnrm(verts, 1))
    for m in range(1, k):
        xm = vpos(verts, m)
        nm = vnrm(verts, m)
        wi = direction(xm, vpos(verts, m - 1))
        wo = direction(xm, vpos(verts, m + 1))
        pe[m + 1] = bsdf_pdf(sc, ids[m, 0], nm, wi, wo) * area_conv(
            xm, vpos(verts, m + 1), vnrm(verts, m + 1))

    # light-direction densities: pl[m] = density of x_m from x_{m+1}
    emi = ids[k, 1]
    xk = vpos(verts, k)
    nk = vnrm(verts, k)
    if emi >= 0:
        cdf = sc[EMIT_CDF]
        r = sc[EMIT_RECT][emi]
        pl[k] = (cdf[emi + 1] - cdf[emi]) / rect_area(seg3(sc[RECT], r, 3), seg3(sc[RECT], r, 6))
    else:
        pl[k] = 0.0
    pl[0] = 0.0
    if k >= 2:
        wl = direction(xk, vpos(verts, k - 1))
        pl[k - 1] = cosine_hemisphere_pdf(nk, wl) * area_conv(xk, vpos(verts, k - 1),
                                                              vnrm(verts, k - 1))
        for m in range(k - 1, 1, -1):
            xm = vpos(verts, m)
            wi = direction(xm, vpos(verts, m + 1))
            wo = direction(xm, vpos(verts, m - 1))
            pl[m - 1] = bsdf_pdf(sc, ids[m, 0], vnrm(verts, m), wi, wo) * area_conv(
                xm, vpos(verts, m - 1), vnrm(verts, m - 1))

    # p_s = prod_{m=k-s+1..k} pl[m] * prod_{m=1..k-s} pe[m]
    prefix = 1.0
    for m in range(1, k + 1):
        prefix *= pe[m]
    pdfs[0] = prefix
    suffix = 1.0
    for s in range(1, k + 2):
        m = k - s + 1
        suffix *= pl[m]
        prefix = 1.0
        for q in range(1, k - s + 1):
            prefix *= pe[q]
        pdfs[s] = suffix * prefix

    # contribution
    wr = camera_importance(sc, d01)
    if wr == 0.0 or emi < 0:
        return 0.0, 0.0, 0.0, pix
    dl = direction(xk, vpos(verts, k - 1))
    if not dot(nk, dl) > 0.0:
        return 0.0, 0.0, 0.0, pix
    rad = sc[EMIT_RAD]
    fr = wr * rad[emi, 0]
    fg = wr * rad[emi, 1]
    fb = wr * rad[emi, 2]
    for m in range(k):
        a = vpos(verts, m)
        b = vpos(verts, m + 1)
        dv = vsub(b, a)
        d2 = dot(dv, dv)
        dn = vscale(dv, 1.0 / math.sqrt(d2))
        ca = dot(fwd, dn) if m == 0 else abs(dot(vnrm(verts, m), dn))
        g = ca * abs(dot(vnrm(verts, m + 1), dn)) / d2
        fr *= g
        fg *= g
        fb *= g
    for m in range(1, k):
        xm = vpos(verts, m)
        br, bg, bb = bsdf_eval(sc, ids[m, 0], vnrm(verts, m), direction(xm, vpos(verts, m - 1)),
                               direction(xm, vpos(verts, m + 1)))
        fr *= br
        fg *= bg
        fb *= bb
    return fr, fg, fb, pix


@njit(cache=True)
def evaluate(sc, k, s, u, verts, ids, pdfs, pe, pl, ledger, frgb):
    """Forward-sample technique s and compute its MMLT target.

    Writes F = f / sum_s p_s into ``frgb`` and returns
    (C = lum(F), pixel, jac, tsel); C is 0 for invalid paths.
    """
    ok, nl, jac, tsel = sample_path(sc, k, s, u, verts, ids, ledger)
    frgb[0] = 0.0
    frgb[1] = 0.0
    frgb[2] = 0.0
    if not ok:
        return 0.0, -1, 0.0, 0.0
    fr, fg, fb, pix = path_terms(sc, k, verts, ids, pdfs, pe, pl)
    total = 0.0
    for q in range(k + 2):
        total += pdfs[q]
    if pix < 0 or not pdfs[s] > 0.0 or not total > 0.0:
        return 0.0, -1, jac, tsel
    frgb[0] = fr / total
    frgb[1] = fg / total
    frgb[2] = fb / total
    c = LUM[0] * frgb[0] + LUM[1] * frgb[1] + LUM[2] * frgb[2]
    if not (c > 0.0 and c < 1e300):
        return 0.0, -1, jac, tsel
    return c, pix, jac, tsel


# -- inverse random walk ---------------------------------------------------

@njit(cache=True)
def invert_path(sc, k, j, verts, ids, state, v, forced):
    """Primary sample of technique j that reproduces the path.

    Unused coordinates are drawn uniformly from ``state``; mixture vertices
    choose their sub-technique by T(t) unless ``forced[vertex] >= 0``.
    Returns (ok, jac, tsel) with the same conventions as :func:`sample_path`.
    """
    o = dims(k)
    for d in range(o):
        v[d] = next_double(state)
    t = k + 1 - j
    if j > k or j < 0:
        return False, 0.0, 0.0
    jac = 1.0
    tsel = 1.0
    pos = vpos(verts, 0)
    if t >= 2:
        x1 = vpos(verts, 1)
        d = direction(pos, x1)
        ok, fx, fy = film_inv(sc, d)
        if not ok:
            return False, 0.0, 0.0
        v[0] = fx
        v[1] = fy
        jac *= camera_pdf(sc, d) * area_conv(pos, x1, vnrm(verts, 1))
        for m in range(1, t - 1):
            xm = vpos(verts, m)
            wi = direction(xm, vpos(verts, m - 1))
            wo = direction(xm, vpos(verts, m + 1))
            ok, js, ts = scatter_invert(sc, ids[m, 0], vnrm(verts, m), wi, wo, state, v,
                                        eye_slot(m), forced[m])
            if not ok:
                return False, 0.0, 0.0
            jac *= js * area_conv(xm, vpos(verts, m + 1), vnrm(verts, m + 1))
            tsel *= ts
    if j >= 1:
        L0 = light_base(k)
        emi = ids[k, 1]
        if emi < 0:
            return False, 0.0, 0.0
        cdf = sc[EMIT_CDF]
        lo = cdf[emi]
        hi = cdf[emi + 1]
        if not hi > lo:
            return False, 0.0, 0.0
        sel = lo + v[L0] * (hi - lo)
        if sel >= hi:
            sel = lo + (hi - lo) * ONE_MINUS_EPS
        v[L0] = sel
        r = sc[EMIT_RECT][emi]
        rect = sc[RECT]
        p0 = seg3(rect, r, 0)
        e1 = seg3(rect, r, 3)
        e2 = seg3(rect, r, 6)
        xk = vpos(verts, k)
        ok, a, b = rect_point_inv(p0, e1, e2, xk)
        if not ok:
            return False, 0.0, 0.0
        v[L0 + 1] = a
        v[L0 + 2] = b
        jac *= (hi - lo) / rect_area(e1, e2)
        if j >= 2:
            nk = vnrm(verts, k)
            wo = direction(xk, vpos(verts, k - 1))
            ok, u1, u2 = cosine_hemisphere_inv(nk, wo)
            if not ok:
                return False, 0.0, 0.0
            v[L0 + 3] = u1
            v[L0 + 4] = u2
            jac *= cosine_hemisphere_pdf(nk, wo) * area_conv(xk, vpos(verts, k - 1),
                                                             vnrm(verts, k - 1))
            for m in range(1, j - 1):
                idx = k - m
                xm = vpos(verts, idx)
                wi = direction(xm, vpos(verts, idx + 1))
                wo = direction(xm, vpos(verts, idx - 1))
                ok, js, ts = scatter_invert(sc, ids[idx, 0], vnrm(verts, idx), wi, wo, state, v,
                                            light_slot(k, m), forced[idx])
                if not ok:
                    return False, 0.0, 0.0
                jac *= js * area_conv(xm, vpos(verts, idx - 1), vnrm(verts, idx - 1))
                tsel *= ts
    if j >= 1:
        # the deterministic connection must be unoccluded
        if t == 1:
            if not visible(sc, pos, vpos(verts, 1)):
                return False, 0.0, 0.0
        elif not visible(sc, vpos(verts, t - 1), vpos(verts, t)):
            return False, 0.0, 0.0
    if not (jac > 0.0 and jac < 1e300):
        return False, 0.0, 0.0
    return True, jac, tsel


@njit(cache=True)
def same_path(k, a, b, tol):
    for i in range(1, k + 1):
        for c in range(3):
            if abs(a[i, c] - b[i, c]) > tol:
                return False
    return True


@njit(cache=True)
def all_visible(sc, k, verts):
    for m in range(k):
        if not visible(sc, vpos(verts, m), vpos(verts, m + 1)):
            return False
    return True


# -- Python surface -----------------------------------------------------------

@dataclass(frozen=True)
class TechniqueLayout:
    k: int

    @property
    def n_techniques(self) -> int:
        return self.k + 2

    @property
    def dims(self) -> int:
        return int(dims(self.k))

    def eye_slot(self, m: int) -> int:
        return int(eye_slot(m))

    @property
    def light_base(self) -> int:
        return int(light_base(self.k))

    def light_slot(self, m: int) -> int:
        return int(light_slot(self.k, m))

    def used_dims(self, s: int) -> np.ndarray:
        """Boolean mask of coordinates technique s reads (lobe dims counted as used)."""
        k = self.k
        t = k + 1 - s
        mask = np.zeros(self.dims, dtype=bool)
        if t >= 2:
            mask[0:2] = True
            for m in range(1, t - 1):
                mask[self.eye_slot(m):self.eye_slot(m) + 3] = True
        if s >= 1:
            L0 = self.light_base
            mask[L0:L0 + 3] = True
            if s >= 2:
                mask[L0 + 3:L0 + 5] = True
                for m in range(1, s - 1):
                    mask[self.light_slot(m):self.light_slot(m) + 3] = True
        return mask


@dataclass
class LightPath:
    """Vertices x_0 (camera) ... x_k (emitter) with normals, material and emitter ids."""

    verts: np.ndarray
    ids: np.ndarray

    @property
    def k(self) -> int:
        return self.verts.shape[0] - 1

    @property
    def positions(self) -> np.ndarray:
        return self.verts[:, :3]

    @property
    def normals(self) -> np.ndarray:
        return self.verts[:, 3:]

    def copy(self) -> "LightPath":
        return LightPath(self.verts.copy(), self.ids.copy())

    def max_distance(self, other: "LightPath") -> float:
        return float(np.max(np.abs(self.positions[1:] - other.positions[1:])))


class _Scratch:
    def __init__(self, k: int):
        self.k = k
        self.verts = np.zeros((k + 1, 6))
        self.ids = np.zeros((k + 1, 2), dtype=np.int64)
        self.pdfs = np.zeros(k + 2)
        self.pe = np.zeros(k + 2)
        self.pl = np.zeros(k + 2)
        self.ledger = np.zeros(2 * k + 4)
        self.frgb = np.zeros(3)


def _check_u(k, u):
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (dims(k),):
        raise ValueError(f"length-{k} techniques need {dims(k)} coordinates, got {u.shape}")
    return u


def bdpt_sample(scene: Scene, k: int, i: int, u):
    """Sample technique i. Returns (LightPath or None, ledger factors, p_i)."""
    u = _check_u(k, u)
    sc = scene.arrays()
    s = _Scratch(k)
    ok, nl, jac, tsel = sample_path(sc, k, i, u, s.verts, s.ids, s.ledger)
    if not ok:
        return None, [], 0.0
    path_terms(sc, k, s.verts, s.ids, s.pdfs, s.pe, s.pl)
    return LightPath(s.verts, s.ids), list(s.ledger[:nl]), float(s.pdfs[i])


def sample_ledger(scene: Scene, k: int, i: int, u):
    """(jac, tsel) of the forward random walk: sub-technique Jacobian product and T(t) product."""
    sc = scene.arrays()
    s = _Scratch(k)
    ok, nl, jac, tsel = sample_path(sc, k, i, _check_u(k, u), s.verts, s.ids, s.ledger)
    return (float(jac), float(tsel)) if ok else (0.0, 0.0)


def technique_pdfs(scene: Scene, path: LightPath) -> np.ndarray:
    """Area-measure density of every technique; zero where its connection is occluded."""
    k = path.k
    s = _Scratch(k)
    sc = scene.arrays()
    path_terms(sc, k, path.verts, path.ids, s.pdfs, s.pe, s.pl)
    pos = path.positions
    for i in range(1, k + 1):
        t = k + 1 - i
        if not visible(sc, tuple(pos[t - 1]), tuple(pos[t])):
            s.pdfs[i] = 0.0
    return s.pdfs.copy()


def technique_pdf(scene: Scene, path: LightPath, i: int) -> float:
    return float(technique_pdfs(scene, path)[i])


def mis_weights(scene: Scene, path: LightPath) -> np.ndarray:
    p = technique_pdfs(scene, path)
    total = p.sum()
    return p / total if total > 0 else np.zeros_like(p)


def mis_weight(scene: Scene, path: LightPath, i: int) -> float:
    return float(mis_weights(scene, path)[i])


def path_contribution(scene: Scene, path: LightPath) -> np.ndarray:
    """f(path) as RGB, zero if any segment is occluded."""
    sc = scene.arrays()
    if not all_visible(sc, path.k, path.verts):
        return np.zeros(3)
    s = _Scratch(path.k)
    fr, fg, fb, pix = path_terms(sc, path.k, path.verts, path.ids, s.pdfs, s.pe, s.pl)
    return np.array([fr, fg, fb])


def path_pixel(scene: Scene, path: LightPath) -> int:
    s = _Scratch(path.k)
    return int(path_terms(scene.arrays(), path.k, path.verts, path.ids, s.pdfs, s.pe, s.pl)[3])


def bdpt_invert(scene: Scene, k: int, i: int, path: LightPath, rng, forced=None):
    """Inverse random walk of technique i. Returns (u, jac_inv_det, tsel).

    ``forced`` optionally pins the mixture sub-technique per vertex (-1 = draw).
    Raises :class:`NonInvertibleError` when technique i cannot produce the path.
    """
    sc = scene.arrays()
    v = np.zeros(dims(k))
    f = np.full(k + 1, -1, dtype=np.int64) if forced is None else np.asarray(forced, dtype=np.int64)
    state = rng.state if isinstance(rng, Stream) else Stream(int(rng)).state
    ok, jac, tsel = invert_path(sc, k, i, path.verts, path.ids, state, v, f)
    if not ok:
        raise NonInvertibleError(f"technique {i} cannot produce this length-{k} path")
    return v, float(jac), float(tsel)


def forward_matches(scene: Scene, k: int, i: int, u, expected: LightPath, tol: float) -> bool:
    path, _, _ = bdpt_sample(scene, k, i, u)
    return path is not None and same_path(k, path.verts, expected.verts, tol)


class SceneContext:
    """Reversible-jump context over the length-k techniques of a scene."""

    def __init__(self, scene: Scene, k: int):
        self.scene = scene
        self.k = k
        self.n_techniques = k + 2
        self._s = _Scratch(k)

    def evaluate(self, technique: int, u) -> MultiplexedState:
        s = self._s
        u = _check_u(self.k, u)
        c, pix, jac, tsel = evaluate(self.scene.arrays(), self.k, technique, u, s.verts, s.ids,
                                     s.pdfs, s.pe, s.pl, s.ledger, s.frgb)
        total = s.pdfs.sum()
        w = s.pdfs / total if total > 0 else np.zeros_like(s.pdfs)
        path = LightPath(s.verts.copy(), s.ids.copy()) if c > 0 else None
        state = MultiplexedState(technique, u.copy(), path, float(c), w, jac=float(jac),
                                 mixture_t=float(tsel))
        state.rgb = s.frgb.copy()
        state.pixel = int(pix)
        return state

    def invert(self, technique: int, path: LightPath, rng: Stream):
        return bdpt_invert(self.scene, self.k, technique, path, rng)

    def verify(self, technique: int, u, expected: LightPath, tol: float) -> bool:
        return forward_matches(self.scene, self.k, technique, u, expected, tol)
