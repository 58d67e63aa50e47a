"""Reference path tracer with next-event estimation and balance-heuristic MIS."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np
from numba import njit

from ..rng import Stream, next_double
from .bdpt import KMAX_DEFAULT, area_conv, bsdf_eval, bsdf_pdf, direction, scatter_sample
from .geometry import (EMIT_CDF, EMIT_RAD, EMIT_RECT, EPS, RECT, dot, intersect, normalize,
                       prim_emitter, prim_material, prim_normal, seg3, vadd, visible, vscale)
from .scene import Scene
from .warp import camera_basis, discrete_select, film_direction, rect_area, rect_point


@njit(cache=True)
def _light_pdf_area(sc, emi):
    cdf = sc[EMIT_CDF]
    r = sc[EMIT_RECT][emi]
    return (cdf[emi + 1] - cdf[emi]) / rect_area(seg3(sc[RECT], r, 3), seg3(sc[RECT], r, 6))


@njit(cache=True)
def trace_radiance(sc, o, d, kmax, state):
    """Radiance along (o, d) over paths with at most kmax segments."""
    lr = 0.0
    lg = 0.0
    lb = 0.0
    tr = 1.0
    tg = 1.0
    tb = 1.0
    rad = sc[EMIT_RAD]
    cdf = sc[EMIT_CDF]
    has_light = cdf.shape[0] >= 2 and rad.shape[0] > 0
    t, prim = intersect(sc, o, d, EPS, 1e30)
    if prim < 0:
        return 0.0, 0.0, 0.0
    x = vadd(o, vscale(d, t))
    n = prim_normal(sc, prim, x)
    emi = prim_emitter(sc, prim)
    if emi >= 0 and dot(n, vscale(d, -1.0)) > 0.0:
        lr += rad[emi, 0]
        lg += rad[emi, 1]
        lb += rad[emi, 2]
    prev = o
    for depth in range(1, kmax):
        mat = prim_material(sc, prim)
        if emi >= 0 or not has_light:
            break
        wi = direction(x, prev)
        # light sampling
        li = discrete_select(cdf, next_double(state))
        r = sc[EMIT_RECT][li]
        p0 = seg3(sc[RECT], r, 0)
        e1 = seg3(sc[RECT], r, 3)
        e2 = seg3(sc[RECT], r, 6)
        y = rect_point(p0, e1, e2, next_double(state), next_double(state))
        ny = normalize((e1[1] * e2[2] - e1[2] * e2[1], e1[2] * e2[0] - e1[0] * e2[2],
                        e1[0] * e2[1] - e1[1] * e2[0]))
        wl = direction(x, y)
        if dot(ny, vscale(wl, -1.0)) > 0.0 and visible(sc, x, y):
            br, bg, bb = bsdf_eval(sc, mat, n, wi, wl)
            if br + bg + bb > 0.0:
                pl = _light_pdf_area(sc, li)
                conv = area_conv(x, y, ny)
                pb = bsdf_pdf(sc, mat, n, wi, wl) * conv
                g = abs(dot(n, wl)) * conv
                w = g / (pl + pb)
                lr += tr * br * rad[li, 0] * w
                lg += tg * bg * rad[li, 1] * w
                lb += tb * bb * rad[li, 2] * w
        # BSDF sampling
        ok, wo, js, ts = scatter_sample(sc, mat, n, wi, next_double(state), next_double(state),
                                        next_double(state))
        if not ok:
            break
        pdf = bsdf_pdf(sc, mat, n, wi, wo)
        if not pdf > 0.0:
            break
        br, bg, bb = bsdf_eval(sc, mat, n, wi, wo)
        c = abs(dot(n, wo)) / pdf
        tr *= br * c
        tg *= bg * c
        tb *= bb * c
        t, prim = intersect(sc, x, wo, EPS, 1e30)
        if prim < 0:
            break
        prev = x
        x = vadd(x, vscale(wo, t))
        n = prim_normal(sc, prim, x)
        emi = prim_emitter(sc, prim)
        if emi >= 0 and dot(n, vscale(wo, -1.0)) > 0.0:
            pb = pdf * area_conv(prev, x, n)
            pl = _light_pdf_area(sc, emi)
            w = pb / (pb + pl)
            lr += tr * rad[emi, 0] * w
            lg += tg * rad[emi, 1] * w
            lb += tb * rad[emi, 2] * w
    return lr, lg, lb


@njit(cache=True, nogil=True)
def render_rows(sc, rows, states, spp, kmax, image):
    cam = sc[9]
    w = int(cam[14])
    h = int(cam[15])
    pos = camera_basis(sc)[0]
    for q in range(rows.shape[0]):
        iy = rows[q]
        state = states[q]
        for ix in range(w):
            sr = 0.0
            sg = 0.0
            sb = 0.0
            for _ in range(spp):
                fx = (ix + next_double(state)) / w
                fy = (iy + next_double(state)) / h
                d = film_direction(sc, fx, fy)
                r, g, b = trace_radiance(sc, pos, d, kmax, state)
                sr += r
                sg += g
                sb += b
            image[iy, ix, 0] = sr / spp
            image[iy, ix, 1] = sg / spp
            image[iy, ix, 2] = sb / spp


def path_trace_reference(scene: Scene, spp: int, seed: int, kmax: int = KMAX_DEFAULT,
                         threads: int = 1) -> np.ndarray:
    """Mean radiance per pixel over paths of 1..kmax segments, shape (H, W, 3)."""
    if spp < 1:
        raise ValueError("spp must be >= 1")
    scene.validate(require_emitter=False)
    w, h = scene.camera.width, scene.camera.height
    image = np.zeros((h, w, 3))
    states = np.stack([Stream(seed, f"pt-row-{y}").state for y in range(h)])
    sc = scene.arrays()
    chunks = np.array_split(np.arange(h), max(1, min(threads, h)))

    def job(rows):
        render_rows(sc, rows, states[rows], spp, kmax, image)
        return rows

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(job, chunks))
    else:
        job(np.arange(h))
    return image
