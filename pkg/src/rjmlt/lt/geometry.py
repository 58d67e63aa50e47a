"""Vector helpers and ray/primitive intersection (spheres, parallelograms).

Scene data reaches jitted code as the tuple built by
:meth:`rjmlt.lt.scene.Scene.arrays`; primitive ids number the spheres first,
then the rectangles.
"""
import math

import numpy as np
from numba import njit

EPS = 1e-4
INF = 1e30

# indices into the scene tuple
SPH, SPH_MAT, RECT, RECT_MAT, RECT_EMIT, MATS, EMIT_RECT, EMIT_RAD, EMIT_CDF, CAM = range(10)


@njit(inline="always", cache=True)
def vsub(a, b):
    return (a[0] - b[0], a[1] - b[1], a[2] - b[2])


@njit(inline="always", cache=True)
def vadd(a, b):
    return (a[0] + b[0], a[1] + b[1], a[2] + b[2])


@njit(inline="always", cache=True)
def vscale(a, s):
    return (a[0] * s, a[1] * s, a[2] * s)


@njit(inline="always", cache=True)
def dot(a, b):
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


@njit(inline="always", cache=True)
def cross(a, b):
    return (a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0])


@njit(inline="always", cache=True)
def norm(a):
    return math.sqrt(dot(a, a))


@njit(inline="always", cache=True)
def normalize(a):
    n = norm(a)
    return (a[0] / n, a[1] / n, a[2] / n)


@njit(inline="always", cache=True)
def row3(arr, i):
    return (arr[i, 0], arr[i, 1], arr[i, 2])


@njit(inline="always", cache=True)
def seg3(arr, i, off):
    return (arr[i, off], arr[i, off + 1], arr[i, off + 2])


@njit(cache=True)
def intersect_sphere(c, r, o, d, tmin, tmax):
    oc = vsub(o, c)
    b = dot(oc, d)
    cc = dot(oc, oc) - r * r
    disc = b * b - cc
    if disc < 0.0:
        return INF
    s = math.sqrt(disc)
    t = -b - s
    if t > tmin and t < tmax:
        return t
    t = -b + s
    if t > tmin and t < tmax:
        return t
    return INF


@njit(cache=True)
def intersect_rect(p0, e1, e2, o, d, tmin, tmax):
    n = cross(e1, e2)
    denom = dot(n, d)
    if abs(denom) < 1e-14:
        return INF
    t = dot(n, vsub(p0, o)) / denom
    if not (t > tmin and t < tmax):
        return INF
    q = vsub(vadd(o, vscale(d, t)), p0)
    a = dot(q, e1) / dot(e1, e1)
    b = dot(q, e2) / dot(e2, e2)
    if a < 0.0 or a > 1.0 or b < 0.0 or b > 1.0:
        return INF
    return t


@njit(cache=True)
def intersect(sc, o, d, tmin, tmax):
    """Nearest hit in (tmin, tmax): returns (t, primitive id) or (INF, -1)."""
    best = tmax
    prim = -1
    sph = sc[SPH]
    for i in range(sph.shape[0]):
        t = intersect_sphere((sph[i, 0], sph[i, 1], sph[i, 2]), sph[i, 3], o, d, tmin, best)
        if t < best:
            best = t
            prim = i
    rect = sc[RECT]
    ns = sph.shape[0]
    for i in range(rect.shape[0]):
        t = intersect_rect(seg3(rect, i, 0), seg3(rect, i, 3), seg3(rect, i, 6), o, d, tmin, best)
        if t < best:
            best = t
            prim = ns + i
    if prim < 0:
        return INF, -1
    return best, prim


@njit(cache=True)
def visible(sc, p, q):
    """True if the open segment between two surface points is unoccluded."""
    dvec = vsub(q, p)
    dist = norm(dvec)
    if dist < 2.0 * EPS:
        return False
    d = vscale(dvec, 1.0 / dist)
    t, prim = intersect(sc, p, d, EPS, dist - EPS)
    return prim < 0


@njit(cache=True)
def prim_normal(sc, prim, p):
    sph = sc[SPH]
    ns = sph.shape[0]
    if prim < ns:
        return normalize(vsub(p, (sph[prim, 0], sph[prim, 1], sph[prim, 2])))
    rect = sc[RECT]
    r = prim - ns
    return normalize(cross(seg3(rect, r, 3), seg3(rect, r, 6)))


@njit(cache=True)
def prim_material(sc, prim):
    ns = sc[SPH].shape[0]
    if prim < ns:
        return sc[SPH_MAT][prim]
    return sc[RECT_MAT][prim - ns]


@njit(cache=True)
def prim_emitter(sc, prim):
    ns = sc[SPH].shape[0]
    if prim < ns:
        return -1
    return sc[RECT_EMIT][prim - ns]


def intersect_brute(scene_arrays, o, d, tmin=EPS, tmax=INF):
    """Reference nearest-hit search that tests every primitive independently."""
    o = tuple(float(x) for x in o)
    d = tuple(float(x) for x in d)
    hits = []
    sph = scene_arrays[SPH]
    for i in range(sph.shape[0]):
        c = np.asarray(sph[i, :3])
        oc = np.asarray(o) - c
        b = float(np.dot(oc, d))
        cc = float(np.dot(oc, oc)) - sph[i, 3] ** 2
        disc = b * b - cc
        if disc >= 0:
            for t in (-b - math.sqrt(disc), -b + math.sqrt(disc)):
                if tmin < t < tmax:
                    hits.append((t, i))
    rect = scene_arrays[RECT]
    for i in range(rect.shape[0]):
        p0, e1, e2 = rect[i, :3], rect[i, 3:6], rect[i, 6:9]
        # solve o + t d = p0 + a e1 + b e2 as a 3x3 linear system
        m = np.column_stack([d, -e1, -e2])
        if abs(np.linalg.det(m)) < 1e-14:
            continue
        t, a, b = np.linalg.solve(m, p0 - np.asarray(o))
        if tmin < t < tmax and 0 <= a <= 1 and 0 <= b <= 1:
            hits.append((t, sph.shape[0] + i))
    if not hits:
        return INF, -1
    return min(hits)
