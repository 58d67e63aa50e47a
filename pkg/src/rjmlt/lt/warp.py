"""Invertible warps used by the path sampler.

Each forward warp maps unit-square coordinates to a direction or point; the
matching ``*_inv`` returns the coordinates (and ``ok=False`` when the input is
outside the warp's support). Densities are in solid angle or area measure.
"""
import math

from numba import njit

from .geometry import CAM, cross, dot, normalize, vadd, vscale, vsub

INV_PI = 1.0 / math.pi
ONE_MINUS_EPS = 1.0 - 2.0 ** -53


@njit(inline="always", cache=True)
def clamp_unit(u):
    if u < 0.0:
        return 0.0
    if u >= 1.0:
        return ONE_MINUS_EPS
    return u


@njit(cache=True)
def onb(n):
    """Orthonormal basis (b1, b2) completing unit vector n (Duff et al. 2017)."""
    sign = 1.0 if n[2] >= 0.0 else -1.0
    a = -1.0 / (sign + n[2])
    b = n[0] * n[1] * a
    b1 = (1.0 + sign * n[0] * n[0] * a, sign * b, -sign * n[0])
    b2 = (b, sign + n[1] * n[1] * a, -n[1])
    return b1, b2


@njit(cache=True)
def to_world(n, lx, ly, lz):
    b1, b2 = onb(n)
    return (b1[0] * lx + b2[0] * ly + n[0] * lz,
            b1[1] * lx + b2[1] * ly + n[1] * lz,
            b1[2] * lx + b2[2] * ly + n[2] * lz)


@njit(cache=True)
def _azimuth_inv(ly, lx):
    u2 = math.atan2(ly, lx) / (2.0 * math.pi)
    if u2 < 0.0:
        u2 += 1.0
    return clamp_unit(u2)


# -- cosine-weighted hemisphere ----------------------------------------------

@njit(cache=True)
def cosine_hemisphere(n, u1, u2):
    r = math.sqrt(u1)
    phi = 2.0 * math.pi * u2
    return normalize(to_world(n, r * math.cos(phi), r * math.sin(phi), math.sqrt(max(0.0, 1.0 - u1))))


@njit(cache=True)
def cosine_hemisphere_pdf(n, w):
    c = dot(n, w)
    return c * INV_PI if c > 0.0 else 0.0


@njit(cache=True)
def cosine_hemisphere_inv(n, w):
    """(ok, u1, u2) with cosine_hemisphere(n, u1, u2) == w."""
    if not dot(n, w) > 0.0:
        return False, 0.0, 0.0
    b1, b2 = onb(n)
    lx = dot(b1, w)
    ly = dot(b2, w)
    return True, clamp_unit(lx * lx + ly * ly), _azimuth_inv(ly, lx)


# -- Phong lobe cos^e around an axis ----------------------------------------

@njit(cache=True)
def phong_lobe(axis, exponent, u1, u2):
    c = u1 ** (1.0 / (exponent + 1.0))
    s = math.sqrt(max(0.0, 1.0 - c * c))
    phi = 2.0 * math.pi * u2
    return normalize(to_world(axis, s * math.cos(phi), s * math.sin(phi), c))


@njit(cache=True)
def phong_lobe_pdf(axis, exponent, w):
    c = dot(axis, w)
    if not c > 0.0:
        return 0.0
    return (exponent + 1.0) / (2.0 * math.pi) * c ** exponent


@njit(cache=True)
def phong_lobe_inv(axis, exponent, w):
    c = dot(axis, w)
    if not c > 0.0:
        return False, 0.0, 0.0
    b1, b2 = onb(axis)
    return True, clamp_unit(min(c, 1.0) ** (exponent + 1.0)), _azimuth_inv(dot(b2, w), dot(b1, w))


@njit(inline="always", cache=True)
def reflect(w, n):
    """Mirror of w about n (both unit; w points away from the surface)."""
    return vsub(vscale(n, 2.0 * dot(n, w)), w)


# -- parallelogram area sampling --------------------------------------------

@njit(cache=True)
def rect_point(p0, e1, e2, u1, u2):
    return vadd(p0, vadd(vscale(e1, u1), vscale(e2, u2)))


@njit(cache=True)
def rect_point_inv(p0, e1, e2, x):
    q = vsub(x, p0)
    a = dot(q, e1) / dot(e1, e1)
    b = dot(q, e2) / dot(e2, e2)
    tol = 1e-9
    ok = -tol <= a <= 1.0 + tol and -tol <= b <= 1.0 + tol
    return ok, clamp_unit(a), clamp_unit(b)


@njit(cache=True)
def rect_area(e1, e2):
    c = cross(e1, e2)
    return math.sqrt(dot(c, c))


# -- discrete choice by CDF ----------------------------------------------

@njit(cache=True)
def discrete_select(cdf, u):
    n = cdf.shape[0] - 1
    lo = 0
    hi = n
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if cdf[mid] <= u:
            lo = mid
        else:
            hi = mid
    while lo < n - 1 and cdf[lo + 1] - cdf[lo] <= 0.0:
        lo += 1
    return lo


# -- pinhole camera --------------------------------------------------------

@njit(cache=True)
def camera_basis(sc):
    cam = sc[CAM]
    pos = (cam[0], cam[1], cam[2])
    fwd = (cam[3], cam[4], cam[5])
    right = (cam[6], cam[7], cam[8])
    up = (cam[9], cam[10], cam[11])
    return pos, fwd, right, up, cam[12], cam[13]


@njit(cache=True)
def film_area(sc):
    cam = sc[CAM]
    return 4.0 * cam[12] * cam[12] * cam[13]


@njit(cache=True)
def film_direction(sc, fx, fy):
    pos, fwd, right, up, tanh, aspect = camera_basis(sc)
    sx = (2.0 * fx - 1.0) * tanh * aspect
    sy = (1.0 - 2.0 * fy) * tanh
    return normalize(vadd(fwd, vadd(vscale(right, sx), vscale(up, sy))))


@njit(cache=True)
def film_inv(sc, d):
    """(ok, fx, fy) for a unit direction leaving the camera."""
    pos, fwd, right, up, tanh, aspect = camera_basis(sc)
    dz = dot(d, fwd)
    if not dz > 0.0:
        return False, 0.0, 0.0
    sx = dot(d, right) / dz
    sy = dot(d, up) / dz
    fx = 0.5 * (sx / (tanh * aspect) + 1.0)
    fy = 0.5 * (1.0 - sy / tanh)
    if not (0.0 <= fx < 1.0 and 0.0 <= fy < 1.0):
        return False, 0.0, 0.0
    return True, fx, fy


@njit(cache=True)
def camera_pdf(sc, d):
    """Solid-angle density of the film sampler, 1/(A cos^3); 0 off film."""
    ok, fx, fy = film_inv(sc, d)
    if not ok:
        return 0.0
    c = dot(d, (sc[CAM][3], sc[CAM][4], sc[CAM][5]))
    return 1.0 / (film_area(sc) * c * c * c)


@njit(cache=True)
def camera_importance(sc, d):
    """W_e(d) = 1/(A cos^4) on the film, 0 elsewhere."""
    ok, fx, fy = film_inv(sc, d)
    if not ok:
        return 0.0
    c = dot(d, (sc[CAM][3], sc[CAM][4], sc[CAM][5]))
    return 1.0 / (film_area(sc) * c * c * c * c)


@njit(cache=True)
def film_pixel(sc, fx, fy):
    cam = sc[CAM]
    w = int(cam[14])
    h = int(cam[15])
    ix = min(int(fx * w), w - 1)
    iy = min(int(fy * h), h - 1)
    return iy * w + ix
