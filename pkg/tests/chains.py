"""A composed random walk of invertible blocks used for Jacobian checks.

Coordinates: u0 picks a sub-block of a mixture (its position inside the
bracket is carried through as an output), u1 feeds that sub-block, u2 and u3
sample conditional blocks that depend on the previous sample.
"""
import math

import numpy as np

from rjmlt.invmap import BlockResult, InversionBlock, MixtureSpec, chain_jacobian, mixture_forward

TRI = InversionBlock(pdf=lambda x: 2 * (1 - x), cdf=lambda x: 1 - (1 - x) ** 2,
                     cdf_inverse=lambda u: 1 - math.sqrt(1 - u))
LIN = InversionBlock(pdf=lambda x: 2 * x, cdf=lambda x: x * x, cdf_inverse=math.sqrt)
SINE = InversionBlock(pdf=lambda x: 0.5 * math.pi * math.sin(math.pi * x),
                      cdf=lambda x: 0.5 * (1 - math.cos(math.pi * x)),
                      cdf_inverse=lambda u: math.acos(1 - 2 * u) / math.pi)
MIX = MixtureSpec(weights=(0.35, 0.65), blocks=(TRI, LIN))
GUARD = 1e-3


def composed_chain(u):
    """Returns (outputs, product of inverse Jacobians) or None near discontinuities."""
    u = np.asarray(u, float)
    if np.any(u < GUARD) or np.any(u > 1 - GUARD):
        return None
    if np.min(np.abs(u[0] - MIX.bounds)) < GUARD:
        return None
    x1, t, res = mixture_forward(MIX, [u[0], u[1]])
    a, b = res.interval
    # the selector position inside its bracket is an interval block of width b - a
    s = (u[0] - a) / (b - a)
    sel = BlockResult(s, b - a, interval=(a, b))
    sub = BlockResult(x1, res.jac_inv_det / (b - a))
    # x2 | x1: sine block scaled onto [0, 1 + x1]
    scale = 1.0 + x1
    y = SINE.forward(u[2])
    x2 = scale * y.sample
    b2 = BlockResult(x2, y.jac_inv_det / scale)
    # x3 | x2: linear block shifted by x2
    z = LIN.forward(u[3])
    x3 = x2 + z.sample
    b3 = BlockResult(x3, z.jac_inv_det)
    return np.array([s, x1, x2, x3]), chain_jacobian([sel, sub, b2, b3])
