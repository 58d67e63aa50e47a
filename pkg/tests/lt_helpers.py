"""Shared helpers for the renderer tests."""
import numpy as np

from rjmlt.lt.bdpt import TechniqueLayout, bdpt_sample, path_contribution
from rjmlt.rng import Stream


def continuous_dims(k, s):
    """Coordinates that move a vertex: excludes lobe selectors and the light index."""
    lay = TechniqueLayout(k)
    mask = lay.used_dims(s).copy()
    for m in range(1, k):
        mask[lay.eye_slot(m)] = False
        mask[lay.light_slot(m)] = False
    mask[lay.light_base] = False
    return mask


def valid_samples(scene, k, n, seed, techniques=None, need_f=True):
    """Yield (i, u, path, ledger, p_i) for sampled paths with nonzero contribution."""
    rng = Stream(seed)
    dim = TechniqueLayout(k).dims
    techniques = list(range(k + 1)) if techniques is None else list(techniques)
    found = 0
    while found < n:
        i = techniques[min(int(rng.uniform() * len(techniques)), len(techniques) - 1)]
        u = rng.uniforms(dim)
        path, ledger, p = bdpt_sample(scene, k, i, u)
        if path is None or not p > 0:
            continue
        if need_f and not np.any(path_contribution(scene, path) > 0):
            continue
        found += 1
        yield i, u, path, ledger, p
