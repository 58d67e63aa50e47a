"""Image error metrics."""
import numpy as np


def _pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    return a, b


def mse(image_a, image_b) -> float:
    """Mean over pixels and channels of the squared difference."""
    a, b = _pair(image_a, image_b)
    return float(np.mean((a - b) ** 2))


def relative_mse(image, reference) -> float:
    """MSE normalised by the reference's mean squared value."""
    a, b = _pair(image, reference)
    denom = float(np.mean(b ** 2))
    if not denom > 0:
        raise ValueError("reference image is black")
    return mse(a, b) / denom
