"""PFM (float RGB) and PPM (8-bit, gamma 2.2) images, written atomically."""
from __future__ import annotations

import os
import tempfile
from pathlib import Path

import numpy as np


def _as_rgb(image) -> np.ndarray:
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected an (H, W, 3) image, got shape {img.shape}")
    return img


def encode_pfm(image) -> bytes:
    img = _as_rgb(image)
    h, w, _ = img.shape
    header = f"PF\n{w} {h}\n-1.0\n".encode("ascii")
    # PFM stores scanlines bottom to top
    return header + np.ascontiguousarray(img[::-1], dtype="<f4").tobytes()


def decode_pfm(data: bytes) -> np.ndarray:
    parts = data.split(b"\n", 3)
    if len(parts) < 4 or parts[0].strip() != b"PF":
        raise ValueError("not a colour PFM file")
    w, h = (int(x) for x in parts[1].split())
    scale = float(parts[2])
    dtype = "<f4" if scale < 0 else ">f4"
    pix = np.frombuffer(parts[3], dtype=dtype, count=w * h * 3)
    return pix.reshape(h, w, 3)[::-1].astype(np.float64)


def encode_ppm(image, gamma: float = 2.2) -> bytes:
    img = np.clip(_as_rgb(image), 0.0, 1.0) ** (1.0 / gamma)
    h, w, _ = img.shape
    px = np.round(img * 255.0).astype(np.uint8)
    return f"P6\n{w} {h}\n255\n".encode("ascii") + px.tobytes()


def write_atomic(path, data: bytes):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_pfm(path, image):
    write_atomic(path, encode_pfm(image))


def read_pfm(path) -> np.ndarray:
    return decode_pfm(Path(path).read_bytes())


def write_ppm(path, image, gamma: float = 2.2):
    write_atomic(path, encode_ppm(image, gamma))


def companion_ppm(path) -> Path:
    """``img.pfm`` -> ``img.ppm``, the 8-bit preview written next to the float image."""
    return Path(path).with_suffix(".ppm")
