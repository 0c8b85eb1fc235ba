# misr/resample.py
"""
Deterministic x3 resampling.

bicubic_upscale_x3 is separable Keys cubic convolution (a = -0.5) on a
pixel-centre aligned grid with replicated edges; output centre x samples the
source at (x + 0.5) / 3 - 0.5. blockmean_downscale_x3 averages disjoint 3x3
blocks, so output pixel k sits on the centre of HR pixels 3k..3k+2 and the two
operators share the same grid.
"""
from functools import lru_cache
from typing import Optional

import numpy as np

from misr.errors import DimensionError
from misr.raster import LR_SIZE, SCALE, Image

KEYS_A = -0.5


def keys_kernel(x, a: float = KEYS_A) -> np.ndarray:
    x = np.abs(np.asarray(x, dtype=np.float64))
    near = ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0
    far = ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a
    return np.where(x <= 1.0, near, np.where(x < 2.0, far, 0.0))


@lru_cache(maxsize=8)
def _upscale_matrix(n: int) -> np.ndarray:
    """(3n, n) interpolation matrix; replicated edges fold out-of-range taps onto the border."""
    m = np.zeros((SCALE * n, n), dtype=np.float64)
    for x in range(SCALE * n):
        s = (x + 0.5) / SCALE - 0.5
        i0 = int(np.floor(s))
        t = s - i0
        taps = np.arange(i0 - 1, i0 + 3)
        weights = keys_kernel(np.array([t + 1.0, t, 1.0 - t, 2.0 - t]))
        for j, w in zip(np.clip(taps, 0, n - 1), weights):
            m[x, j] += w
    m.setflags(write=False)
    return m


def bicubic_upscale_x3(lr: Image, size: Optional[int] = LR_SIZE) -> Image:
    if size is not None and lr.shape != (size, size):
        raise DimensionError(f"bicubic upscale expects {size}x{size} input, got {lr.width}x{lr.height}")
    rows = _upscale_matrix(lr.height)
    cols = _upscale_matrix(lr.width)
    up = rows @ lr.pixels @ cols.T
    return Image.clamped(up)


def blockmean_downscale_x3(hr: Image) -> Image:
    # Zero padding would apply to a ragged border; divisible inputs never have one.
    h, w = hr.shape
    if h % SCALE or w % SCALE:
        raise DimensionError(f"block-mean downscale needs sides divisible by {SCALE}, got {w}x{h}")
    return Image(blockmean(hr.pixels))


def blockmean(plane: np.ndarray) -> np.ndarray:
    """Kahan-compensated mean of every 3x3 block of a float array."""
    total = np.zeros((plane.shape[0] // SCALE, plane.shape[1] // SCALE), dtype=np.float64)
    comp = np.zeros_like(total)
    for dy in range(SCALE):
        for dx in range(SCALE):
            y = plane[dy::SCALE, dx::SCALE] - comp
            t = total + y
            comp = (t - total) - y
            total = t
    return total / (SCALE * SCALE)
