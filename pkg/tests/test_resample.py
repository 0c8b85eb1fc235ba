import numpy as np
import pytest

from misr.errors import DimensionError
from misr.raster import Image
from misr.resample import bicubic_upscale_x3, blockmean_downscale_x3, keys_kernel


def test_keys_kernel_interpolates_and_sums_to_one():
    assert keys_kernel(0.0) == 1.0
    assert keys_kernel(1.0) == 0.0
    assert keys_kernel(2.0) == 0.0
    assert keys_kernel(2.5) == 0.0
    for t in np.linspace(0, 1, 7):
        taps = keys_kernel(np.array([t + 1, t, 1 - t, 2 - t]))
        assert taps.sum() == pytest.approx(1.0)


def test_upscale_geometry_and_size_check():
    lr = Image(np.full((16, 16), 0.4))
    assert bicubic_upscale_x3(lr, size=16).shape == (48, 48)
    assert bicubic_upscale_x3(Image(np.full((5, 7), 0.4)), size=None).shape == (15, 21)
    with pytest.raises(DimensionError):
        bicubic_upscale_x3(lr)


def test_upscale_keeps_constant_images_constant():
    up = bicubic_upscale_x3(Image(np.full((8, 8), 0.37)), size=8)
    assert np.allclose(up.pixels, 0.37)


def test_upscale_reproduces_a_ramp_away_from_the_edges():
    n = 12
    ramp = 0.1 + 0.05 * np.arange(n)
    lr = Image(np.tile(ramp, (n, 1)))
    up = bicubic_upscale_x3(lr, size=None).pixels
    x = np.arange(3 * n)
    expected = 0.1 + 0.05 * ((x + 0.5) / 3 - 0.5)
    inner = slice(6, 3 * n - 6)
    assert np.allclose(up[10, inner], expected[inner])


def test_upscale_output_is_clamped():
    plane = np.zeros((8, 8))
    plane[:, 4:] = 1.0
    up = bicubic_upscale_x3(Image(plane), size=8).pixels
    assert up.min() >= 0.0 and up.max() <= 1.0


def test_downscale_is_block_mean():
    hr = np.zeros((6, 6))
    hr[:3, :3] = 0.9
    hr[3:, 3:] = np.arange(9).reshape(3, 3) / 10
    down = blockmean_downscale_x3(Image(hr)).pixels
    assert down.shape == (2, 2)
    assert down[0, 0] == pytest.approx(0.9)
    assert down[1, 1] == pytest.approx(0.4)
    assert down[0, 1] == 0.0


def test_downscale_rejects_ragged_sizes():
    with pytest.raises(DimensionError):
        blockmean_downscale_x3(Image(np.zeros((10, 9))))


def test_downscale_of_upscaled_constant_is_identity():
    lr = Image(np.full((16, 16), 0.25))
    back = blockmean_downscale_x3(bicubic_upscale_x3(lr, size=16))
    assert np.allclose(back.pixels, 0.25)


def test_smooth_image_survives_the_round_trip():
    yy, xx = np.mgrid[0:16, 0:16] / 16
    lr = Image(0.5 + 0.1 * np.sin(np.pi * xx) + 0.1 * np.cos(np.pi * yy))
    back = blockmean_downscale_x3(bicubic_upscale_x3(lr, size=16))
    assert np.max(np.abs(back.pixels - lr.pixels)) < 5e-3


def test_downscale_preserves_the_global_mean(rng):
    hr = Image(rng.random((48, 48)))
    assert blockmean_downscale_x3(hr).pixels.mean() == pytest.approx(hr.pixels.mean(), abs=1e-12)


def test_single_bright_pixel_spreads_by_the_keys_weights():
    plane = np.full((16, 16), 0.5)
    plane[8, 8] = 0.6
    up = bicubic_upscale_x3(Image(plane), size=16).pixels

    x = np.arange(48)
    w = keys_kernel((x + 0.5) / 3 - 0.5 - 8)
    assert np.allclose(up, 0.5 + 0.1 * np.outer(w, w), atol=1e-12)
    assert up[25, 25] == pytest.approx(0.6)
    touched = np.argwhere(np.abs(up - 0.5) > 1e-12)
    assert touched.min() >= 20 and touched.max() <= 30
