import logging

import numpy as np
import pytest

from misr.assembly import AdmissionRules
from misr.raster import Band, DataMember, Image, LowRes, QualityMask

HR_SIZE = 48
LR_SIZE = 16


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def small_rules():
    return AdmissionRules(hr_size=HR_SIZE)


@pytest.fixture
def mask_with_clear():
    """Square mask whose first n_clear pixels (row-major) are clear."""
    def make(size, n_clear):
        flat = np.zeros(size * size, dtype=bool)
        flat[:n_clear] = True
        return QualityMask(flat.reshape(size, size))
    return make


@pytest.fixture
def smooth_image():
    """Deterministic smooth scene in [0.2, 0.8]."""
    def make(size, phase=0.0):
        yy, xx = np.mgrid[0:size, 0:size] / size
        plane = 0.5 + 0.15 * np.sin(2 * np.pi * (xx + phase)) + 0.15 * np.cos(2 * np.pi * 1.5 * yy)
        return Image(plane)
    return make


@pytest.fixture
def make_member(smooth_image):
    """Member at HR 48 / LR 16 with one clear LR per acquisition index."""
    def make(n_lr=9, band=Band.RED, tile_id="tile0000", lr_masks=None):
        hr = smooth_image(HR_SIZE)
        lrs = []
        for k in range(n_lr):
            mask = lr_masks[k] if lr_masks is not None else QualityMask.all_clear(LR_SIZE, LR_SIZE)
            lrs.append(LowRes(smooth_image(LR_SIZE, phase=0.01 * k), mask, k))
        return DataMember(band, tile_id, hr, QualityMask.all_clear(HR_SIZE, HR_SIZE), tuple(lrs))
    return make


@pytest.fixture(autouse=True)
def _drop_cli_log_handlers():
    yield
    root = logging.getLogger()
    for handler in [h for h in root.handlers if getattr(h, "_misr", False)]:
        root.removeHandler(handler)
        handler.close()
