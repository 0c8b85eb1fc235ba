# misr/metric.py
"""
Clear-pixel, bias-corrected PSNR with an integer registration search (cPSNR).

For an N x N pair the SR image is centre-cropped by BORDER pixels; the HR
image and its mask are cropped at every offset (u, v) in {0..2*BORDER}^2.
Each offset removes the mean clear-pixel brightness difference before the
squared error is taken, and the best offset wins. Ties keep the smallest v,
then the smallest u.
"""
import logging
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from misr.errors import DimensionError, EmptyClearError, MetricDomainError
from misr.raster import DataMember, Image, QualityMask, clearance_ratio, crop
from misr.resample import bicubic_upscale_x3

logger = logging.getLogger(__name__)

BORDER = 3
MSE_FLOOR = 1e-10
PSNR_CAP = -10.0 * math.log10(MSE_FLOOR)


@dataclass(frozen=True)
class ScoredPair:
    cpsnr: float
    best_offset: Tuple[int, int]
    bias_at_best: float
    mse_at_best: float


def _check_same_shape(hr: Image, sr: Image, mask: QualityMask) -> None:
    if not (hr.shape == sr.shape == mask.shape):
        raise DimensionError(f"shape mismatch: hr {hr.shape}, sr {sr.shape}, mask {mask.shape}")


def _clear_residuals(hr_crop: Image, sr_crop: Image, mask_crop: QualityMask):
    _check_same_shape(hr_crop, sr_crop, mask_crop)
    clear = mask_crop.clear
    if not clear.any():
        raise EmptyClearError("no clear pixels in the HR crop")
    return hr_crop.pixels[clear], sr_crop.pixels[clear]


def bias(hr_crop: Image, sr_crop: Image, mask_crop: QualityMask) -> float:
    hr, sr = _clear_residuals(hr_crop, sr_crop, mask_crop)
    return float(np.mean(hr - sr))


def clear_mse(hr_crop: Image, sr_crop: Image, mask_crop: QualityMask) -> float:
    hr, sr = _clear_residuals(hr_crop, sr_crop, mask_crop)
    return _corrected_mse(hr, sr)[1]


def _corrected_mse(hr: np.ndarray, sr: np.ndarray) -> Tuple[float, float]:
    b = float(np.mean(hr - sr))
    return b, float(np.mean((hr - (sr + b)) ** 2))


def psnr(mse: float) -> float:
    if mse < 0 or math.isnan(mse):
        raise MetricDomainError(f"PSNR is undefined for mse={mse}")
    return -10.0 * math.log10(max(mse, MSE_FLOOR))


def cpsnr(hr: Image, hr_mask: QualityMask, sr: Image) -> ScoredPair:
    _check_same_shape(hr, sr, hr_mask)
    n_y, n_x = hr.shape
    span = 2 * BORDER
    if n_y <= span or n_x <= span:
        raise DimensionError(f"cPSNR needs sides larger than {span}, got {n_x}x{n_y}")
    w, h = n_x - span, n_y - span

    sr_center = crop(sr, BORDER, BORDER, w, h).pixels
    best = None
    for v in range(span + 1):
        for u in range(span + 1):
            clear = hr_mask.clear[v:v + h, u:u + w]
            if not clear.any():
                continue
            b, mse = _corrected_mse(hr.pixels[v:v + h, u:u + w][clear], sr_center[clear])
            score = psnr(mse)
            if best is None or score > best.cpsnr:
                best = ScoredPair(score, (u, v), b, max(mse, MSE_FLOOR))

    if best is None:
        raise EmptyClearError("every registration offset has an empty clear set")
    return best


def uncorrected_psnr(hr: Image, hr_mask: QualityMask, sr: Image) -> float:
    """Plain clear-pixel PSNR: no brightness correction, no registration search."""
    hr_vals, sr_vals = _clear_residuals(hr, sr, hr_mask)
    return psnr(float(np.mean((hr_vals - sr_vals) ** 2)))


def max_clearance_lrs(member: DataMember):
    best = max(clearance_ratio(lr.mask) for lr in member.lr_list)
    return [lr for lr in member.lr_list if clearance_ratio(lr.mask) == best], best


def baseline_score(member: DataMember) -> float:
    """Mean cPSNR of the bicubic upscales of every LR image at maximum clearance."""
    chosen, best = max_clearance_lrs(member)
    scores = [
        cpsnr(member.hr, member.hr_mask, bicubic_upscale_x3(lr.image, size=member.lr_size)).cpsnr
        for lr in chosen
    ]
    logger.debug(
        f"baseline {member.member_id}: {len(chosen)} LR at clearance {float(best):.4f} -> {scores}"
    )
    return math.fsum(scores) / len(scores)
