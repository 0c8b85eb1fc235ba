# misr/simgen.py
"""
Synthetic scenes and acquisitions with planted ground truth.

Every draw is a pure function of its seed. Child seeds come from
numpy.random.SeedSequence(seed, spawn_key=key) with stable integer keys:
(tile, band) for a scene, (tile, band, attempt, acquisition) for an LR
acquisition and (tile, band, attempt, HR_KEY) for the HR cloud mask, so one
member never depends on how many others were generated before it.
"""
import logging
import os
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from dotenv import load_dotenv
from scipy import ndimage

from misr.assembly import AdmissionRules, Dataset, admit_member
from misr.errors import ConfigError, GenerationError
from misr.raster import HR_SIZE, SCALE, Band, DataMember, Image, QualityMask
from misr.resample import blockmean

load_dotenv()

logger = logging.getLogger(__name__)

# ---- Config ----
MAX_GEN_RETRIES = int(os.getenv("MISR_MAX_GEN_RETRIES", "8"))

SCENE_LOW, SCENE_HIGH = 0.05, 0.95
CLOUD_LEVEL = 0.9
HR_KEY = 10_000


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def _smooth_field(rng: np.random.Generator, shape, sigma: float) -> np.ndarray:
    field = ndimage.gaussian_filter(rng.standard_normal(shape), sigma=sigma, mode="wrap")
    return field / (field.std() or 1.0)


@dataclass(frozen=True)
class AcquisitionParams:
    shift: Tuple[float, float] = (0.0, 0.0)
    brightness_bias: float = 0.0
    noise_sigma: float = 0.0
    cloud_fraction: float = 0.0
    drift_amplitude: float = 0.0

    def __post_init__(self):
        dx, dy = self.shift
        errors = []
        if abs(dx) > 3 or abs(dy) > 3:
            errors.append(f"shift {self.shift} exceeds the +/-3 registration window")
        if self.noise_sigma < 0:
            errors.append("noise_sigma must be >= 0")
        if not 0.0 <= self.cloud_fraction <= 1.0:
            errors.append("cloud_fraction must lie in [0, 1]")
        if self.drift_amplitude < 0:
            errors.append("drift_amplitude must be >= 0")
        if errors:
            raise ConfigError("invalid acquisition parameters: " + "; ".join(errors))


@dataclass(frozen=True)
class ParamsDistribution:
    """Uniform ranges the per-acquisition parameters are drawn from."""
    shift_max: float = 1.0
    bias_max: float = 0.03
    noise_sigma_max: float = 0.01
    cloud_fraction_max: float = 0.45
    clear_probability: float = 0.6
    drift_amplitude_max: float = 0.01
    hr_cloud_fraction: float = 0.0

    @classmethod
    def identity(cls) -> "ParamsDistribution":
        return cls(0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0)

    def draw(self, rng: np.random.Generator) -> AcquisitionParams:
        shift = tuple(float(s) for s in rng.uniform(-self.shift_max, self.shift_max, size=2))
        clouds = 0.0 if rng.random() < self.clear_probability else float(rng.uniform(0.0, self.cloud_fraction_max))
        return AcquisitionParams(
            shift=shift,
            brightness_bias=float(rng.uniform(-self.bias_max, self.bias_max)),
            noise_sigma=float(rng.uniform(0.0, self.noise_sigma_max)),
            cloud_fraction=clouds,
            drift_amplitude=float(rng.uniform(0.0, self.drift_amplitude_max)),
        )


def gen_hr_scene(seed: int, size: int = HR_SIZE) -> Image:
    if size <= 0 or size % SCALE:
        raise ConfigError(f"scene size must be a positive multiple of {SCALE}, got {size}")
    rng = _rng(seed)

    # feature sizes are in HR pixels, so a small scene looks like a crop of a full tile
    terrain = np.zeros((size, size))
    for sigma, amp in ((32.0, 1.0), (16.0, 0.5), (8.0, 0.25), (4.0, 0.1)):
        terrain += amp * _smooth_field(rng, (size, size), sigma)

    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    # river: a meandering dark band
    phase, freq = rng.uniform(0, 2 * np.pi), rng.uniform(1.0, 3.0) * 2 * np.pi / size
    centre = size * rng.uniform(0.3, 0.7) + 0.12 * size * np.sin(freq * xx + phase)
    terrain -= 0.8 * (np.abs(yy - centre) < 3.0)
    # ridge: a straight step edge across the tile
    angle = rng.uniform(0, np.pi)
    offset = rng.uniform(-0.25, 0.25) * size
    terrain += 0.6 * ((xx - size / 2) * np.cos(angle) + (yy - size / 2) * np.sin(angle) > offset)

    lo, hi = terrain.min(), terrain.max()
    return Image(SCENE_LOW + (SCENE_HIGH - SCENE_LOW) * (terrain - lo) / (hi - lo))


def _cloud_mask(rng: np.random.Generator, shape, fraction: float) -> np.ndarray:
    """True where clear. Smooth blobs thresholded at the fraction quantile."""
    if fraction <= 0.0:
        return np.ones(shape, dtype=bool)
    if fraction >= 1.0:
        return np.zeros(shape, dtype=bool)
    blobs = _smooth_field(rng, shape, max(shape[0] / 12.0, 1.0))
    n_concealed = int(round(fraction * blobs.size))
    order = np.argsort(-blobs, axis=None, kind="stable")
    clear = np.ones(blobs.size, dtype=bool)
    clear[order[:n_concealed]] = False
    return clear.reshape(shape)


def _paint_clouds(rng: np.random.Generator, plane: np.ndarray, clear: np.ndarray) -> np.ndarray:
    out = plane.copy()
    concealed = ~clear
    out[concealed] = np.clip(CLOUD_LEVEL + 0.02 * rng.standard_normal(int(concealed.sum())), 0.0, 1.0)
    return out


def translate(plane: np.ndarray, dx: float, dy: float) -> np.ndarray:
    """out(x, y) = in(x + dx, y + dy), bilinear, replicated edges."""
    if dx == 0 and dy == 0:
        return plane
    return ndimage.shift(plane, (-dy, -dx), order=1, mode="nearest")


def acquire_lr(hr: Image, p: AcquisitionParams, seed: int) -> Tuple[Image, QualityMask]:
    rng = _rng(seed)
    scene = hr.pixels
    if p.drift_amplitude > 0:
        scene = scene + p.drift_amplitude * _smooth_field(rng, scene.shape, HR_SIZE / 24.0)
    scene = translate(scene, *p.shift)
    lr = blockmean(scene) + p.brightness_bias
    if p.noise_sigma > 0:
        lr = lr + rng.normal(0.0, p.noise_sigma, size=lr.shape)
    lr = np.clip(lr, 0.0, 1.0)
    clear = _cloud_mask(rng, lr.shape, p.cloud_fraction)
    return Image(_paint_clouds(rng, lr, clear)), QualityMask(clear)


def _scene_seed(seed: int, tile: int, band: Band) -> int:
    return int(_rng(seed, tile, list(Band).index(band)).integers(2**31))


def gen_member(
    seed: int,
    n_lr: int = 12,
    params_distribution: ParamsDistribution = ParamsDistribution(),
    band: Band = Band.RED,
    tile: int = 0,
    hr_size: int = HR_SIZE,
    rules: Optional[AdmissionRules] = None,
) -> DataMember:
    rules = rules or AdmissionRules(hr_size=hr_size)
    if n_lr < rules.min_lr_count:
        raise GenerationError(f"n_lr={n_lr} can never satisfy the {rules.min_lr_count}-LR minimum")
    band = Band(band)
    tile_id = f"tile{tile:04d}"
    band_key = list(Band).index(band)
    scene = gen_hr_scene(_scene_seed(seed, tile, band), hr_size)

    for attempt in range(MAX_GEN_RETRIES):
        hr_rng = _rng(seed, tile, band_key, attempt, HR_KEY)
        hr_clear = _cloud_mask(hr_rng, scene.shape, params_distribution.hr_cloud_fraction)
        hrs = [(Image(_paint_clouds(hr_rng, scene.pixels, hr_clear)), QualityMask(hr_clear))]

        lrs = []
        for k in range(n_lr):
            acq_rng = _rng(seed, tile, band_key, attempt, k)
            params = params_distribution.draw(acq_rng)
            img, mask = acquire_lr(scene, params, int(acq_rng.integers(2**31)))
            lrs.append((img, mask, k))

        result = admit_member(hrs, lrs, band, tile_id, rules)
        if isinstance(result, DataMember):
            return result
        logger.debug(f"{band.value}/{tile_id} attempt {attempt} rejected: {result.rule}")

    raise GenerationError(f"{band.value}/{tile_id}: no admissible draw after {MAX_GEN_RETRIES} attempts")


def gen_dataset(
    seed: int,
    n_members: int,
    n_lr: int = 12,
    params_distribution: ParamsDistribution = ParamsDistribution(),
    hr_size: int = HR_SIZE,
) -> Dataset:
    """Members alternate RED/NIR so every full tile contributes a band pair."""
    if n_members < 1:
        raise ConfigError(f"n_members must be >= 1, got {n_members}")
    members = [
        gen_member(seed, n_lr, params_distribution, band=(Band.RED, Band.NIR)[i % 2], tile=i // 2, hr_size=hr_size)
        for i in range(n_members)
    ]
    logger.info(f"generated {n_members} synthetic members from seed {seed}")
    return Dataset(members, f"synthetic:seed={seed}")


def bias_vs_cloud_pair(seed: int, size: int = HR_SIZE, bias: float = -0.1, cloud_fraction: float = 0.01):
    """
    A clear HR scene plus two candidate reconstructions: one clear but uniformly
    darker, one unbiased but with bright cloud blobs, shifted so its mean
    intensity matches the HR mean.
    """
    # intensities in [0.185, 0.815]; hr + bias stays unclipped for abs(bias) <= 0.185
    hr = Image(0.15 + 0.7 * gen_hr_scene(seed, size).pixels)
    rng = _rng(seed, 1)
    biased = Image.clamped(hr.pixels + bias)
    clear = _cloud_mask(rng, hr.shape, cloud_fraction)
    clouded = _paint_clouds(rng, hr.pixels, clear)
    clouded = clouded - (clouded.mean() - hr.pixels.mean())
    return hr, QualityMask.all_clear(*hr.shape), Image.clamped(clouded), biased


def with_fill(img: Image, mask: QualityMask, value: float) -> Image:
    """Repaint every concealed pixel with a constant."""
    out = img.pixels.copy()
    out[~mask.clear] = value
    return Image(out)
