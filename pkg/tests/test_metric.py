import math

import numpy as np
import pytest

from misr.errors import DimensionError, EmptyClearError, MetricDomainError
from misr.metric import (
    PSNR_CAP,
    baseline_score,
    bias,
    clear_mse,
    cpsnr,
    max_clearance_lrs,
    psnr,
    uncorrected_psnr,
)
from misr.raster import Image, QualityMask
from misr.resample import bicubic_upscale_x3
from misr.simgen import bias_vs_cloud_pair, gen_hr_scene

SIZE = 24


def _brute_force(hr, mask, sr):
    n = hr.shape[0]
    w = n - 6
    sr_c = sr[3:3 + w, 3:3 + w]
    best = None
    for v in range(7):
        for u in range(7):
            clear = mask[v:v + w, u:u + w]
            if not clear.any():
                continue
            h = hr[v:v + w, u:u + w][clear]
            s = sr_c[clear]
            b = np.mean(h - s)
            mse = np.mean((h - (s + b)) ** 2)
            score = -10 * math.log10(max(mse, 1e-10))
            if best is None or score > best[0]:
                best = (score, (u, v))
    return best


def test_identical_images_hit_the_cap_at_the_centre():
    hr = gen_hr_scene(1, SIZE)
    scored = cpsnr(hr, QualityMask.all_clear(SIZE, SIZE), hr)
    assert scored.cpsnr == pytest.approx(PSNR_CAP)
    assert scored.cpsnr == pytest.approx(100.0)
    assert scored.best_offset == (3, 3)


def test_constant_images_tie_to_the_first_offset():
    hr = Image(np.full((12, 12), 0.3))
    sr = Image(np.full((12, 12), 0.6))
    scored = cpsnr(hr, QualityMask.all_clear(12, 12), sr)
    assert scored.best_offset == (0, 0)
    assert scored.bias_at_best == pytest.approx(-0.3)


def test_matches_brute_force_search(rng):
    for _ in range(16):
        hr = rng.uniform(0, 1, (SIZE, SIZE))
        sr = rng.uniform(0, 1, (SIZE, SIZE))
        mask = rng.uniform(size=(SIZE, SIZE)) < 0.7
        scored = cpsnr(Image(hr), QualityMask(mask), Image(sr))
        score, offset = _brute_force(hr, mask, sr)
        assert scored.cpsnr == pytest.approx(score, rel=1e-12)
        assert scored.best_offset == offset


@pytest.mark.parametrize("c", [-0.2, 0.1, 0.3])
@pytest.mark.parametrize("seed", range(10))
def test_constant_offset_does_not_change_the_score(seed, c):
    rng = np.random.default_rng(seed)
    hr = Image(rng.uniform(0, 1, (SIZE, SIZE)))
    mask = QualityMask.all_clear(SIZE, SIZE)
    sr = rng.uniform(0.2, 0.7, (SIZE, SIZE))
    base = cpsnr(hr, mask, Image(sr))
    shifted = cpsnr(hr, mask, Image(sr + c))
    assert shifted.cpsnr == pytest.approx(base.cpsnr, abs=1e-9)
    assert shifted.best_offset == base.best_offset
    assert shifted.bias_at_best == pytest.approx(base.bias_at_best - c)


@pytest.mark.parametrize("seed", range(10))
def test_concealed_hr_pixels_are_ignored(seed):
    rng = np.random.default_rng(seed)
    hr = rng.uniform(0, 1, (SIZE, SIZE))
    sr = Image(rng.uniform(0, 1, (SIZE, SIZE)))
    mask = rng.uniform(size=(SIZE, SIZE)) < 0.6
    repainted = hr.copy()
    repainted[~mask] = 0.95
    a = cpsnr(Image(hr), QualityMask(mask), sr)
    b = cpsnr(Image(repainted), QualityMask(mask), sr)
    assert a.cpsnr == b.cpsnr
    assert a.best_offset == b.best_offset


def test_planted_shifts_are_recovered():
    hits = 0
    for seed in range(20):
        dx, dy = (int(d) for d in np.random.default_rng(seed).integers(-3, 4, size=2))
        hr = gen_hr_scene(seed, 48)
        iy = np.clip(np.arange(48) + dy, 0, 47)
        ix = np.clip(np.arange(48) + dx, 0, 47)
        scored = cpsnr(hr, QualityMask.all_clear(48, 48), Image(hr.pixels[np.ix_(iy, ix)]))
        hits += scored.best_offset == (3 + dx, 3 + dy) and scored.cpsnr == pytest.approx(100.0)
    assert hits >= 19


def test_more_noise_scores_lower(smooth_image, rng):
    hr = smooth_image(48)
    z = np.clip(rng.standard_normal((48, 48)), -3, 3)
    mask = QualityMask.all_clear(48, 48)
    scores = [cpsnr(hr, mask, Image(hr.pixels + s * z)).cpsnr for s in (0.005, 0.01, 0.02)]
    assert scores[0] > scores[1] > scores[2]


def test_empty_clear_set_raises():
    img = Image(np.full((SIZE, SIZE), 0.5))
    concealed = QualityMask(np.zeros((SIZE, SIZE), dtype=bool))
    with pytest.raises(EmptyClearError):
        cpsnr(img, concealed, img)
    with pytest.raises(EmptyClearError):
        bias(img, img, concealed)


def test_shape_mismatch_raises():
    with pytest.raises(DimensionError):
        cpsnr(Image(np.zeros((12, 12))), QualityMask.all_clear(12, 12), Image(np.zeros((15, 15))))
    with pytest.raises(DimensionError):
        cpsnr(Image(np.zeros((6, 6))), QualityMask.all_clear(6, 6), Image(np.zeros((6, 6))))


def test_psnr_domain():
    assert psnr(0.0) == pytest.approx(100.0)
    assert psnr(1e-4) == pytest.approx(40.0)
    with pytest.raises(MetricDomainError):
        psnr(-1e-3)
    with pytest.raises(MetricDomainError):
        psnr(float("nan"))


def test_bias_and_clear_mse_on_a_crop():
    hr = Image(np.array([[0.5, 0.6], [0.7, 0.1]]))
    sr = Image(np.array([[0.4, 0.5], [0.6, 0.9]]))
    mask = QualityMask(np.array([[True, True], [True, False]]))
    assert bias(hr, sr, mask) == pytest.approx(0.1)
    assert clear_mse(hr, sr, mask) == pytest.approx(0.0, abs=1e-20)


def test_bias_correction_fixes_the_cloud_ranking():
    hr, mask, clouded, biased = bias_vs_cloud_pair(seed=3, size=48)
    assert uncorrected_psnr(hr, mask, clouded) > uncorrected_psnr(hr, mask, biased)
    assert cpsnr(hr, mask, biased).cpsnr > cpsnr(hr, mask, clouded).cpsnr


def test_baseline_uses_only_the_clearest_lrs(make_member, mask_with_clear):
    masks = [mask_with_clear(16, 200)] * 9
    masks[2] = masks[5] = mask_with_clear(16, 256)
    member = make_member(lr_masks=masks)

    chosen, best = max_clearance_lrs(member)
    assert [lr.acquisition_index for lr in chosen] == [2, 5]
    assert best == 1

    expected = [cpsnr(member.hr, member.hr_mask, bicubic_upscale_x3(lr.image, size=16)).cpsnr for lr in chosen]
    assert baseline_score(member) == pytest.approx(sum(expected) / 2)
