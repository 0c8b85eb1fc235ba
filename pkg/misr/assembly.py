# misr/assembly.py
"""
Dataset assembly: clearance filtering, member admission, HR target selection,
input selection for the network and the tile-preserving train/test split.
"""
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np

from misr.errors import ConfigError, StructuralError
from misr.raster import (
    HR_SIZE,
    SCALE,
    Band,
    DataMember,
    Image,
    LowRes,
    QualityMask,
    clearance_ratio,
)
from misr.resample import blockmean_downscale_x3

logger = logging.getLogger(__name__)

# ---- Admission rules ----
LR_CLEARANCE_MIN = 0.6
HR_CLEARANCE_MIN = 0.75
MIN_LR_COUNT = 9
N_INPUTS = 5

RULE_MIN_LR_COUNT = "min LR count"
RULE_HR_CLEARANCE = "HR clearance"


@dataclass(frozen=True)
class AdmissionRules:
    lr_clearance_min: float = LR_CLEARANCE_MIN
    hr_clearance_min: float = HR_CLEARANCE_MIN
    min_lr_count: int = MIN_LR_COUNT
    hr_size: int = HR_SIZE

    @property
    def lr_size(self) -> int:
        return self.hr_size // SCALE

    @staticmethod
    def exact(threshold: float) -> Fraction:
        # Fraction(str) keeps 0.6 as 3/5 rather than the nearest binary double.
        return Fraction(str(threshold))


@dataclass(frozen=True)
class Rejection:
    rule: str
    detail: str
    band: Band
    tile_id: str

    @property
    def member_id(self) -> str:
        return f"{Band(self.band).value}/{self.tile_id}"


@dataclass
class Dataset:
    members: List[DataMember]
    provenance: str

    def __post_init__(self):
        seen = set()
        for m in self.members:
            if m.member_id in seen:
                raise StructuralError(f"duplicate member {m.member_id}")
            seen.add(m.member_id)

    def __len__(self) -> int:
        return len(self.members)

    def by_id(self) -> Dict[str, DataMember]:
        return {m.member_id: m for m in self.members}


@dataclass(frozen=True)
class SplitConfig:
    seed: int = 1
    test_fraction: float = 0.2

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigError(f"test_fraction must lie in (0, 1), got {self.test_fraction}")


HrCandidate = Tuple[Image, QualityMask]
LrCandidate = Tuple[Image, QualityMask, int]


def _check_dims(candidate_hrs: Sequence[HrCandidate], candidate_lrs: Sequence[LrCandidate], rules: AdmissionRules):
    hr_shape = (rules.hr_size, rules.hr_size)
    lr_shape = (rules.lr_size, rules.lr_size)
    for i, (img, mask) in enumerate(candidate_hrs):
        if img.shape != hr_shape or mask.shape != hr_shape:
            raise StructuralError(f"HR candidate {i} is {img.shape}/{mask.shape}, expected {hr_shape}")
    for img, mask, idx in candidate_lrs:
        if img.shape != lr_shape or mask.shape != lr_shape:
            raise StructuralError(f"LR candidate {idx} is {img.shape}/{mask.shape}, expected {lr_shape}")


def admit_member(
    candidate_hrs: Sequence[HrCandidate],
    candidate_lrs: Sequence[LrCandidate],
    band: Union[Band, str],
    tile_id: str,
    rules: AdmissionRules = AdmissionRules(),
) -> Union[DataMember, Rejection]:
    _check_dims(candidate_hrs, candidate_lrs, rules)
    band = Band(band)

    lr_min = rules.exact(rules.lr_clearance_min)
    hr_min = rules.exact(rules.hr_clearance_min)
    lrs = [c for c in candidate_lrs if clearance_ratio(c[1]) >= lr_min]
    hrs = [c for c in candidate_hrs if clearance_ratio(c[1]) >= hr_min]

    if not hrs:
        return Rejection(
            RULE_HR_CLEARANCE,
            f"no HR candidate reaches clearance {rules.hr_clearance_min} ({len(candidate_hrs)} seen)",
            band,
            tile_id,
        )
    if len(lrs) < rules.min_lr_count:
        return Rejection(
            RULE_MIN_LR_COUNT,
            f"{len(lrs)} LR images pass clearance {rules.lr_clearance_min}, need {rules.min_lr_count}",
            band,
            tile_id,
        )

    chosen = select_hr(hrs, [img for img, _, _ in lrs])
    hr, hr_mask = hrs[chosen]
    lr_list = sorted((LowRes(img, mask, idx) for img, mask, idx in lrs), key=lambda lr: lr.acquisition_index)
    logger.debug(f"admitted {band.value}/{tile_id}: {len(lr_list)} LR, HR candidate {chosen}")
    return DataMember(band, tile_id, hr, hr_mask, tuple(lr_list))


def select_hr(hrs: Sequence[HrCandidate], lrs: Sequence[Image]) -> int:
    if not hrs or not lrs:
        raise StructuralError("select_hr needs at least one HR and one LR image")

    ratios = [clearance_ratio(mask) for _, mask in hrs]
    best = max(ratios)
    tied = [i for i, r in enumerate(ratios) if r == best]
    if len(tied) == 1:
        return tied[0]

    # Plain all-pixel MSE of each downscaled HR against every LR, averaged over the LR set.
    lr_planes = [lr.pixels for lr in lrs]
    errors = []
    for i in tied:
        down = blockmean_downscale_x3(hrs[i][0]).pixels
        errors.append(math.fsum(float(np.mean((down - p) ** 2)) for p in lr_planes) / len(lr_planes))
    return tied[int(np.argmin(errors))]


def select_clearest(member: DataMember, n: int = N_INPUTS) -> List[int]:
    """Indices into member.lr_list of the n clearest LR images, in network channel order."""
    if n > len(member.lr_list):
        raise StructuralError(f"asked for {n} LR images, member {member.member_id} has {len(member.lr_list)}")
    order = sorted(
        range(len(member.lr_list)),
        key=lambda i: (-clearance_ratio(member.lr_list[i].mask), member.lr_list[i].acquisition_index),
    )
    return order[:n]


def split_dataset(ds: Dataset, cfg: SplitConfig, exclude: Sequence[str] = ()) -> Tuple[Dataset, Dataset]:
    excluded = set(exclude)
    members = [m for m in ds.members if m.member_id not in excluded]
    if not members:
        raise ConfigError("nothing left to split")

    groups: Dict[str, List[DataMember]] = {}
    for m in members:
        groups.setdefault(m.tile_id, []).append(m)
    tiles = sorted(groups)
    rng = np.random.default_rng(cfg.seed)
    order = [tiles[i] for i in rng.permutation(len(tiles))]

    target = round(cfg.test_fraction * len(members))
    test_tiles = set()
    n_test = 0
    for tile in order:
        if n_test >= target:
            break
        test_tiles.add(tile)
        n_test += len(groups[tile])

    test = [m for m in members if m.tile_id in test_tiles]
    train = [m for m in members if m.tile_id not in test_tiles]
    if not test or not train:
        raise ConfigError(
            f"test_fraction {cfg.test_fraction} leaves an empty side ({len(train)} train / {len(test)} test)"
        )
    logger.info(f"split {len(members)} members: {len(train)} train / {len(test)} test ({len(tiles)} tiles)")
    return (
        Dataset(train, f"{ds.provenance}|train(seed={cfg.seed})"),
        Dataset(test, f"{ds.provenance}|test(seed={cfg.seed})"),
    )


def input_stack(member: DataMember, n: int = N_INPUTS, dtype=np.float32) -> np.ndarray:
    """(n, h, w) LR stack of the clearest images, ready to feed the network."""
    return np.stack([member.lr_list[i].image.pixels for i in select_clearest(member, n)]).astype(dtype)
