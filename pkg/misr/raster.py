# misr/raster.py
"""
Single-band rasters, their quality masks and the 16-bit PNG codec.

Intensities are float64 in [0, 1], decoded from raw 16-bit values as
raw / 65535. Masks hold True for clear pixels and False for concealed ones.
"""
import io
import zlib
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Tuple, Union

import numpy as np
import png

from misr.errors import BoundsError, DecodeError, DimensionError, RangeError

HR_SIZE = 384
LR_SIZE = 128
SCALE = 3
FULL_SCALE = 65535


class Band(str, Enum):
    RED = "RED"
    NIR = "NIR"


def _as_plane(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise DimensionError(f"expected a non-empty 2-D raster, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Image:
    pixels: np.ndarray

    def __post_init__(self):
        arr = _as_plane(self.pixels, np.float64)
        if not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0:
            raise RangeError("Image intensities must be finite and lie in [0, 1]")
        object.__setattr__(self, "pixels", arr)

    @classmethod
    def clamped(cls, values) -> "Image":
        return cls(np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0))

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.pixels.shape

    def region(self, u: int, v: int, w: int, h: int) -> "Image":
        return Image(self.pixels[v:v + h, u:u + w])

    def __eq__(self, other):
        return isinstance(other, Image) and np.array_equal(self.pixels, other.pixels)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class QualityMask:
    clear: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "clear", _as_plane(self.clear, bool))

    @classmethod
    def all_clear(cls, height: int, width: int) -> "QualityMask":
        return cls(np.ones((height, width), dtype=bool))

    @property
    def height(self) -> int:
        return self.clear.shape[0]

    @property
    def width(self) -> int:
        return self.clear.shape[1]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.clear.shape

    @property
    def total(self) -> int:
        return self.clear.size

    @property
    def clear_count(self) -> int:
        return int(np.count_nonzero(self.clear))

    @property
    def concealed_count(self) -> int:
        return self.total - self.clear_count

    def region(self, u: int, v: int, w: int, h: int) -> "QualityMask":
        return QualityMask(self.clear[v:v + h, u:u + w])

    def __eq__(self, other):
        return isinstance(other, QualityMask) and np.array_equal(self.clear, other.clear)

    __hash__ = None


Raster = Union[Image, QualityMask]


def clearance(mask: QualityMask) -> float:
    return mask.clear_count / mask.total


def clearance_ratio(mask: QualityMask) -> Fraction:
    """Exact clear fraction, used wherever a threshold decides admission."""
    return Fraction(mask.clear_count, mask.total)


def crop(raster: Raster, u: int, v: int, w: int, h: int) -> Raster:
    if u < 0 or v < 0 or w < 1 or h < 1 or u + w > raster.width or v + h > raster.height:
        raise BoundsError(
            f"crop ({u},{v}) {w}x{h} exceeds raster {raster.width}x{raster.height}"
        )
    return raster.region(u, v, w, h)


# ---- PNG codec ----

def _read_png(data: bytes, what: str):
    try:
        width, height, rows, info = png.Reader(bytes=data).read()
        plane = np.vstack([np.asarray(row, dtype=np.uint32) for row in rows])
    except (png.Error, ValueError, EOFError, zlib.error) as e:
        raise DecodeError(f"malformed {what} PNG: {e}") from e

    if not info.get("greyscale") or info.get("alpha") or info.get("planes", 1) != 1:
        raise DecodeError(f"{what} must be a single-band greyscale raster without alpha")
    if plane.shape != (height, width):
        raise DecodeError(f"{what} rows do not match declared size {width}x{height}")
    return plane, info["bitdepth"]


def decode_image(data: bytes) -> Image:
    raw, bitdepth = _read_png(data, "image")
    if bitdepth != 16:
        raise DecodeError(f"image must be 16-bit, got {bitdepth}-bit")
    return Image(raw.astype(np.float64) / FULL_SCALE)


def encode_image(img: Image) -> bytes:
    raw = np.rint(img.pixels * FULL_SCALE).astype(np.uint16)
    buf = io.BytesIO()
    png.Writer(width=img.width, height=img.height, greyscale=True, bitdepth=16).write(buf, raw.tolist())
    return buf.getvalue()


def decode_mask(data: bytes) -> QualityMask:
    raw, bitdepth = _read_png(data, "mask")
    if bitdepth not in (1, 8, 16):
        raise DecodeError(f"mask must be 1-, 8- or 16-bit, got {bitdepth}-bit")
    return QualityMask(raw != 0)


def encode_mask(mask: QualityMask) -> bytes:
    buf = io.BytesIO()
    rows = mask.clear.astype(np.uint8).tolist()
    png.Writer(width=mask.width, height=mask.height, greyscale=True, bitdepth=1).write(buf, rows)
    return buf.getvalue()


def read_image(path: Union[str, Path]) -> Image:
    return decode_image(Path(path).read_bytes())


def write_image(path: Union[str, Path], img: Image) -> None:
    Path(path).write_bytes(encode_image(img))


def read_mask(path: Union[str, Path]) -> QualityMask:
    return decode_mask(Path(path).read_bytes())


def write_mask(path: Union[str, Path], mask: QualityMask) -> None:
    Path(path).write_bytes(encode_mask(mask))


# ---- data members ----

@dataclass(frozen=True)
class LowRes:
    image: Image
    mask: QualityMask
    acquisition_index: int


@dataclass(frozen=True)
class DataMember:
    band: Band
    tile_id: str
    hr: Image
    hr_mask: QualityMask
    lr_list: Tuple[LowRes, ...]

    def __post_init__(self):
        object.__setattr__(self, "band", Band(self.band))
        object.__setattr__(self, "lr_list", tuple(self.lr_list))
        if self.hr.shape != self.hr_mask.shape:
            raise DimensionError(f"HR mask {self.hr_mask.shape} does not match HR {self.hr.shape}")
        for lr in self.lr_list:
            if lr.image.shape != lr.mask.shape:
                raise DimensionError(f"LR {lr.acquisition_index} mask does not match its image")
            if tuple(SCALE * n for n in lr.image.shape) != self.hr.shape:
                raise DimensionError(
                    f"LR {lr.acquisition_index} shape {lr.image.shape} is not HR {self.hr.shape} / {SCALE}"
                )

    @property
    def member_id(self) -> str:
        return f"{self.band.value}/{self.tile_id}"

    @property
    def lr_size(self) -> int:
        return self.hr.height // SCALE
