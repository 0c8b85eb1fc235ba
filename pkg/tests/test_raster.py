import io
from fractions import Fraction

import numpy as np
import png
import pytest

from misr.errors import BoundsError, DecodeError, DimensionError, MisrError, RangeError
from misr.raster import (
    FULL_SCALE,
    Band,
    DataMember,
    Image,
    LowRes,
    QualityMask,
    clearance,
    clearance_ratio,
    crop,
    decode_image,
    decode_mask,
    encode_image,
    encode_mask,
    read_image,
    read_mask,
    write_image,
    write_mask,
)


def _png(rows, bitdepth, greyscale=True):
    buf = io.BytesIO()
    width = len(rows[0]) // (1 if greyscale else 3)
    png.Writer(width=width, height=len(rows), greyscale=greyscale, bitdepth=bitdepth).write(buf, rows)
    return buf.getvalue()


def test_image_rejects_out_of_range_and_non_finite():
    with pytest.raises(RangeError) as info:
        Image(np.full((4, 4), 1.5))
    assert isinstance(info.value, MisrError)
    with pytest.raises(RangeError):
        Image(np.full((4, 4), np.nan))
    with pytest.raises(DimensionError):
        Image(np.zeros(16))


def test_image_pixels_are_read_only():
    img = Image(np.zeros((3, 3)))
    with pytest.raises(ValueError):
        img.pixels[0, 0] = 0.5


def test_clamped_clips_into_unit_range():
    img = Image.clamped([[-0.2, 0.5], [1.3, 1.0]])
    assert img.pixels.tolist() == [[0.0, 0.5], [1.0, 1.0]]


def test_clearance_is_exact(mask_with_clear):
    mask = mask_with_clear(20, 240)
    assert clearance_ratio(mask) == Fraction(3, 5)
    assert clearance(mask) == pytest.approx(0.6)
    assert mask.concealed_count == 160


def test_all_concealed_mask_has_zero_clearance():
    mask = QualityMask(np.zeros((5, 5), dtype=bool))
    assert clearance_ratio(mask) == 0


def test_crop_returns_region_and_checks_bounds():
    img = Image(np.arange(36, dtype=float).reshape(6, 6) / 35)
    region = crop(img, 1, 2, 3, 2)
    assert region.shape == (2, 3)
    assert region.pixels[0, 0] == img.pixels[2, 1]
    with pytest.raises(BoundsError):
        crop(img, 4, 0, 3, 3)
    with pytest.raises(BoundsError):
        crop(img, -1, 0, 2, 2)


def test_image_codec_preserves_raw_values():
    raw = np.array([[0, 1, 2], [65533, 65534, FULL_SCALE]], dtype=np.uint16)
    img = Image(raw / FULL_SCALE)
    decoded = decode_image(encode_image(img))
    assert np.array_equal(np.rint(decoded.pixels * FULL_SCALE).astype(np.uint16), raw)


def test_image_file_io(tmp_path):
    img = Image(np.linspace(0, 1, 12).reshape(3, 4))
    write_image(tmp_path / "HR.png", img)
    back = read_image(tmp_path / "HR.png")
    assert back.shape == (3, 4)
    assert np.max(np.abs(back.pixels - img.pixels)) <= 0.5 / FULL_SCALE


def test_decode_image_rejects_8_bit_and_colour():
    with pytest.raises(DecodeError):
        decode_image(_png([[0, 128], [255, 7]], bitdepth=8))
    with pytest.raises(DecodeError):
        decode_image(_png([[0, 0, 0, 1, 1, 1]], bitdepth=16, greyscale=False))


def test_decode_rejects_garbage():
    with pytest.raises(DecodeError):
        decode_image(b"not a png at all")
    with pytest.raises(DecodeError):
        decode_mask(b"\x89PNG\r\n\x1a\n truncated")


def test_decode_mask_accepts_8_bit_nonzero_as_clear():
    mask = decode_mask(_png([[0, 255, 1], [0, 0, 17]], bitdepth=8))
    assert mask.clear.tolist() == [[False, True, True], [False, False, True]]


def test_mask_file_io_is_1_bit(tmp_path):
    mask = QualityMask(np.array([[True, False, True], [False, True, True]]))
    write_mask(tmp_path / "QM000.png", mask)
    _, _, _, info = png.Reader(filename=str(tmp_path / "QM000.png")).read()
    assert info["bitdepth"] == 1
    assert read_mask(tmp_path / "QM000.png") == mask
    assert decode_mask(encode_mask(mask)) == mask


def test_data_member_requires_matching_geometry():
    hr = Image(np.zeros((9, 9)))
    lr = LowRes(Image(np.zeros((3, 3))), QualityMask.all_clear(3, 3), 0)
    member = DataMember("NIR", "imgset0001", hr, QualityMask.all_clear(9, 9), [lr])
    assert member.band is Band.NIR
    assert member.member_id == "NIR/imgset0001"
    assert member.lr_size == 3

    bad_lr = LowRes(Image(np.zeros((4, 4))), QualityMask.all_clear(4, 4), 1)
    with pytest.raises(DimensionError):
        DataMember(Band.RED, "x", hr, QualityMask.all_clear(9, 9), [bad_lr])
    with pytest.raises(DimensionError):
        DataMember(Band.RED, "x", hr, QualityMask.all_clear(6, 6), [lr])
