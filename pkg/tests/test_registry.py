import json

import numpy as np
import pytest

from misr.assembly import RULE_MIN_LR_COUNT, AdmissionRules, Dataset, SplitConfig
from misr.errors import StructuralError
from misr.raster import FULL_SCALE, Band, Image, QualityMask, write_image, write_mask
from misr.registry import (
    assign_split,
    build_registry,
    load_member_dir,
    load_members,
    persist_dataset,
    read_manifest,
    write_manifest,
)
from misr.simgen import gen_dataset

RULES = AdmissionRules(hr_size=48)


@pytest.fixture(scope="module")
def synthetic():
    return gen_dataset(seed=4, n_members=6, hr_size=48)


def test_persisted_dataset_reads_back(synthetic, tmp_path):
    persist_dataset(synthetic, tmp_path)
    ds, manifest = build_registry(tmp_path, RULES)

    assert [m.member_id for m in ds.members] == [
        "RED/tile0000", "RED/tile0001", "RED/tile0002", "NIR/tile0000", "NIR/tile0001", "NIR/tile0002",
    ]
    assert manifest["report"] == {"seen": 6, "admitted": 6, "rejected": {}}

    original = synthetic.by_id()
    for m in ds.members:
        src = original[m.member_id]
        assert np.max(np.abs(m.hr.pixels - src.hr.pixels)) <= 0.5 / FULL_SCALE
        assert [lr.acquisition_index for lr in m.lr_list] == [lr.acquisition_index for lr in src.lr_list]
        assert [lr.mask for lr in m.lr_list] == [lr.mask for lr in src.lr_list]


def test_manifest_records_rejections(make_member, tmp_path):
    persist_dataset(Dataset([make_member(n_lr=8, tile_id="short")], "fixture"), tmp_path)
    ds, manifest = build_registry(tmp_path, RULES)
    assert len(ds) == 0
    entry = manifest["members"][0]
    assert entry["admitted"] is False
    assert entry["rejection"]["rule"] == RULE_MIN_LR_COUNT
    assert entry["hr_file"] is None
    assert manifest["report"]["rejected"] == {RULE_MIN_LR_COUNT: 1}


def test_missing_mask_names_the_path(make_member, tmp_path):
    persist_dataset(Dataset([make_member(tile_id="t")], "fixture"), tmp_path)
    (tmp_path / "RED" / "t" / "QM003.png").unlink()
    with pytest.raises(FileNotFoundError, match="QM003.png"):
        build_registry(tmp_path, RULES)


def test_empty_root_is_an_error(tmp_path):
    with pytest.raises(FileNotFoundError):
        build_registry(tmp_path, RULES)
    with pytest.raises(FileNotFoundError):
        build_registry(tmp_path / "absent", RULES)


def test_clearer_hr_candidate_is_selected(make_member, tmp_path):
    member = make_member(tile_id="t")
    persist_dataset(Dataset([member], "fixture"), tmp_path)
    member_dir = tmp_path / "RED" / "t"
    half = np.ones((48, 48), dtype=bool)
    half[:10] = False
    write_mask(member_dir / "SM.png", QualityMask(half))
    write_image(member_dir / "HR001.png", member.hr)
    write_mask(member_dir / "SM001.png", QualityMask.all_clear(48, 48))

    result, entry = load_member_dir(member_dir, Band.RED, "t", RULES)
    assert entry["hr_file"] == "HR001.png"
    assert entry["hr_mask_file"] == "SM001.png"
    assert [c["file"] for c in entry["hr_candidates"]] == ["HR.png", "HR001.png"]
    assert result.hr_mask == QualityMask.all_clear(48, 48)


def test_lr_suffix_is_the_acquisition_index(make_member, tmp_path):
    persist_dataset(Dataset([make_member(tile_id="t")], "fixture"), tmp_path)
    member_dir = tmp_path / "RED" / "t"
    write_image(member_dir / "LR042.png", Image(np.full((16, 16), 0.5)))
    write_mask(member_dir / "QM042.png", QualityMask.all_clear(16, 16))
    result, entry = load_member_dir(member_dir, "RED", "t", RULES)
    assert result.lr_list[-1].acquisition_index == 42
    assert entry["lr"][-1]["kept"] is True


def test_split_is_recorded_and_reloadable(synthetic, tmp_path):
    persist_dataset(synthetic, tmp_path / "dataset")
    ds, manifest = build_registry(tmp_path / "dataset", RULES)
    train, test = assign_split(manifest, ds, SplitConfig(seed=1, test_fraction=0.3), exclude=["NIR/tile0001"])

    write_manifest(tmp_path / "manifest.json", manifest)
    back = read_manifest(tmp_path / "manifest.json")
    splits = {e["id"]: e["split"] for e in back["members"]}
    assert splits["NIR/tile0001"] == "excluded"
    assert sorted(k for k, v in splits.items() if v == "test") == sorted(m.member_id for m in test.members)
    assert back["split"]["exclude"] == ["NIR/tile0001"]

    reloaded = load_members(back, tmp_path / "dataset", "train")
    assert [m.member_id for m in reloaded.members] == [m.member_id for m in train.members]
    assert "NIR/tile0001" not in {m.member_id for m in reloaded.members}


def test_manifest_text_is_deterministic(synthetic, tmp_path):
    persist_dataset(synthetic, tmp_path / "dataset")
    texts = []
    for name in ("a.json", "b.json"):
        ds, manifest = build_registry(tmp_path / "dataset", RULES)
        assign_split(manifest, ds, SplitConfig(seed=1))
        write_manifest(tmp_path / name, manifest)
        texts.append((tmp_path / name).read_text())
    assert texts[0] == texts[1]


def test_manifest_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_manifest(tmp_path / "manifest.json")
    (tmp_path / "broken.json").write_text("{not json")
    with pytest.raises(StructuralError):
        read_manifest(tmp_path / "broken.json")
    (tmp_path / "bad.json").write_text(json.dumps({"members": [{"id": "RED/x"}]}))
    with pytest.raises(StructuralError):
        read_manifest(tmp_path / "bad.json")
    with pytest.raises(StructuralError):
        load_members({"members": [], "split": None}, tmp_path, "train")


def test_loading_rechecks_the_manifest_rules(make_member, tmp_path):
    persist_dataset(Dataset([make_member(tile_id="t")], "fixture"), tmp_path)
    _, manifest = build_registry(tmp_path, RULES)
    assert len(load_members(manifest, tmp_path)) == 1

    for lr in manifest["members"][0]["lr"][3:]:
        lr["kept"] = False
    with pytest.raises(StructuralError, match="3 LR images, need 9"):
        load_members(manifest, tmp_path)


def test_loading_rechecks_the_hr_size(make_member, tmp_path):
    persist_dataset(Dataset([make_member(tile_id="t")], "fixture"), tmp_path)
    _, manifest = build_registry(tmp_path, RULES)
    manifest["rules"]["hr_size"] = 96
    with pytest.raises(StructuralError, match="expected 96x96"):
        load_members(manifest, tmp_path)
    del manifest["rules"]
    with pytest.raises(StructuralError):
        load_members(manifest, tmp_path)


def test_file_names_pair_in_any_case(make_member, tmp_path):
    persist_dataset(Dataset([make_member(tile_id="t")], "fixture"), tmp_path)
    member_dir = tmp_path / "RED" / "t"
    for path in list(member_dir.iterdir()):
        if path.name.startswith(("LR", "SM")):
            path.rename(member_dir / path.name.lower())

    result, entry = load_member_dir(member_dir, Band.RED, "t", RULES)
    assert len(result.lr_list) == 9
    assert entry["hr_mask_file"] == "sm.png"
    assert [(lr["file"], lr["mask_file"]) for lr in entry["lr"]][:2] == [
        ("lr000.png", "QM000.png"), ("lr001.png", "QM001.png"),
    ]
