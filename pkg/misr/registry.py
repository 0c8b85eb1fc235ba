# misr/registry.py
"""
On-disk dataset layout and the JSON manifest.

    <root>/<BAND>/<tile_id>/HR.png, SM.png          HR candidate and its mask
                           HR001.png, SM001.png     further HR candidates
                           LR000.png, QM000.png     LR acquisitions and masks

Files pair by the suffix after the two-letter prefix. A numeric LR suffix is
the acquisition index.
"""
import json
import logging
import re
from collections import Counter
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

from misr.assembly import AdmissionRules, Dataset, Rejection, SplitConfig, admit_member, split_dataset
from misr.errors import StructuralError
from misr.raster import Band, DataMember, LowRes, clearance, read_image, read_mask, write_image, write_mask
from misr.validator import validate_manifest, validate_member

logger = logging.getLogger(__name__)

MANIFEST_VERSION = 1
_NAME = re.compile(r"^(HR|SM|LR|QM)(\d*)\.png$", re.IGNORECASE)

PathLike = Union[str, Path]


def _list_names(member_dir: Path) -> Dict[Tuple[str, str], Path]:
    """(upper-case prefix, suffix) -> path for every recognised file; names match in any case."""
    found: Dict[Tuple[str, str], Path] = {}
    for path in sorted(member_dir.iterdir()):
        m = _NAME.match(path.name)
        if not m:
            continue
        key = (m.group(1).upper(), m.group(2))
        if key in found:
            raise StructuralError(f"{found[key].name} and {path.name} in {member_dir} differ only in case")
        found[key] = path
    return found


def _pair_files(member_dir: Path, image_prefix: str, mask_prefix: str) -> List[Tuple[str, Path, Path]]:
    """(suffix, image path, mask path) for every image file; a missing mask raises FileNotFoundError."""
    found = _list_names(member_dir)
    pairs = []
    for (prefix, suffix), path in sorted(found.items()):
        if prefix != image_prefix:
            continue
        mask_path = found.get((mask_prefix, suffix))
        if mask_path is None:
            raise FileNotFoundError(f"{member_dir / f'{mask_prefix}{suffix}.png'} (mask for {path.name}) is missing")
        pairs.append((suffix, path, mask_path))
    return pairs


def _acquisition_indices(suffixes: Sequence[str]) -> List[int]:
    if all(s.isdigit() for s in suffixes):
        return [int(s) for s in suffixes]
    return list(range(len(suffixes)))


def load_member_dir(
    member_dir: PathLike,
    band: Union[Band, str],
    tile_id: str,
    rules: AdmissionRules = AdmissionRules(),
) -> Tuple[Union[DataMember, Rejection], Dict[str, Any]]:
    """Admit one member directory. Returns the admission result and its manifest entry."""
    member_dir = Path(member_dir)
    band = Band(band)
    hr_pairs = _pair_files(member_dir, "HR", "SM")
    lr_pairs = _pair_files(member_dir, "LR", "QM")
    if not hr_pairs:
        raise FileNotFoundError(f"{member_dir / 'HR.png'} is missing")

    hrs = [(read_image(img), read_mask(mask)) for _, img, mask in hr_pairs]
    indices = _acquisition_indices([s for s, _, _ in lr_pairs])
    lrs = [(read_image(img), read_mask(mask), idx) for (_, img, mask), idx in zip(lr_pairs, indices)]

    result = admit_member(hrs, lrs, band, tile_id, rules)
    kept = set()
    hr_choice: Optional[int] = None
    if isinstance(result, DataMember):
        kept = {lr.acquisition_index for lr in result.lr_list}
        hr_choice = next(i for i, (img, mask) in enumerate(hrs) if img == result.hr and mask == result.hr_mask)

    entry = {
        "id": f"{band.value}/{tile_id}",
        "band": band.value,
        "tile_id": tile_id,
        "path": f"{band.value}/{tile_id}",
        "admitted": isinstance(result, DataMember),
        "rejection": None if isinstance(result, DataMember) else {"rule": result.rule, "detail": result.detail},
        "hr_file": None if hr_choice is None else hr_pairs[hr_choice][1].name,
        "hr_mask_file": None if hr_choice is None else hr_pairs[hr_choice][2].name,
        "hr_clearance": None if hr_choice is None else clearance(hrs[hr_choice][1]),
        "hr_candidates": [
            {"file": img.name, "mask_file": mask.name, "clearance": clearance(m)}
            for (_, img, mask), (_, m) in zip(hr_pairs, hrs)
        ],
        "lr": [
            {
                "file": img.name,
                "mask_file": mask.name,
                "acquisition_index": idx,
                "clearance": clearance(m),
                "kept": idx in kept,
            }
            for (_, img, mask), (_, m, idx) in zip(lr_pairs, lrs)
        ],
        "split": None,
    }
    return result, entry


def _member_dirs(root: Path):
    for band in Band:
        band_dir = root / band.value
        if not band_dir.is_dir():
            continue
        for tile_dir in sorted(p for p in band_dir.iterdir() if p.is_dir()):
            yield band, tile_dir


def build_registry(root: PathLike, rules: AdmissionRules = AdmissionRules()) -> Tuple[Dataset, Dict[str, Any]]:
    """
    Walk the ingestion root and admit every member directory.

    Returns the admitted dataset and a manifest holding one entry per
    directory, admitted or not, plus rejection counts by rule.
    """
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"{root} is not a directory")

    members: List[DataMember] = []
    entries: List[Dict[str, Any]] = []
    rejected = Counter()
    for band, tile_dir in _member_dirs(root):
        result, entry = load_member_dir(tile_dir, band, tile_dir.name, rules)
        entries.append(entry)
        if isinstance(result, DataMember):
            members.append(result)
        else:
            rejected[result.rule] += 1
            logger.info(f"rejected {result.member_id}: {result.rule} ({result.detail})")

    if not entries:
        raise FileNotFoundError(f"no member directories under {root} (expected <BAND>/<tile_id>/)")

    manifest = {
        "version": MANIFEST_VERSION,
        "root": str(root),
        "rules": {
            "lr_clearance_min": rules.lr_clearance_min,
            "hr_clearance_min": rules.hr_clearance_min,
            "min_lr_count": rules.min_lr_count,
            "hr_size": rules.hr_size,
        },
        "report": {
            "seen": len(entries),
            "admitted": len(members),
            "rejected": dict(sorted(rejected.items())),
        },
        "split": None,
        "members": entries,
    }
    logger.info(f"registry: {len(members)}/{len(entries)} members admitted from {root}")
    return Dataset(members, f"ingest:{root}"), manifest


def persist_dataset(ds: Dataset, root: PathLike) -> List[Path]:
    """Write every member into the ingestion layout; returns the member directories."""
    root = Path(root)
    written = []
    for m in ds.members:
        member_dir = root / m.band.value / m.tile_id
        member_dir.mkdir(parents=True, exist_ok=True)
        write_image(member_dir / "HR.png", m.hr)
        write_mask(member_dir / "SM.png", m.hr_mask)
        for lr in m.lr_list:
            write_image(member_dir / f"LR{lr.acquisition_index:03d}.png", lr.image)
            write_mask(member_dir / f"QM{lr.acquisition_index:03d}.png", lr.mask)
        written.append(member_dir)
    logger.info(f"persisted {len(written)} members under {root}")
    return written


def assign_split(
    manifest: Dict[str, Any],
    ds: Dataset,
    cfg: SplitConfig,
    exclude: Sequence[str] = (),
) -> Tuple[Dataset, Dataset]:
    """Split the admitted members and record train/test/excluded in the manifest."""
    known = {e["id"] for e in manifest["members"]}
    for member_id in exclude:
        if member_id not in known:
            logger.warning(f"exclusion list names unknown member {member_id}")

    train, test = split_dataset(ds, cfg, exclude)
    assignment = {m.member_id: "train" for m in train.members}
    assignment.update({m.member_id: "test" for m in test.members})
    excluded = set(exclude)
    for entry in manifest["members"]:
        if not entry["admitted"]:
            entry["split"] = None
        elif entry["id"] in excluded:
            entry["split"] = "excluded"
        else:
            entry["split"] = assignment[entry["id"]]

    manifest["split"] = {
        "seed": cfg.seed,
        "test_fraction": cfg.test_fraction,
        "exclude": sorted(excluded),
        "train": len(train),
        "test": len(test),
    }
    return train, test


def write_manifest(path: PathLike, manifest: Dict[str, Any]) -> None:
    validate_manifest(manifest)
    text = json.dumps(manifest, indent=2, sort_keys=True, ensure_ascii=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


def read_manifest(path: PathLike) -> Dict[str, Any]:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"{path} is missing (run assemble first)")
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise StructuralError(f"{path} is not valid JSON: {e}") from e
    validate_manifest(manifest)
    return manifest


def manifest_rules(manifest: Dict[str, Any]) -> AdmissionRules:
    """The admission rules the manifest's members were admitted under."""
    rules = manifest.get("rules")
    if not isinstance(rules, dict):
        raise StructuralError("manifest carries no admission rules")
    try:
        return AdmissionRules(
            float(rules["lr_clearance_min"]),
            float(rules["hr_clearance_min"]),
            int(rules["min_lr_count"]),
            int(rules["hr_size"]),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise StructuralError(f"manifest rules are incomplete: {e}") from e


def _load_entry(entry: Dict[str, Any], root: Path, rules: AdmissionRules) -> DataMember:
    member_dir = root / entry["path"]
    lr_list = [
        LowRes(read_image(member_dir / lr["file"]), read_mask(member_dir / lr["mask_file"]), lr["acquisition_index"])
        for lr in entry["lr"]
        if lr["kept"]
    ]
    member = DataMember(
        entry["band"],
        entry["tile_id"],
        read_image(member_dir / entry["hr_file"]),
        read_mask(member_dir / entry["hr_mask_file"]),
        tuple(lr_list),
    )
    # the files or the manifest may have changed since admission
    validate_member(member, rules)
    return member


def load_members(manifest: Dict[str, Any], root: Optional[PathLike] = None, split: Optional[str] = None) -> Dataset:
    """Re-read admitted members; with a split name only those assigned to it (never "excluded" ones)."""
    if split is not None and manifest.get("split") is None:
        raise StructuralError("manifest carries no split assignment (run split first)")
    rules = manifest_rules(manifest)
    root = Path(root) if root is not None else Path(manifest["root"])
    entries = [e for e in manifest["members"] if e["admitted"]]
    if split is not None:
        entries = [e for e in entries if e["split"] == split]
    members = [_load_entry(e, root, rules) for e in entries]
    return Dataset(members, f"ingest:{root}" + (f"|{split}" if split else ""))
