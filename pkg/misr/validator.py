# misr/validator.py
from dataclasses import fields
from typing import Any, Dict

from misr.assembly import N_INPUTS, AdmissionRules
from misr.errors import ConfigError, StructuralError
from misr.neuralnet.train import TrainConfig
from misr.raster import clearance_ratio
from misr.simgen import ParamsDistribution

RUN_CONFIG_KEYS = {
    "output_dir": str,
    "data_root": (str, type(None)),
    "seed": int,
    "n_members": int,
    "n_lr": int,
    "hr_size": int,
    "lr_clearance_min": (int, float),
    "hr_clearance_min": (int, float),
    "min_lr_count": int,
    "n_inputs": int,
    "test_fraction": (int, float),
    "split_seed": int,
    "exclude": list,
    "dump_images": bool,
    "train": dict,
    "simulator": dict,
}

MANIFEST_MEMBER_KEYS = {
    "id",
    "band",
    "tile_id",
    "path",
    "admitted",
    "rejection",
    "hr_file",
    "hr_clearance",
    "lr",
    "split",
}


def _check_section(section: Dict[str, Any], allowed: Dict[str, Any], where: str, errors: list) -> None:
    for key in sorted(set(section) - set(allowed)):
        errors.append(f"{where}: unknown key '{key}'")
    for key, value in section.items():
        expected = allowed.get(key)
        if expected is None:
            continue
        # bool is an int subclass; only accept it where bool is asked for
        if isinstance(value, bool) and expected is not bool:
            errors.append(f"{where}.{key} must be {expected}, got bool")
        elif not isinstance(value, expected):
            errors.append(f"{where}.{key} must be {expected}, got {type(value).__name__}")


def _dataclass_types(cls) -> Dict[str, Any]:
    mapping = {"int": int, "float": (int, float), "bool": bool}
    return {f.name: mapping.get(f.type if isinstance(f.type, str) else f.type.__name__, object) for f in fields(cls)}


def validate_run_config(raw: Dict[str, Any]) -> bool:
    if not isinstance(raw, dict):
        raise ConfigError(f"❌ Run config must be a mapping, got {type(raw).__name__}")

    errors = []
    _check_section(raw, RUN_CONFIG_KEYS, "config", errors)
    if isinstance(raw.get("train"), dict):
        _check_section(raw["train"], _dataclass_types(TrainConfig), "config.train", errors)
    if isinstance(raw.get("simulator"), dict):
        _check_section(raw["simulator"], _dataclass_types(ParamsDistribution), "config.simulator", errors)

    for key in ("n_members", "n_lr", "min_lr_count", "n_inputs"):
        if isinstance(raw.get(key), int) and raw[key] < 1:
            errors.append(f"config.{key} must be >= 1")
    for key in ("lr_clearance_min", "hr_clearance_min"):
        value = raw.get(key)
        if isinstance(value, (int, float)) and not 0.0 <= value <= 1.0:
            errors.append(f"config.{key} must lie in [0, 1]")
    if isinstance(raw.get("n_inputs"), int) and raw["n_inputs"] != N_INPUTS:
        errors.append(f"config.n_inputs must be {N_INPUTS}, the network input width")
    if isinstance(raw.get("n_inputs"), int) and isinstance(raw.get("min_lr_count"), int) and raw["n_inputs"] > raw["min_lr_count"]:
        errors.append("config.n_inputs cannot exceed config.min_lr_count")
    if isinstance(raw.get("hr_size"), int) and (raw["hr_size"] <= 0 or raw["hr_size"] % 3):
        errors.append("config.hr_size must be a positive multiple of 3")
    if not all(isinstance(e, str) for e in raw.get("exclude", [])):
        errors.append("config.exclude must list member ids as strings")

    if errors:
        raise ConfigError("❌ Run config validation failed:\n" + "\n".join(errors))
    return True


def validate_member(member, rules) -> bool:
    errors = []
    if member.hr.shape != (rules.hr_size, rules.hr_size):
        errors.append(f"{member.member_id}: HR is {member.hr.shape}, expected {rules.hr_size}x{rules.hr_size}")
    if len(member.lr_list) < rules.min_lr_count:
        errors.append(f"{member.member_id}: {len(member.lr_list)} LR images, need {rules.min_lr_count}")
    if clearance_ratio(member.hr_mask) < AdmissionRules.exact(rules.hr_clearance_min):
        errors.append(f"{member.member_id}: HR clearance below {rules.hr_clearance_min}")
    for lr in member.lr_list:
        if clearance_ratio(lr.mask) < AdmissionRules.exact(rules.lr_clearance_min):
            errors.append(f"{member.member_id}: LR {lr.acquisition_index} clearance below {rules.lr_clearance_min}")

    if errors:
        raise StructuralError("❌ Member validation failed:\n" + "\n".join(errors))
    return True


def validate_manifest(manifest: Dict[str, Any]) -> bool:
    errors = []
    if not isinstance(manifest.get("members"), list):
        raise StructuralError("❌ Manifest has no member list")

    for i, entry in enumerate(manifest["members"]):
        missing = MANIFEST_MEMBER_KEYS - entry.keys()
        if missing:
            errors.append(f"Member[{i}] missing keys: {sorted(missing)}")
        if entry.get("split") not in {None, "train", "test", "excluded"}:
            errors.append(f"Member[{i}] invalid split: {entry.get('split')}")
        if entry.get("admitted") and entry.get("rejection"):
            errors.append(f"Member[{i}] is admitted but carries a rejection")

    if errors:
        raise StructuralError("❌ Manifest validation failed:\n" + "\n".join(errors))
    return True
