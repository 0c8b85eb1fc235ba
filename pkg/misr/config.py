# misr/config.py
import logging
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import yaml
from dotenv import load_dotenv

from misr.assembly import AdmissionRules, SplitConfig
from misr.errors import ConfigError
from misr.neuralnet.train import TrainConfig
from misr.simgen import ParamsDistribution
from misr.validator import validate_run_config

load_dotenv()

# ---- Config ----
LOG_LEVEL = os.getenv("MISR_LOG_LEVEL", "INFO")
LOG_FILE_NAME = os.getenv("MISR_LOG_FILE", "run.log")


@dataclass
class RunConfig:
    output_dir: str = "runs/default"
    data_root: Optional[str] = None
    seed: int = 7
    n_members: int = 20
    n_lr: int = 12
    hr_size: int = 384
    lr_clearance_min: float = 0.6
    hr_clearance_min: float = 0.75
    min_lr_count: int = 9
    n_inputs: int = 5
    test_fraction: float = 0.2
    split_seed: int = 1
    exclude: List[str] = field(default_factory=list)
    dump_images: bool = True
    train: Dict[str, Any] = field(default_factory=dict)
    simulator: Dict[str, Any] = field(default_factory=dict)

    @property
    def output_path(self) -> Path:
        return Path(self.output_dir)

    @property
    def dataset_root(self) -> Path:
        return Path(self.data_root) if self.data_root else self.output_path / "dataset"

    @property
    def manifest_path(self) -> Path:
        return self.output_path / "manifest.json"

    @property
    def params_path(self) -> Path:
        return self.output_path / "params.bin"

    def admission_rules(self) -> AdmissionRules:
        return AdmissionRules(self.lr_clearance_min, self.hr_clearance_min, self.min_lr_count, self.hr_size)

    def split_config(self) -> SplitConfig:
        return SplitConfig(self.split_seed, self.test_fraction)

    def train_config(self) -> TrainConfig:
        return TrainConfig(**self.train)

    def params_distribution(self) -> ParamsDistribution:
        return ParamsDistribution(**self.simulator)

    def as_dict(self) -> Dict[str, Any]:
        return asdict(self)


def load_run_config(path: Optional[Union[str, Path]] = None, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """YAML file first, then non-None overrides; the merged mapping must validate."""
    raw: Dict[str, Any] = {}
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as f:
                raw = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise ConfigError(f"config file {path} is not valid YAML: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigError(f"config file {path} must hold a mapping at top level")

    merged = dict(raw)
    for key, value in (overrides or {}).items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = {**merged[key], **value}
        elif value is not None:
            merged[key] = value
    validate_run_config(merged)
    cfg = RunConfig(**merged)
    # constructing these surfaces range errors before any work starts
    cfg.train_config()
    cfg.params_distribution()
    cfg.split_config()
    return cfg


def configure_logging(output_dir: Optional[Path] = None, level: str = LOG_LEVEL) -> None:
    """stderr without timestamps; the timestamped copy goes to the run log file."""
    root = logging.getLogger()
    for handler in [h for h in root.handlers if getattr(h, "_misr", False)]:
        root.removeHandler(handler)
        handler.close()
    root.setLevel(level.upper())

    console = logging.StreamHandler(sys.stderr)
    console.setFormatter(logging.Formatter("[%(levelname)s] %(name)s: %(message)s"))
    console._misr = True
    root.addHandler(console)

    if output_dir is not None:
        output_dir.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(output_dir / LOG_FILE_NAME, encoding="utf-8")
        file_handler.setFormatter(logging.Formatter("%(asctime)s [%(levelname)s] %(name)s: %(message)s"))
        file_handler._misr = True
        root.addHandler(file_handler)
