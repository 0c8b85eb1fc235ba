# misr/cli.py
"""
misr: one executable, one subcommand per pipeline stage. All state lives in
the output directory:

    dataset/<BAND>/<tile_id>/   ingestion layout (simulate writes it)
    manifest.json               admission decisions and split assignment
    baseline.csv                bicubic cPSNR per test member
    params.bin, history.csv     trained network and its per-epoch record
    sr/<BAND>/<tile_id>/SR.png  network output per test member
    members.csv, report.csv, report.json, dumps/
    run.log                     timestamped log copy
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional

from misr.assembly import Dataset, input_stack
from misr.config import LOG_LEVEL, RunConfig, configure_logging, load_run_config
from misr.errors import ConfigError, MisrError, TrainingDivergenceError
from misr.metric import baseline_score, cpsnr
from misr.neuralnet.network import forward
from misr.neuralnet.paramfile import load_params, save_params
from misr.neuralnet.train import train, write_history
from misr.raster import Image, write_image
from misr.registry import (
    assign_split,
    build_registry,
    load_members,
    persist_dataset,
    read_manifest,
    write_manifest,
)
from misr.report import ScoreReport, ScoreRow, dump_extremes, format_table, write_baseline_csv, write_report
from misr.simgen import gen_dataset

logger = logging.getLogger("misr")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


# ---- subcommands ----

def cmd_simulate(cfg: RunConfig) -> int:
    root = cfg.dataset_root
    if root.exists() and (not root.is_dir() or any(root.iterdir())):
        raise ConfigError(f"{root} already holds data; simulate needs an empty or new dataset root")
    ds = gen_dataset(cfg.seed, cfg.n_members, cfg.n_lr, cfg.params_distribution(), cfg.hr_size)
    persist_dataset(ds, cfg.dataset_root)
    _, manifest = build_registry(cfg.dataset_root, cfg.admission_rules())
    write_manifest(cfg.manifest_path, manifest)
    print(cfg.manifest_path)
    return EXIT_OK


def cmd_assemble(cfg: RunConfig) -> int:
    _, manifest = build_registry(cfg.dataset_root, cfg.admission_rules())
    write_manifest(cfg.manifest_path, manifest)
    report = manifest["report"]
    logger.info(f"admitted {report['admitted']}/{report['seen']}; rejected by rule: {report['rejected']}")
    print(cfg.manifest_path)
    return EXIT_OK


def cmd_split(cfg: RunConfig) -> int:
    manifest = read_manifest(cfg.manifest_path)
    ds = load_members(manifest, cfg.dataset_root)
    assign_split(manifest, ds, cfg.split_config(), cfg.exclude)
    write_manifest(cfg.manifest_path, manifest)
    print(cfg.manifest_path)
    return EXIT_OK


def _test_set(cfg: RunConfig) -> Dataset:
    return load_members(read_manifest(cfg.manifest_path), cfg.dataset_root, "test")


def cmd_baseline(cfg: RunConfig) -> int:
    ds = _test_set(cfg)
    scores = {m.member_id: baseline_score(m) for m in ds.members}
    path = cfg.output_path / "baseline.csv"
    write_baseline_csv(path, scores, {m.member_id: m.band.value for m in ds.members})
    print(path)
    return EXIT_OK


def cmd_train(cfg: RunConfig) -> int:
    manifest = read_manifest(cfg.manifest_path)
    ds_train = load_members(manifest, cfg.dataset_root, "train")
    ds_val = load_members(manifest, cfg.dataset_root, "test")
    params, history = train(ds_train, cfg.train_config(), ds_val)
    save_params(cfg.params_path, params)
    write_history(cfg.output_path / "history.csv", history)
    print(cfg.params_path)
    return EXIT_OK


def _require_params(cfg: RunConfig):
    if not cfg.params_path.is_file():
        raise FileNotFoundError(f"{cfg.params_path} is missing (run train first)")
    return load_params(cfg.params_path)


def _super_resolve(cfg: RunConfig, ds: Dataset) -> Dict[str, Image]:
    params = _require_params(cfg)
    return {m.member_id: forward(params, input_stack(m, cfg.n_inputs)) for m in ds.members}


def cmd_infer(cfg: RunConfig) -> int:
    ds = _test_set(cfg)
    srs = _super_resolve(cfg, ds)
    for m in ds.members:
        out_dir = cfg.output_path / "sr" / m.band.value / m.tile_id
        out_dir.mkdir(parents=True, exist_ok=True)
        write_image(out_dir / "SR.png", srs[m.member_id])
    logger.info(f"wrote {len(srs)} SR images")
    print(cfg.output_path / "sr")
    return EXIT_OK


def cmd_evaluate(cfg: RunConfig) -> int:
    ds = _test_set(cfg)
    srs = _super_resolve(cfg, ds)
    rows = [
        ScoreRow(
            member_id=m.member_id,
            band=m.band.value,
            cpsnr_bicubic=baseline_score(m),
            cpsnr_network=cpsnr(m.hr, m.hr_mask, srs[m.member_id]).cpsnr,
        )
        for m in ds.members
    ]
    report = ScoreReport(rows)
    write_report(cfg.output_path, report)
    if cfg.dump_images:
        dump_extremes(cfg.output_path / "dumps", report, ds, srs)
    print(format_table(report))
    return EXIT_OK


COMMANDS = {
    "simulate": (cmd_simulate, "generate a synthetic dataset in the ingestion layout"),
    "assemble": (cmd_assemble, "admit member directories and write the manifest"),
    "split": (cmd_split, "assign admitted members to train/test by tile"),
    "baseline": (cmd_baseline, "score the bicubic baseline on the test split"),
    "train": (cmd_train, "train the network on the train split"),
    "infer": (cmd_infer, "super-resolve the test split with trained parameters"),
    "evaluate": (cmd_evaluate, "compare network and bicubic cPSNR per band"),
}


# ---- argument handling ----

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="misr", description="Multi-image super-resolution toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=Path, help="YAML run config")
        p.add_argument("--output-dir", dest="output_dir")
        p.add_argument("--data-root", dest="data_root")
        p.add_argument("--seed", type=int)
        p.add_argument("--n-members", dest="n_members", type=int)
        p.add_argument("--hr-size", dest="hr_size", type=int)
        p.add_argument("--split-seed", dest="split_seed", type=int)
        p.add_argument("--test-fraction", dest="test_fraction", type=float)
        p.add_argument("--exclude", action="append", metavar="BAND/TILE", help="repeatable")
        p.add_argument("--epochs", type=int)
        p.add_argument("--no-dump", dest="dump_images", action="store_const", const=False)
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _overrides(args: argparse.Namespace) -> Dict:
    keys = ("output_dir", "data_root", "seed", "n_members", "hr_size", "split_seed", "test_fraction", "exclude", "dump_images")
    overrides = {k: getattr(args, k) for k in keys}
    if args.epochs is not None:
        overrides["train"] = {"epochs": args.epochs}
    return overrides


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = "DEBUG" if args.verbose else LOG_LEVEL
    configure_logging(level=level)
    handler, _ = COMMANDS[args.command]
    try:
        cfg = load_run_config(args.config, _overrides(args))
        configure_logging(cfg.output_path, level=level)
        logger.info(f"misr {args.command} -> {cfg.output_path}")
        return handler(cfg)
    except TrainingDivergenceError as e:
        logger.error(f"misr {args.command} failed: {e}")
        return EXIT_FAILURE
    except (MisrError, OSError) as e:
        logger.error(f"misr {args.command} failed: {e}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
