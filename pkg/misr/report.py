# misr/report.py
import csv
import io
import json
import logging
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, List, Sequence, Union

import numpy as np
import png

from misr.assembly import Dataset
from misr.metric import max_clearance_lrs
from misr.raster import Band, DataMember, Image
from misr.resample import bicubic_upscale_x3

logger = logging.getLogger(__name__)

MEMBER_COLUMNS = ("member_id", "band", "cpsnr_bicubic", "cpsnr_network", "winner")
REPORT_COLUMNS = ("band", "avg_cpsnr_bicubic", "avg_cpsnr_network", "n_images", "n_network_wins")
ALL_BANDS = "ALL"
DUMP_GAP = 4

PathLike = Union[str, Path]


@dataclass(frozen=True)
class ScoreRow:
    member_id: str
    band: str
    cpsnr_bicubic: float
    cpsnr_network: float

    @property
    def winner(self) -> str:
        return "network" if self.cpsnr_network > self.cpsnr_bicubic else "bicubic"

    @property
    def gain(self) -> float:
        return self.cpsnr_network - self.cpsnr_bicubic


@dataclass(frozen=True)
class BandSummary:
    band: str
    avg_cpsnr_bicubic: float
    avg_cpsnr_network: float
    n_images: int
    n_network_wins: int


def summarize(rows: Sequence[ScoreRow], band: str) -> BandSummary:
    picked = [r for r in rows if band == ALL_BANDS or r.band == band]
    if not picked:
        raise ValueError(f"no rows for band {band}")
    return BandSummary(
        band=band,
        avg_cpsnr_bicubic=math.fsum(r.cpsnr_bicubic for r in picked) / len(picked),
        avg_cpsnr_network=math.fsum(r.cpsnr_network for r in picked) / len(picked),
        n_images=len(picked),
        n_network_wins=sum(r.winner == "network" for r in picked),
    )


@dataclass(frozen=True)
class ScoreReport:
    rows: List[ScoreRow]

    @property
    def aggregates(self) -> List[BandSummary]:
        """One summary per band that has rows, then the combined one."""
        bands = [b.value for b in Band if any(r.band == b.value for r in self.rows)]
        return [summarize(self.rows, b) for b in bands] + [summarize(self.rows, ALL_BANDS)]

    def as_dict(self) -> Dict:
        return {
            "members": [dict(asdict(r), winner=r.winner) for r in self.rows],
            "aggregates": [asdict(a) for a in self.aggregates],
        }

    def best_and_worst(self):
        ranked = sorted(self.rows, key=lambda r: (r.gain, r.member_id))
        return ranked[-1], ranked[0]


def _write_csv(path: PathLike, columns, records) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(columns)
        for rec in records:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in rec])


def write_members_csv(path: PathLike, report: ScoreReport) -> None:
    _write_csv(path, MEMBER_COLUMNS, [(r.member_id, r.band, r.cpsnr_bicubic, r.cpsnr_network, r.winner) for r in report.rows])


def write_baseline_csv(path: PathLike, scores: Dict[str, float], bands: Dict[str, str]) -> None:
    _write_csv(path, ("member_id", "band", "cpsnr_bicubic"), [(k, bands[k], scores[k]) for k in sorted(scores)])


def write_report(output_dir: PathLike, report: ScoreReport) -> Dict[str, Path]:
    """members.csv, report.csv and report.json in output_dir."""
    output_dir = Path(output_dir)
    paths = {
        "members": output_dir / "members.csv",
        "report_csv": output_dir / "report.csv",
        "report_json": output_dir / "report.json",
    }
    write_members_csv(paths["members"], report)
    _write_csv(
        paths["report_csv"],
        REPORT_COLUMNS,
        [(a.band, a.avg_cpsnr_bicubic, a.avg_cpsnr_network, a.n_images, a.n_network_wins) for a in report.aggregates],
    )
    paths["report_json"].write_text(json.dumps(report.as_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return paths


def format_table(report: ScoreReport) -> str:
    lines = [f"{'band':<5} {'avg cPSNR bicubic':>18} {'avg cPSNR network':>18} {'network wins':>13}"]
    for a in report.aggregates:
        lines.append(
            f"{a.band:<5} {a.avg_cpsnr_bicubic:>18.4f} {a.avg_cpsnr_network:>18.4f} "
            f"{f'{a.n_network_wins}/{a.n_images}':>13}"
        )
    return "\n".join(lines)


# ---- side-by-side dumps ----

def _to_8bit(img: Image) -> np.ndarray:
    return np.rint(img.pixels * 255).astype(np.uint8)


def side_by_side(panels: Sequence[Image], gap: int = DUMP_GAP) -> bytes:
    """8-bit greyscale PNG of the panels left to right with white gaps."""
    height = max(p.height for p in panels)
    strips = []
    for i, p in enumerate(panels):
        if i:
            strips.append(np.full((height, gap), 255, dtype=np.uint8))
        plane = np.zeros((height, p.width), dtype=np.uint8)
        plane[: p.height] = _to_8bit(p)
        strips.append(plane)
    canvas = np.hstack(strips)
    buf = io.BytesIO()
    png.Writer(width=canvas.shape[1], height=height, greyscale=True, bitdepth=8).write(buf, canvas.tolist())
    return buf.getvalue()


def dump_member(path: PathLike, member: DataMember, sr: Image) -> None:
    """bicubic | SR | HR for one member."""
    lr = max_clearance_lrs(member)[0][0]
    bicubic = bicubic_upscale_x3(lr.image, size=member.lr_size)
    Path(path).write_bytes(side_by_side([bicubic, sr, member.hr]))


def dump_extremes(out_dir: PathLike, report: ScoreReport, ds: Dataset, srs: Dict[str, Image]) -> List[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    best, worst = report.best_and_worst()
    members = ds.by_id()
    written = []
    for tag, row in (("best", best), ("worst", worst)):
        path = out_dir / f"{tag}_{row.member_id.replace('/', '_')}.png"
        dump_member(path, members[row.member_id], srs[row.member_id])
        written.append(path)
        logger.info(f"{tag} member {row.member_id}: gain {row.gain:+.4f} dB -> {path.name}")
    return written
