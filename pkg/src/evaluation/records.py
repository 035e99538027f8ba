"""
Per-run records and their CSV serialization
"""
from __future__ import annotations

import logging
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from config.settings import get_settings
from src.exceptions import RecordFormatError
from src.exposure.controllers import StepLog

logger = logging.getLogger(__name__)

RUN_TAG = "aaec-bench run"
SUMMARY_TAG = "aaec-bench summary"

RUN_COLUMNS = [
    "frame", "time_s", "dt_ms", "m", "d_hat", "v", "found",
    "roi_x0", "roi_y0", "roi_w", "roi_h", "mode", "saturated_frac",
    "det_x", "det_y", "det_z", "gt_x", "gt_y", "gt_z", "reproj_error",
]
SUMMARY_COLUMNS = [
    "scenario", "controller", "seed", "cov_det", "detection_rate", "traj_dist_m",
    "max_pairwise_dist_m", "conv_frames", "conv_seconds",
]
FLOAT_FORMAT = "%.10g"


@dataclass
class RunRecord:
    """Frame-aligned controller log, detections and ground truth of one run"""
    scenario: str
    controller: str
    trajectory: str
    seed: int
    fps: float
    frames: pd.DataFrame = field(repr=False)

    def __post_init__(self):
        missing = [c for c in RUN_COLUMNS if c not in self.frames.columns]
        if missing:
            raise RecordFormatError(f"Run table is missing columns: {', '.join(missing)}")
        self.frames = self.frames[RUN_COLUMNS].reset_index(drop=True)

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def dt(self) -> np.ndarray:
        return self.frames["dt_ms"].to_numpy(dtype=np.float64)

    @property
    def found(self) -> np.ndarray:
        return self.frames["found"].to_numpy().astype(bool)

    @property
    def detections(self) -> np.ndarray:
        """(n, 3) detected translations, NaN rows where nothing was found"""
        return self.frames[["det_x", "det_y", "det_z"]].to_numpy(dtype=np.float64)

    @property
    def ground_truth(self) -> np.ndarray:
        return self.frames[["gt_x", "gt_y", "gt_z"]].to_numpy(dtype=np.float64)

    def metadata(self) -> Dict[str, str]:
        return {
            "scenario": self.scenario,
            "controller": self.controller,
            "seed": str(self.seed),
            "fps": f"{self.fps:g}",
            "trajectory": self.trajectory,
        }

    @classmethod
    def from_steps(cls, steps: Sequence[StepLog], detections: Sequence[Optional[np.ndarray]],
                   ground_truth: Sequence[np.ndarray], reproj_errors: Sequence[float],
                   **meta) -> "RunRecord":
        """Assemble a record from the runner's per-frame lists"""
        n = len(steps)
        if not (len(detections) == len(ground_truth) == len(reproj_errors) == n):
            raise RecordFormatError("Per-frame arrays of a run must have equal length")
        rows = []
        for step, det, gt, err in zip(steps, detections, ground_truth, reproj_errors):
            det = np.full(3, np.nan) if det is None else np.asarray(det, dtype=np.float64)
            x0, y0, w, h = step.roi
            rows.append({
                "frame": step.frame, "time_s": step.time_s, "dt_ms": step.dt, "m": step.m,
                "d_hat": step.d_hat, "v": step.v, "found": int(step.found),
                "roi_x0": x0, "roi_y0": y0, "roi_w": w, "roi_h": h, "mode": step.mode,
                "saturated_frac": step.saturated_frac,
                "det_x": det[0], "det_y": det[1], "det_z": det[2],
                "gt_x": gt[0], "gt_y": gt[1], "gt_z": gt[2], "reproj_error": err,
            })
        return cls(frames=pd.DataFrame(rows, columns=RUN_COLUMNS), **meta)


def atomic_write_text(path: Union[str, Path], text: str) -> Path:
    """Write through a temporary file in the target directory, then rename over the target"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _tag_line(tag: str, meta: Dict[str, str]) -> str:
    version = get_settings().csv_version
    fields = " ".join(f"{k}={v}" for k, v in meta.items())
    return f"# {tag} {version} {fields}".rstrip() + "\n"


def _parse_tag(line: str, tag: str) -> Dict[str, str]:
    prefix = f"# {tag} "
    if not line.startswith(prefix):
        raise RecordFormatError(f"Missing '{tag}' header tag")
    parts = line[len(prefix):].split()
    if not parts:
        raise RecordFormatError("Header tag has no version")
    meta = {"version": parts[0]}
    for item in parts[1:]:
        key, sep, value = item.partition("=")
        if not sep:
            raise RecordFormatError(f"Malformed header field '{item}'")
        meta[key] = value
    return meta


def run_to_csv(rec: RunRecord) -> str:
    body = rec.frames.to_csv(index=False, float_format=FLOAT_FORMAT, na_rep="nan",
                             lineterminator="\n")
    return _tag_line(RUN_TAG, rec.metadata()) + body


def write_run_csv(rec: RunRecord, path: Union[str, Path]) -> Path:
    path = atomic_write_text(path, run_to_csv(rec))
    logger.debug("Wrote %d frames to %s", len(rec), path)
    return path


def read_run_csv(path: Union[str, Path]) -> RunRecord:
    """
    Parse a run CSV written by `write_run_csv`.

    Raises:
        RecordFormatError: missing tag, metadata or columns
    """
    path = Path(path)
    with path.open("r", encoding="utf-8") as handle:
        first = handle.readline()
    meta = _parse_tag(first.rstrip("\n"), RUN_TAG)
    try:
        frames = pd.read_csv(path, comment="#")
        return RunRecord(
            scenario=meta["scenario"],
            controller=meta["controller"],
            trajectory=meta["trajectory"],
            seed=int(meta["seed"]),
            fps=float(meta["fps"]),
            frames=frames,
        )
    except KeyError as e:
        raise RecordFormatError(f"{path}: header tag lacks {e}") from None
    except (ValueError, pd.errors.ParserError) as e:
        if isinstance(e, RecordFormatError):
            raise
        raise RecordFormatError(f"{path}: {e}") from None


def summaries_to_frame(rows: List[dict]) -> pd.DataFrame:
    table = pd.DataFrame(rows, columns=SUMMARY_COLUMNS)
    numeric = SUMMARY_COLUMNS[3:]
    table[numeric] = table[numeric].apply(pd.to_numeric, errors="coerce").astype(np.float64)
    return table


def write_table_csv(table: pd.DataFrame, path: Union[str, Path], tag: str, **meta) -> Path:
    """Tagged CSV of any table, written atomically"""
    text = _tag_line(tag, {k: str(v) for k, v in meta.items()})
    text += table.to_csv(index=False, float_format=FLOAT_FORMAT, na_rep="nan", lineterminator="\n")
    return atomic_write_text(path, text)


def write_summary_csv(table: pd.DataFrame, path: Union[str, Path], **meta) -> Path:
    return write_table_csv(table[SUMMARY_COLUMNS], path, SUMMARY_TAG, **meta)


def read_summary_csv(path: Union[str, Path]) -> pd.DataFrame:
    path = Path(path)
    with path.open("r", encoding="utf-8") as handle:
        _parse_tag(handle.readline().rstrip("\n"), SUMMARY_TAG)
    table = pd.read_csv(path, comment="#")
    missing = [c for c in SUMMARY_COLUMNS if c not in table.columns]
    if missing:
        raise RecordFormatError(f"{path}: summary is missing columns {', '.join(missing)}")
    return table
