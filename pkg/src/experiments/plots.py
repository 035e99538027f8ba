"""
Static SVG figures: detected-position scatter per projection plane and exposure traces
"""
from __future__ import annotations

import io
import logging
from collections import OrderedDict
from pathlib import Path
from typing import Dict, List, Sequence, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from src.evaluation.records import RunRecord, atomic_write_text, read_run_csv  # noqa: E402

logger = logging.getLogger(__name__)

PLANES = (("x", "y"), ("x", "z"), ("y", "z"))
AXIS_INDEX = {"x": 0, "y": 1, "z": 2}

# fixed ids and no timestamps so identical inputs give identical bytes
RC = {
    "svg.hashsalt": "aaec-bench",
    "svg.fonttype": "none",
    "path.simplify": False,
    "figure.figsize": (6.0, 4.5),
}


def _save_svg(fig, path: Path) -> Path:
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
    return atomic_write_text(path, buf.getvalue())


def _by_scenario(records: Sequence[RunRecord]) -> Dict[str, List[RunRecord]]:
    groups: Dict[str, List[RunRecord]] = OrderedDict()
    for rec in sorted(records, key=lambda r: (r.scenario, r.controller, r.seed)):
        groups.setdefault(rec.scenario, []).append(rec)
    return groups


def scatter_plots(records: Sequence[RunRecord], out_dir: Union[str, Path]) -> List[Path]:
    """One SVG per scenario and projection plane; each run is a point series with gid detections-<controller>-<seed>"""
    out_dir = Path(out_dir)
    written = []
    with plt.rc_context(RC):
        for scenario, runs in _by_scenario(records).items():
            for a, b in PLANES:
                fig, ax = plt.subplots()
                for rec in runs:
                    pts = rec.detections[rec.found]
                    ax.plot(pts[:, AXIS_INDEX[a]], pts[:, AXIS_INDEX[b]], linestyle="none",
                            marker=".", markersize=3, label=f"{rec.controller} (seed {rec.seed})",
                            gid=f"detections-{rec.controller}-{rec.seed}")
                ax.set_xlabel(f"{a} (m)")
                ax.set_ylabel(f"{b} (m)")
                ax.set_title(f"Detected marker positions, {scenario}")
                if runs:
                    ax.legend(loc="best", fontsize="small")
                written.append(_save_svg(fig, out_dir / f"scatter_{scenario}_{a}{b}.svg"))
    return written


def trace_plots(records: Sequence[RunRecord], out_dir: Union[str, Path]) -> List[Path]:
    """Exposure-vs-frame polyline per run, one SVG per scenario; gid trace-<controller>-<seed>"""
    out_dir = Path(out_dir)
    written = []
    with plt.rc_context(RC):
        for scenario, runs in _by_scenario(records).items():
            fig, ax = plt.subplots()
            for rec in runs:
                ax.plot(rec.frames["frame"].to_numpy(), rec.dt, linewidth=1.0,
                        label=f"{rec.controller} (seed {rec.seed})",
                        gid=f"trace-{rec.controller}-{rec.seed}")
            ax.set_yscale("log")
            ax.set_xlabel("frame")
            ax.set_ylabel("exposure time (ms)")
            ax.set_title(f"Exposure convergence, {scenario}")
            ax.legend(loc="best", fontsize="small")
            written.append(_save_svg(fig, out_dir / f"trace_{scenario}.svg"))
    return written


def plot_run_files(paths: Sequence[Union[str, Path]], out_dir: Union[str, Path]) -> List[Path]:
    """Read run CSVs and write every figure; raises RecordFormatError on malformed input"""
    records = [read_run_csv(p) for p in sorted(Path(p) for p in paths)]
    written = scatter_plots(records, out_dir) + trace_plots(records, out_dir)
    logger.info("Wrote %d figures to %s", len(written), out_dir)
    return written
