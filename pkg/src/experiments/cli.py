"""
Benchmark command line: run, compare, sweep, plot
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import pandas as pd
from pydantic import ValidationError

from config.experiment import ExperimentConfig, load_experiment_config
from config.settings import get_settings
from src.camera.scenarios import make_scenario, parse_scenario
from src.evaluation.records import (
    RunRecord,
    SUMMARY_COLUMNS,
    summaries_to_frame,
    write_run_csv,
    write_summary_csv,
    write_table_csv,
)
from src.evaluation.statistics import precision_order, summarize
from src.exceptions import ConfigError, RecordFormatError, RegionError, ScenarioError
from src.experiments.plots import plot_run_files
from src.experiments.runner import RunSpec, exposure_sweep, run_many

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3

COMPARE_COLUMNS = [c for c in SUMMARY_COLUMNS if c != "seed"]


def _overrides(args: argparse.Namespace) -> Dict[str, Dict[str, object]]:
    noise = None if getattr(args, "noise", None) is None else args.noise == "on"
    return {
        "experiment": {
            "scenarios": getattr(args, "scenario", None),
            "controllers": getattr(args, "controller", None),
            "seeds": getattr(args, "seed", None),
            "frames": getattr(args, "frames", None),
            "output_dir": getattr(args, "out", None),
            "noise": noise,
            "dump_frames": True if getattr(args, "dump_frames", False) else None,
            "jobs": getattr(args, "jobs", None),
        },
        "camera": {"fps": getattr(args, "fps", None)},
        "trajectory": {"kind": getattr(args, "trajectory", None)},
    }


def _run_name(scenario: str, controller: str, seed: int) -> str:
    return f"{scenario}_{controller}_seed{seed}"


def build_specs(config: ExperimentConfig) -> List[RunSpec]:
    """One RunSpec per scenario x controller x seed, in that nesting order"""
    cam = config.camera_model()
    params = config.controller_params()
    marker = config.marker_spec()
    pose = config.marker_pose()
    out = Path(config.experiment.output_dir)
    specs = []
    for scenario in config.experiment.scenarios:
        for controller in config.experiment.controllers:
            for seed in config.experiment.seeds:
                dump = None
                if config.experiment.dump_frames:
                    dump = str(out / "frames" / _run_name(scenario, controller, seed))
                specs.append(RunSpec(
                    scenario=scenario, controller=controller, seed=seed,
                    frames=config.experiment.frames, cam=cam, params=params,
                    trajectory=config.trajectory_for(seed), marker=marker, marker_pose=pose,
                    dump_dir=dump,
                ))
    return specs


def _run_and_record(config: ExperimentConfig) -> pd.DataFrame:
    out = Path(config.experiment.output_dir)
    records: List[RunRecord] = run_many(build_specs(config), jobs=config.experiment.jobs)
    rows = []
    for rec in records:
        write_run_csv(rec, out / "runs" / f"{_run_name(rec.scenario, rec.controller, rec.seed)}.csv")
        rows.append(summarize(rec).as_row())
    table = summaries_to_frame(rows)
    write_summary_csv(table, out / "summary.csv", frames=config.experiment.frames,
                      trajectory=config.trajectory.kind)
    return table


def cmd_run(config: ExperimentConfig) -> int:
    """Simulate every configured run; per-run CSVs plus summary.csv"""
    table = _run_and_record(config)
    logger.info("Finished %d runs into %s", len(table), config.experiment.output_dir)
    return EXIT_OK


def compare_table(summary: pd.DataFrame) -> pd.DataFrame:
    """
    Seed-averaged summary rows per (scenario, controller), first-seen order.

    cov_det stays NaN when any seed had too few detections to measure it.
    """
    grouped = summary.groupby(["scenario", "controller"], sort=False)
    table = grouped[COMPARE_COLUMNS[2:]].mean(numeric_only=True).reset_index()
    table["cov_det"] = grouped["cov_det"].agg(lambda s: s.mean(skipna=False)).to_numpy()
    table.insert(2, "seeds", grouped.size().to_numpy())
    return table


def cmd_compare(config: ExperimentConfig) -> int:
    """Run every controller and print the seed-averaged comparison"""
    if len(config.experiment.controllers) < 2:
        raise ConfigError("compare needs at least two controllers")
    table = compare_table(_run_and_record(config))
    write_table_csv(table, Path(config.experiment.output_dir) / "comparison.csv",
                    "aaec-bench compare", seeds=len(config.experiment.seeds))
    for scenario, rows in table.groupby("scenario", sort=False):
        ranking = precision_order(dict(zip(rows["controller"], rows["cov_det"])))
        logger.info("%s: most precise %s", scenario, " > ".join(ranking))
    print(table.to_string(index=False, float_format=lambda x: f"{x:.4g}", na_rep="-"))
    return EXIT_OK


def cmd_sweep(config: ExperimentConfig, region: str, n_points: int) -> int:
    """Brute-force metric over log-spaced exposures for each configured scenario"""
    if n_points < 8:
        raise ConfigError(f"sweep needs at least 8 points, got {n_points}")
    cam = config.camera_model().noiseless
    out = Path(config.experiment.output_dir)
    for label in config.experiment.scenarios:
        scene = make_scenario(parse_scenario(label), cam, marker=config.marker_spec(),
                              marker_pose=config.marker_pose())
        table = exposure_sweep(scene, cam, region=region, n_points=n_points,
                               p=config.metric.p, k=config.metric.k)
        path = write_table_csv(table, out / f"sweep_{label}_{region}.csv", "aaec-bench sweep",
                               scenario=label, region=region, points=n_points)
        best = table.loc[table["is_argmax"] == 1].iloc[0]
        logger.info("%s %s: optimum %.4g ms (m=%.4g) -> %s", label, region, best["dt_ms"],
                    best["m"], path)
    return EXIT_OK


def cmd_plot(paths: Sequence[str], out_dir: str) -> int:
    """SVG figures from run CSVs (files or directories of them)"""
    files: List[Path] = []
    for p in map(Path, paths):
        files.extend(sorted(p.glob("*.csv")) if p.is_dir() else [p])
    if not files:
        raise ConfigError("plot needs at least one run CSV")
    plot_run_files(files, out_dir)
    return EXIT_OK


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI experiment file")
    p.add_argument("--scenario", help="comma-separated: normal, lowlight, adversarial")
    p.add_argument("--out", help="output directory")
    p.add_argument("--fps", type=float, help="simulated frame rate")
    p.add_argument("--noise", choices=["on", "off"], help="sensor noise")


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    _add_common(p)
    p.add_argument("--controller", help="comma-separated: aaec, aec, gec, default")
    p.add_argument("--frames", type=int, help="frames per run")
    p.add_argument("--seed", help="comma-separated seeds")
    p.add_argument("--trajectory", help="static, lateral or jitter")
    p.add_argument("--dump-frames", action="store_true", help="write every frame as PGM")
    p.add_argument("--jobs", type=int, help="parallel worker processes")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aaec-bench",
                                     description="Active exposure control benchmark")
    parser.add_argument("--log-level", default=None, help="overrides AAEC_LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True)

    _add_run_flags(sub.add_parser("run", help="simulate runs and write CSVs"))
    _add_run_flags(sub.add_parser("compare", help="run and print a seed-averaged comparison"))

    sweep = sub.add_parser("sweep", help="metric over log-spaced exposures")
    _add_common(sweep)
    sweep.add_argument("--region", choices=["full", "roi"], default="full")
    sweep.add_argument("--points", type=int, default=64)

    plot = sub.add_parser("plot", help="SVG figures from run CSVs")
    plot.add_argument("runs", nargs="+", help="run CSV files or directories")
    plot.add_argument("--out", default=None, help="figure directory")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point; returns the process exit code"""
    parser = build_parser()
    args = parser.parse_args(argv)
    settings = get_settings()
    logging.basicConfig(level=(args.log_level or settings.log_level).upper(),
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        if args.command == "plot":
            return cmd_plot(args.runs, args.out or str(Path(settings.output_dir) / "figures"))
        config = load_experiment_config(args.config, _overrides(args))
        if args.command == "run":
            return cmd_run(config)
        if args.command == "compare":
            return cmd_compare(config)
        return cmd_sweep(config, args.region, args.points)
    except (ConfigError, ValidationError, ScenarioError, RecordFormatError, RegionError) as e:
        logger.error("%s", e)
        return EXIT_CONFIG
    except OSError as e:
        logger.error("I/O error: %s", e)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
