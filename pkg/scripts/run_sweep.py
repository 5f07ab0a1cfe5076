#!/usr/bin/env python3
"""
Stability sweep runner for the PSWF reconstruction toolkit.

This script runs a stability sweep from a JSON config, writes sweep.csv and
report.json, records the run in the run database and prints a summary.

Usage:
    python scripts/run_sweep.py --config CONFIG [OPTIONS]

Examples:
    # 2D disk sweep, recorded
    python scripts/run_sweep.py --config configs/disk_sweep.json --out runs/disk

    # Compare with an earlier recorded run
    python scripts/run_sweep.py --config configs/disk_sweep.json --compare-with 3
"""

import sys
import argparse
import logging
from pathlib import Path

# Add parent directory to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent))

from pswf_recon.cli import ExperimentConfig, run_sweep_config, write_sweep_outputs
from pswf_recon.config import DEFAULT_THREADS, OUTPUT_DIR
from pswf_recon.db import compare_sweep_runs, get_sweep_run_summary, init_db, record_sweep

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
)
logger = logging.getLogger(__name__)


def print_summary(summary: dict) -> None:
    """
    Print a recorded sweep in a readable format.

    Args:
        summary: Output of get_sweep_run_summary.
    """
    print("\n" + "=" * 70)
    print("SWEEP SUMMARY")
    print("=" * 70)

    if "error" in summary:
        print(f"ERROR: {summary['error']}")
        return

    print(f"Sweep Run ID: {summary['id']}")
    print(f"Phantom: {summary['phantom']}")
    print(f"c = {summary['c']:g}, alpha = {summary['alpha']:g}")

    print("\n" + "-" * 70)
    print(f"{'delta':>12} {'n*':>5} {'n used':>7} {'mean error':>14} {'bound':>14}")
    print("-" * 70)
    for entry in summary["entries"]:
        bound = entry["lemma13_bound"]
        bound_text = f"{bound:14.6e}" if bound is not None else f"{'N/A':>14}"
        flag = "  (clamped)" if entry["clamped"] else ""
        print(f"{entry['delta']:12.3e} {entry['n_star']:5d} {entry['n_used']:7d} "
              f"{entry['mean_error']:14.6e} {bound_text}{flag}")

    print("\n" + "-" * 70)
    print("FIT: error ~ C1 delta^beta + C2 (log 1/delta)^(-mu)")
    print("-" * 70)
    if summary["c1"] is not None:
        print(f"C1 = {summary['c1']:.6g}, C2 = {summary['c2']:.6g}")
        print(f"Relative residual: {summary['relative_residual']:.2%}")
    else:
        print("Not fitted (fewer than two noise levels)")

    print("\n" + "=" * 70)


def print_comparison(comparison: dict) -> None:
    """Print the change between two recorded sweeps."""
    if "error" in comparison:
        print(f"ERROR: {comparison['error']}")
        return
    deltas = comparison["deltas"]
    print(f"\nComparison run {comparison['run_1']['id']} -> run {comparison['run_2']['id']}")
    if deltas["relative_residual"] is not None:
        print(f"  Fit residual change: {deltas['relative_residual']:+.3%}")
    for delta, change in deltas["mean_error"].items():
        print(f"  delta={delta:.3e}: mean error change {change:+.6e}")


def main():
    """Main function to run a sweep."""
    parser = argparse.ArgumentParser(
        description="Run a stability sweep and record it",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Config keys:
  phantom, c, r, sigma, alpha, deltas[], seeds[], beta, mu
  optional: noise_scale_N, angles, grid_size, offsets, lambda_floor
        """,
    )
    parser.add_argument(
        "--config",
        type=str,
        required=True,
        help="Sweep config JSON",
    )
    parser.add_argument(
        "--out",
        "-o",
        type=str,
        default=str(OUTPUT_DIR / "sweep"),
        help=f"Output directory (default: {OUTPUT_DIR / 'sweep'})",
    )
    parser.add_argument(
        "--threads",
        type=int,
        default=DEFAULT_THREADS,
        help=f"Worker threads (default: {DEFAULT_THREADS})",
    )
    parser.add_argument(
        "--notes",
        type=str,
        default=None,
        help="Notes about this sweep run",
    )
    parser.add_argument(
        "--compare-with",
        type=int,
        default=None,
        help="ID of an earlier recorded run to compare against",
    )

    args = parser.parse_args()

    try:
        config = ExperimentConfig.from_json(args.config)
    except (OSError, ValueError) as e:
        logger.error(f"Invalid config: {e}")
        sys.exit(1)

    logger.info("=" * 70)
    logger.info("PSWF Reconstruction - Sweep Runner")
    logger.info("=" * 70)
    logger.info(f"Phantom: {config.phantom}")
    logger.info(f"c = {config.c}, r = {config.r}, sigma = {config.sigma}, alpha = {config.alpha}")
    logger.info(f"Deltas: {config.deltas}")
    logger.info(f"Seeds: {config.seeds}")
    logger.info("=" * 70)

    try:
        result = run_sweep_config(config, args.threads)
        write_sweep_outputs(config, result, Path(args.out))

        init_db()
        run_id = record_sweep(result, config.phantom, notes=args.notes)
        print_summary(get_sweep_run_summary(run_id))

        if args.compare_with is not None:
            print_comparison(compare_sweep_runs(args.compare_with, run_id))

        print("\nNext steps:")
        print(f"  1. Inspect {Path(args.out) / 'sweep.csv'}")
        print(f"  2. Compare later runs with --compare-with {run_id}")

    except Exception as e:
        logger.error(f"Sweep failed: {e}", exc_info=True)
        sys.exit(1)


if __name__ == "__main__":
    main()
