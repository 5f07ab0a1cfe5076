"""
Command-line interface for the PSWF reconstruction toolkit.

Subcommands:
    pswf table        Spectral table chi, lambda, mu of a PSWF basis
    recon1d           Regularized 1D reconstruction of a named phantom
    recon2d           Regularized 2D reconstruction via the Radon reduction
    phantom sinogram  Sampled Radon transform of a disk phantom
    sweep             Stability sweep over noise levels from a JSON config

Exit codes: 0 success, 1 validation or usage error, 2 numerical failure or
clamped truncation index. Errors are also reported as one JSON line on stderr.

Usage:
    python run.py pswf table --c 10 --n 15 --out table.csv
    python run.py recon1d --c 20 --alpha 0.5 --delta 1e-3 --phantom hat --noise-seed 7 --out runs/hat
    python run.py sweep --config sweep.json --out runs/sweep --record
"""

import argparse
import json
import logging
import math
import sys
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from . import bandlimit1d, pswf_core, recon
from .config import (
    DEFAULT_ANGLES,
    DEFAULT_BETA,
    DEFAULT_GRID_SIZE,
    DEFAULT_MU,
    DEFAULT_OFFSETS,
    DEFAULT_THREADS,
    LAMBDA_FLOOR,
    LOG_LEVEL,
    MIN_ANGLES,
    OUTPUT_DIR,
)
from .io import write_csv, write_grid, write_json
from .phantoms import PHANTOM_NAMES, Disk, describe, evaluate, named_phantom, smoothness_index
from .pswf_core import NumericalFailure
from .radon2d import sinogram_from_phantom

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2

# Tolerance for c = r * sigma consistency in configs
C_CONSISTENCY_RTOL = 1e-9


class UsageError(ValueError):
    """Bad command-line usage."""


class ClampedTruncation(Exception):
    """n* exceeded the certified range; outputs were written with n_max."""


class CliArgumentParser(argparse.ArgumentParser):
    """ArgumentParser that raises instead of exiting with status 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


# ============================================================================
# Experiment Configuration
# ============================================================================

@dataclass
class ExperimentConfig:
    """
    Validated sweep configuration.

    JSON schema: {phantom, c, r, sigma, alpha, deltas[], seeds[], beta, mu}
    plus optional noise_scale_N, angles, grid_size, offsets, lambda_floor.
    """
    phantom: str
    c: float
    r: float
    sigma: float
    alpha: float
    deltas: List[float]
    seeds: List[int]
    beta: float = DEFAULT_BETA
    mu: float = DEFAULT_MU
    noise_scale_N: Optional[float] = None
    angles: int = DEFAULT_ANGLES
    grid_size: int = DEFAULT_GRID_SIZE
    offsets: int = DEFAULT_OFFSETS
    lambda_floor: float = LAMBDA_FLOOR

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        """
        Raises:
            ValueError: Naming the violated range.
        """
        if self.phantom not in PHANTOM_NAMES:
            raise ValueError(f"phantom must be one of {', '.join(PHANTOM_NAMES)}, got '{self.phantom}'")
        for name in ("c", "r", "sigma"):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0.0:
                raise ValueError(f"{name} must be finite and > 0, got {value}")
        if abs(self.c - self.r * self.sigma) > C_CONSISTENCY_RTOL * self.c:
            raise ValueError(f"c must equal r * sigma, got c={self.c}, r*sigma={self.r * self.sigma}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not self.deltas:
            raise ValueError("deltas must be a non-empty list")
        for delta in self.deltas:
            if not 0.0 < delta < 1.0:
                raise ValueError(f"every delta must lie in (0, 1), got {delta}")
        if any(later >= earlier for earlier, later in zip(self.deltas, self.deltas[1:])):
            raise ValueError("deltas must be strictly decreasing")
        if not self.seeds:
            raise ValueError("seeds must be a non-empty list")
        if not 0.0 < self.beta < 1.0 - self.alpha:
            raise ValueError(f"beta must lie in (0, 1 - alpha) = (0, {1.0 - self.alpha:g}), got {self.beta}")
        phantom = named_phantom(self.phantom, self.sigma)
        mu_limit = smoothness_index(phantom) + (phantom.dim - 1) / 2.0
        if not 0.0 < self.mu < mu_limit:
            raise ValueError(f"mu must lie in (0, nu + (d-1)/2) = (0, {mu_limit:g}), got {self.mu}")
        if self.noise_scale_N is not None and self.noise_scale_N < 0.0:
            raise ValueError(f"noise_scale_N must be >= 0, got {self.noise_scale_N}")
        if self.angles < MIN_ANGLES:
            raise ValueError(f"angles must be >= {MIN_ANGLES}, got {self.angles}")
        if not 0.0 < self.lambda_floor < 1.0:
            raise ValueError(f"lambda_floor must lie in (0, 1), got {self.lambda_floor}")

    @classmethod
    def from_dict(cls, payload: Dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(payload) - known
        if unknown:
            raise ValueError(f"Unknown config keys: {', '.join(sorted(unknown))}")
        missing = {"phantom", "c", "r", "sigma", "alpha", "deltas", "seeds"} - set(payload)
        if missing:
            raise ValueError(f"Missing config keys: {', '.join(sorted(missing))}")
        values = dict(payload)
        values["deltas"] = [float(delta) for delta in values["deltas"]]
        values["seeds"] = [int(seed) for seed in values["seeds"]]
        for name in ("c", "r", "sigma", "alpha", "beta", "mu", "lambda_floor"):
            if name in values:
                values[name] = float(values[name])
        return cls(**values)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            payload = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ValueError(f"Config {path} is not valid JSON: {e}")
        if not isinstance(payload, dict):
            raise ValueError(f"Config {path} must hold a JSON object")
        return cls.from_dict(payload)

    def to_dict(self) -> Dict:
        return asdict(self)


# ============================================================================
# Subcommands
# ============================================================================

def _check_unit(name: str, value: float) -> None:
    if not 0.0 < value < 1.0:
        raise ValueError(f"{name} must lie in (0, 1), got {value}")


def cmd_pswf_table(args) -> int:
    basis = pswf_core.build_basis(args.c, args.n, args.lambda_floor)
    table = pswf_core.spectral_table(basis)
    if args.out:
        write_csv(table, args.out)
        logger.info(f"Wrote {len(table)} rows to {args.out}")
    else:
        sys.stdout.write(table.to_csv(index=False, lineterminator="\n"))
    return EXIT_OK


def cmd_recon1d(args) -> int:
    _check_unit("alpha", args.alpha)
    _check_unit("delta", args.delta)
    phantom = named_phantom(args.phantom, args.sigma)
    if phantom.dim != 1:
        raise ValueError(f"recon1d needs a 1D phantom, got '{args.phantom}'")
    r = args.c / args.sigma

    params = bandlimit1d.n_star(args.c, args.alpha, args.delta)
    basis = pswf_core.build_basis(args.c, params.n_star, args.lambda_floor)
    exact = recon.sample_fourier_data(phantom, r, args.sigma, basis)
    N = recon.norm_r(exact) if args.noise_scale is None else args.noise_scale
    params = bandlimit1d.n_star(args.c, args.alpha, args.delta, N)
    noisy = recon.make_noisy(exact, args.delta, N, args.noise_seed)

    result = recon.reconstruct_regularized(noisy, basis, params)
    metric = recon.error_metric(phantom, result)
    f_nodes = evaluate(phantom, args.sigma * basis.nodes)
    proj_err = math.sqrt(args.sigma) * bandlimit1d.projection_error(basis, f_nodes, result.n_used)
    bound = recon.projection_error_bound(phantom, basis, exact, result.n_used, args.delta * N)

    scaled = (2 * math.pi / args.sigma) * noisy.samples
    coeffs = bandlimit1d.inverse_coefficients(basis, scaled, result.n_used)
    y = np.linspace(-1.0, 1.0, args.points)
    on_grid = recon.reconstruct_regularized(noisy, basis, params, y=y)
    exact_grid = evaluate(phantom, args.sigma * y).astype(complex)

    out = Path(args.out)
    write_csv(pd.DataFrame({
        "n": np.arange(coeffs.n + 1),
        "re": coeffs.values.real,
        "im": coeffs.values.imag,
    }), out / "coeffs.csv")
    write_csv(pd.DataFrame({
        "y": on_grid.q,
        "re": on_grid.values.real,
        "im": on_grid.values.imag,
        "exact_re": exact_grid.real,
        "exact_im": exact_grid.imag,
    }), out / "recon.csv")
    write_json({
        "config": _echo(args),
        "phantom": describe(phantom),
        "r": r,
        "noise_scale_N": N,
        "n_star": params.n_star,
        "n_used": result.n_used,
        "n_max": basis.n_max,
        "clamped": result.clamped,
        "rho": params.rho,
        "tau": params.tau,
        "l2_error": metric.value,
        "relative_l2_error": metric.relative,
        "projection_error": proj_err,
        "lemma13_bound": bound,
    }, out / "report.json")
    logger.info(f"recon1d: n*={params.n_star}, l2_error={metric.value:.6g}, bound={bound:.6g}")

    if result.clamped:
        raise ClampedTruncation(f"n*={params.n_star} clamped to n_max={basis.n_max}")
    return EXIT_OK


def cmd_recon2d(args) -> int:
    _check_unit("alpha", args.alpha)
    _check_unit("delta", args.delta)
    if abs(args.c - args.r * args.sigma) > C_CONSISTENCY_RTOL * args.c:
        raise ValueError(f"c must equal r * sigma, got c={args.c}, r*sigma={args.r * args.sigma}")
    phantom = named_phantom(args.phantom, args.sigma)
    if phantom.dim != 2:
        raise ValueError(f"recon2d needs a 2D phantom, got '{args.phantom}'")

    params = bandlimit1d.n_star(args.c, args.alpha, args.delta)
    basis = pswf_core.build_basis(args.c, params.n_star, args.lambda_floor)
    exact = recon.sample_fourier_data(phantom, args.r, args.sigma, basis, args.angles)
    N = recon.norm_r(exact) if args.noise_scale is None else args.noise_scale
    params = bandlimit1d.n_star(args.c, args.alpha, args.delta, N)
    noisy = recon.make_noisy(exact, args.delta, N, args.seed)

    result = recon.reconstruct_regularized(
        noisy, basis, params,
        grid_size=args.grid_size, n_offsets=args.offsets, s_max=args.s_max, threads=args.threads,
    )
    metric = recon.error_metric(phantom, result)

    out = Path(args.out)
    write_csv(result.sinogram.to_frame(), out / "sinogram.csv")
    write_grid(result.grid, out / "recon_grid.bin")
    write_json({
        "config": _echo(args),
        "phantom": describe(phantom),
        "noise_scale_N": N,
        "n_star": params.n_star,
        "n_used": result.n_used,
        "n_max": basis.n_max,
        "clamped": result.clamped,
        "rho": params.rho,
        "tau": params.tau,
        "h_minus_half_error": metric.value,
        "relative_error": metric.relative,
        "restricted_error": metric.restricted,
        "restricted_relative_error": metric.restricted_relative,
        "grid_size": result.grid.resolution,
        "grid_extent": result.grid.extent,
    }, out / "report.json")
    logger.info(f"recon2d: n*={params.n_star}, H^-1/2 error={metric.value:.6g}")

    if result.clamped:
        raise ClampedTruncation(f"n*={params.n_star} clamped to n_max={basis.n_max}")
    return EXIT_OK


def cmd_phantom_sinogram(args) -> int:
    if args.kind != "disk":
        raise ValueError(f"Only disk sinograms are supported, got '{args.kind}'")
    phantom = Disk(radius=args.radius, center=tuple(args.center), amplitude=args.amplitude)
    sinogram = sinogram_from_phantom(phantom, args.samples, args.angles)
    write_csv(sinogram.to_frame(), args.out)
    logger.info(f"Wrote {sinogram.n_offsets}x{sinogram.n_angles} sinogram to {args.out}")
    return EXIT_OK


SWEEP_COLUMNS = ["delta", "n_star", "mean_error", "lemma13_bound", "fit_residual"]


def run_sweep_config(config: ExperimentConfig, threads: Optional[int] = None) -> recon.SweepResult:
    """Run the stability sweep described by a validated config."""
    phantom = named_phantom(config.phantom, config.sigma)
    return recon.stability_sweep(
        phantom,
        config.c,
        config.alpha,
        config.deltas,
        config.seeds,
        sigma=config.sigma,
        beta=config.beta,
        mu=config.mu,
        noise_scale_N=config.noise_scale_N,
        n_angles=config.angles,
        grid_size=config.grid_size,
        n_offsets=config.offsets,
        lambda_floor=config.lambda_floor,
        threads=threads,
    )


def write_sweep_outputs(config: ExperimentConfig, result: recon.SweepResult, out: Path) -> None:
    write_csv(result.table[SWEEP_COLUMNS], out / "sweep.csv")
    write_json({
        "config": config.to_dict(),
        "resolved": result.config,
        "coefficients": {"C1": result.coefficients[0], "C2": result.coefficients[1]},
        "relative_residual": result.relative_residual,
        "rows": result.table.to_dict(orient="records"),
    }, out / "report.json")


def cmd_sweep(args) -> int:
    config = ExperimentConfig.from_json(args.config)
    result = run_sweep_config(config, args.threads)
    out = Path(args.out)
    write_sweep_outputs(config, result, out)

    if args.record:
        from .db import init_db, record_sweep

        init_db()
        run_id = record_sweep(result, config.phantom, notes=args.notes)
        logger.info(f"Recorded sweep as run {run_id}")

    if result.table["clamped"].any():
        raise ClampedTruncation("n* clamped to n_max for at least one delta")
    return EXIT_OK


def _echo(args) -> Dict:
    """Resolved arguments for report.json, without runtime-only flags."""
    skip = {"handler", "threads", "log_level"}
    return {key: value for key, value in sorted(vars(args).items()) if key not in skip}


# ============================================================================
# Parser
# ============================================================================

def build_parser() -> CliArgumentParser:
    parser = CliArgumentParser(
        prog="pswf-recon",
        description="Reconstruction from Fourier data on a ball with prolate spheroidal wave functions",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Spectral table for c = 10
  python run.py pswf table --c 10 --n 15 --out table.csv

  # 1D hat reconstruction with relative noise 1e-3
  python run.py recon1d --c 20 --alpha 0.5 --delta 1e-3 --phantom hat --noise-seed 1 --out runs/hat

  # 2D disk reconstruction
  python run.py recon2d --c 15 --r 15 --sigma 1 --alpha 0.3 --delta 1e-2 --angles 90 --seed 1 --out runs/disk

  # Stability sweep, recorded in the run database
  python run.py sweep --config sweep.json --out runs/sweep --record
        """,
    )
    parser.add_argument(
        "--threads",
        type=int,
        default=DEFAULT_THREADS,
        help=f"Worker threads for angle loops and sweep jobs (default: {DEFAULT_THREADS})",
    )
    parser.add_argument(
        "--log-level",
        type=str,
        default=LOG_LEVEL,
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help=f"Logging level (default: {LOG_LEVEL})",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    # pswf table
    pswf = commands.add_parser("pswf", help="PSWF basis utilities")
    pswf_commands = pswf.add_subparsers(dest="pswf_command", required=True)
    table = pswf_commands.add_parser("table", help="Spectral table of a PSWF basis")
    table.add_argument("--c", type=float, required=True, help="Bandwidth c > 0")
    table.add_argument("--n", type=int, required=True, help="Highest mode index")
    table.add_argument("--out", type=str, default=None, help="CSV path (default: stdout)")
    table.add_argument("--lambda-floor", type=float, default=LAMBDA_FLOOR,
                       help=f"Certification floor for lambda (default: {LAMBDA_FLOOR:g})")
    table.set_defaults(handler=cmd_pswf_table)

    # recon1d
    recon1d = commands.add_parser("recon1d", help="Regularized 1D reconstruction")
    recon1d.add_argument("--c", type=float, required=True, help="Bandwidth c = r * sigma")
    recon1d.add_argument("--sigma", type=float, default=1.0, help="Support radius (default: 1)")
    recon1d.add_argument("--alpha", type=float, required=True, help="Exponent alpha in (0, 1)")
    recon1d.add_argument("--delta", type=float, required=True, help="Noise level delta in (0, 1)")
    recon1d.add_argument("--phantom", type=str, default="hat", choices=["hat", "indicator"])
    recon1d.add_argument("--noise-seed", type=int, default=0, help="Noise seed (default: 0)")
    recon1d.add_argument("--noise-scale", type=float, default=None,
                         help="Bound N on the data norm (default: norm of the exact data; 0 = exact data)")
    recon1d.add_argument("--points", type=int, default=401, help="Output grid points (default: 401)")
    recon1d.add_argument("--lambda-floor", type=float, default=LAMBDA_FLOOR)
    recon1d.add_argument("--out", type=str, default=str(OUTPUT_DIR / "recon1d"))
    recon1d.set_defaults(handler=cmd_recon1d)

    # recon2d
    recon2d = commands.add_parser("recon2d", help="Regularized 2D reconstruction")
    recon2d.add_argument("--c", type=float, required=True, help="Bandwidth c = r * sigma")
    recon2d.add_argument("--r", type=float, required=True, help="Ball radius r")
    recon2d.add_argument("--sigma", type=float, required=True, help="Support radius sigma")
    recon2d.add_argument("--alpha", type=float, required=True, help="Exponent alpha in (0, 1)")
    recon2d.add_argument("--delta", type=float, required=True, help="Noise level delta in (0, 1)")
    recon2d.add_argument("--angles", type=int, default=DEFAULT_ANGLES, help=f"Angles in [0, pi) (default: {DEFAULT_ANGLES})")
    recon2d.add_argument("--seed", type=int, default=0, help="Noise seed (default: 0)")
    recon2d.add_argument("--phantom", type=str, default="disk", choices=["disk", "two_disks"])
    recon2d.add_argument("--noise-scale", type=float, default=None)
    recon2d.add_argument("--grid-size", type=int, default=DEFAULT_GRID_SIZE)
    recon2d.add_argument("--offsets", type=int, default=DEFAULT_OFFSETS)
    recon2d.add_argument("--s-max", type=float, default=None)
    recon2d.add_argument("--lambda-floor", type=float, default=LAMBDA_FLOOR)
    recon2d.add_argument("--out", type=str, default=str(OUTPUT_DIR / "recon2d"))
    recon2d.set_defaults(handler=cmd_recon2d)

    # phantom sinogram
    phantom = commands.add_parser("phantom", help="Phantom utilities")
    phantom_commands = phantom.add_subparsers(dest="phantom_command", required=True)
    sinogram = phantom_commands.add_parser("sinogram", help="Sampled Radon transform of a phantom")
    sinogram.add_argument("--kind", type=str, default="disk", choices=["disk"])
    sinogram.add_argument("--radius", type=float, required=True, help="Disk radius")
    sinogram.add_argument("--center", type=float, nargs=2, default=[0.0, 0.0], metavar=("X", "Y"))
    sinogram.add_argument("--amplitude", type=float, default=1.0)
    sinogram.add_argument("--angles", type=int, required=True, help="Angles K in [0, pi)")
    sinogram.add_argument("--samples", type=int, required=True, help="Offsets M on [-1, 1]")
    sinogram.add_argument("--out", type=str, required=True, help="CSV path")
    sinogram.set_defaults(handler=cmd_phantom_sinogram)

    # sweep
    sweep = commands.add_parser("sweep", help="Stability sweep from a JSON config")
    sweep.add_argument("--config", type=str, required=True, help="Sweep config JSON")
    sweep.add_argument("--out", type=str, default=str(OUTPUT_DIR / "sweep"))
    sweep.add_argument("--record", action="store_true", help="Record the run in the run database")
    sweep.add_argument("--notes", type=str, default=None, help="Notes stored with a recorded run")
    sweep.set_defaults(handler=cmd_sweep)

    return parser


# ============================================================================
# Entry Point
# ============================================================================

def configure_logging(level: str) -> None:
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
        stream=sys.stderr,
    )


def _report_error(kind: str, message: str) -> None:
    sys.stderr.write(json.dumps({"error": kind, "message": message}, sort_keys=True) + "\n")


def run(argv: Optional[Sequence[str]] = None) -> int:
    """
    Parse argv, dispatch to a subcommand and map the outcome to an exit code.

    Returns:
        0 on success, 1 on validation or usage errors, 2 on numerical
        failures and clamped truncation indices.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        _report_error("usage", str(e))
        return EXIT_VALIDATION

    configure_logging(args.log_level)
    try:
        return args.handler(args)
    except ClampedTruncation as e:
        logger.warning(str(e))
        _report_error("clamped", str(e))
        return EXIT_NUMERICAL
    except NumericalFailure as e:
        logger.error(f"Numerical failure: {e}")
        _report_error("numerical_failure", str(e))
        return EXIT_NUMERICAL
    except pswf_core.CertifiedRangeError as e:
        logger.error(f"Outside the certified range: {e}")
        _report_error("numerical_failure", str(e))
        return EXIT_NUMERICAL
    except ValueError as e:
        logger.error(f"Validation error: {e}")
        _report_error("validation", str(e))
        return EXIT_VALIDATION


def main() -> None:
    sys.exit(run(sys.argv[1:]))
