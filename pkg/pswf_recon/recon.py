"""
End-to-end reconstruction pipelines.

This module handles:
- Fourier data restricted to the ball B_r and its weighted data norm
- Noise injection calibrated to a prescribed data error
- Exact 1D reconstruction and the regularized 1D / 2D pipelines
- Error metrics and stability sweeps over the noise level

Workflow (2D):
1. Scale the data on each ray through the origin to w_{r,theta}(x)
2. Apply the truncated inverse F^{-1}_{n*,c} per angle to get a sinogram
3. Invert the Radon transform on the dilated grid and relabel to [-L, L]^2
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from sklearn.linear_model import LinearRegression

from .bandlimit1d import (
    RegParams,
    clamp_n_star,
    lemma13_bound,
    n_star,
    projection_error,
    truncated_inverse,
)
from .config import (
    DEFAULT_ANGLES,
    DEFAULT_BETA,
    DEFAULT_GRID_SIZE,
    DEFAULT_MU,
    DEFAULT_OFFSETS,
    DEFAULT_THREADS,
    GRID_EXTENT_FACTOR,
    LAMBDA_FLOOR,
)
from .phantoms import Phantom, check_support, evaluate, fourier, radon
from .pswf_core import PswfBasis, as_bandwidth, build_basis
from .radon2d import (
    GridFunction2D,
    Sinogram,
    inverse_radon,
    offset_grid,
    sobolev_norm_grid,
    uniform_angles,
)
from .seeding import generator

logger = logging.getLogger(__name__)

# Relative tolerance when matching c = r * sigma against a basis
C_MATCH_RTOL = 1e-12


# ============================================================================
# Domain Types
# ============================================================================

@dataclass(frozen=True)
class FourierData:
    """
    Samples of w ~ v_hat on the ball B_r.

    Measurement points are p = r x_i in 1D and p = r x_i theta_k in 2D, with
    x_i the basis quadrature nodes (signed, so each angle covers a full line
    through the origin).

    Attributes:
        r: Ball radius.
        d: Dimension, 1 or 2.
        sigma: Support radius of v.
        samples: (K,) in 1D, (K, n_angles) in 2D.
        x_nodes: Nodes x_i in [-1, 1].
        x_weights: Gauss weights of x_nodes.
        angles: phi_k in [0, pi) for 2D, None in 1D.
        provenance: {"kind": "exact"} or {"kind": "noisy", "seed", "delta", "N"}.
    """
    r: float
    d: int
    sigma: float
    samples: np.ndarray
    x_nodes: np.ndarray
    x_weights: np.ndarray
    angles: Optional[np.ndarray] = None
    provenance: Dict = field(default_factory=lambda: {"kind": "exact"})

    def __post_init__(self):
        if self.r <= 0.0 or self.sigma <= 0.0:
            raise ValueError(f"r and sigma must be > 0, got r={self.r}, sigma={self.sigma}")
        if self.d not in (1, 2):
            raise ValueError(f"Dimension must be 1 or 2, got {self.d}")
        if self.samples.size == 0:
            raise ValueError("Fourier data needs a non-empty measurement grid")
        if self.samples.shape[0] != self.x_nodes.size:
            raise ValueError("Samples do not match the measurement nodes")
        if self.d == 2 and (self.angles is None or self.samples.shape[1] != self.angles.size):
            raise ValueError("2D samples need one column per angle")

    @property
    def c(self) -> float:
        return self.r * self.sigma


@dataclass(frozen=True)
class Reconstruction:
    """
    Output of a reconstruction pipeline.

    1D results carry samples on q = sigma * y with quadrature weights in q;
    2D results carry the grid and the intermediate sinogram.
    """
    d: int
    sigma: float
    n_used: int
    clamped: bool
    params: Optional[RegParams] = None
    q: Optional[np.ndarray] = None
    values: Optional[np.ndarray] = None
    q_weights: Optional[np.ndarray] = None
    grid: Optional[GridFunction2D] = None
    sinogram: Optional[Sinogram] = None


@dataclass(frozen=True)
class ErrorMetric:
    """
    Reconstruction error.

    1D: L2(-sigma, sigma) norm of v - v_rec. 2D: discrete H^{-1/2} norm on the
    full box and restricted to B_sigma.
    """
    value: float
    relative: float
    restricted: Optional[float] = None
    restricted_relative: Optional[float] = None
    norm: str = "L2"


@dataclass
class SweepResult:
    table: pd.DataFrame
    entries: pd.DataFrame
    coefficients: Tuple[float, float]
    relative_residual: float
    config: Dict


@dataclass(frozen=True)
class DifferenceReport:
    reconstruction: Reconstruction
    difference_norm: float
    data_norm: float


# ============================================================================
# Data and Norms
# ============================================================================

def _check_c(c_data: float, basis: PswfBasis) -> None:
    if abs(c_data - basis.c) > C_MATCH_RTOL * basis.c:
        raise ValueError(f"Data bandwidth c=r*sigma={c_data:.12g} does not match basis c={basis.c:.12g}")


def _weighted_norm(samples: np.ndarray, r: float, weights: np.ndarray, d: int) -> float:
    magnitude = np.abs(samples) ** 2
    if d == 1:
        return float(np.sqrt(r * np.dot(weights, magnitude)))
    n_angles = samples.shape[1]
    return float(np.sqrt(r * (math.pi / n_angles) * np.sum(weights[:, None] * magnitude)))


def _trapezoid_weights(grid: np.ndarray) -> np.ndarray:
    weights = np.zeros(grid.size)
    steps = np.diff(grid)
    weights[:-1] += 0.5 * steps
    weights[1:] += 0.5 * steps
    return weights


def norm_r(data: FourierData) -> float:
    """
    Data norm (int_{B_r} |p|^{1-d} |w(p)|^2 dp)^{1/2}.

    In 2D the weight cancels the polar Jacobian, so the norm is a plain sum
    over the signed rays with the rectangle rule in angle.
    """
    return _weighted_norm(data.samples, data.r, data.x_weights, data.d)


def sample_fourier_data(
    phantom: Phantom,
    r: float,
    sigma: float,
    basis: PswfBasis,
    n_angles: int = DEFAULT_ANGLES,
) -> FourierData:
    """
    Exact data v_hat at the measurement points matching a basis.

    Raises:
        ValueError: On a c mismatch or a phantom not inside B_sigma.
    """
    _check_c(r * sigma, basis)
    check_support(phantom, sigma)
    if phantom.dim == 1:
        samples = fourier(phantom, r * basis.nodes)
        return FourierData(r=r, d=1, sigma=sigma, samples=np.asarray(samples, dtype=complex),
                           x_nodes=basis.nodes, x_weights=basis.weights)

    angles = uniform_angles(n_angles)
    directions = np.stack([np.cos(angles), np.sin(angles)], axis=-1)
    points = r * basis.nodes[:, None, None] * directions[None, :, :]
    samples = fourier(phantom, points)
    return FourierData(r=r, d=2, sigma=sigma, samples=np.asarray(samples, dtype=complex),
                       x_nodes=basis.nodes, x_weights=basis.weights, angles=angles)


def make_noisy(exact: FourierData, delta: float, N: float, seed: int) -> FourierData:
    """
    Perturb exact data so that norm_r(w - v_hat) = delta * N exactly.

    The perturbation is i.i.d. complex Gaussian, rescaled after drawing. Each
    angle draws from its own stream of the seed, so the noise direction for a
    given seed does not depend on delta.

    Returns:
        The input unchanged when delta * N == 0.
    """
    if delta < 0.0 or N < 0.0:
        raise ValueError(f"delta and N must be >= 0, got delta={delta}, N={N}")
    level = delta * N
    if level == 0.0:
        return exact

    columns = 1 if exact.d == 1 else exact.samples.shape[1]
    size = exact.samples.shape[0]
    noise = np.empty((size, columns), dtype=complex)
    for k in range(columns):
        rng = generator(seed, "noise", k)
        noise[:, k] = rng.standard_normal(size) + 1j * rng.standard_normal(size)
    noise = noise.reshape(exact.samples.shape)
    noise *= level / _weighted_norm(noise, exact.r, exact.x_weights, exact.d)

    return replace(
        exact,
        samples=exact.samples + noise,
        provenance={"kind": "noisy", "seed": int(seed), "delta": float(delta), "N": float(N)},
    )


# ============================================================================
# Reconstruction Pipelines
# ============================================================================

def reconstruct_exact_1d(
    data: FourierData,
    basis: PswfBasis,
    n: int,
    y: Optional[np.ndarray] = None,
) -> Reconstruction:
    """
    1D reconstruction v(sigma y) = F^{-1}_{n,c}[(2 pi / sigma) w(r .)](y).

    Args:
        data: 1D Fourier data on the basis nodes.
        basis: PSWF basis with c = r * sigma.
        n: Truncation index.
        y: Output grid in [-1, 1]; defaults to the quadrature nodes.

    Returns:
        Reconstruction with samples at q = sigma * y.
    """
    if data.d != 1:
        raise ValueError("reconstruct_exact_1d needs 1D data")
    _check_c(data.c, basis)
    scaled = (2 * math.pi / data.sigma) * data.samples
    values = truncated_inverse(basis, scaled, n, y)
    if y is None:
        y, y_weights = basis.nodes, basis.weights
    else:
        y = np.asarray(y, dtype=float)
        y_weights = _trapezoid_weights(y)
    return Reconstruction(
        d=1,
        sigma=data.sigma,
        n_used=int(n),
        clamped=False,
        q=data.sigma * y,
        values=values,
        q_weights=data.sigma * y_weights,
    )


def sinogram_from_data(data: FourierData, basis: PswfBasis, n: int, n_offsets: int) -> Sinogram:
    """u_{r,sigma}(y, theta_k) = F^{-1}_{n,c}[(2 pi / sigma)^2 w(r x theta_k)](y) for every angle."""
    if not np.allclose(data.angles, uniform_angles(data.angles.size), atol=1e-12):
        raise ValueError("Data angles must be the uniform sinogram angles k pi / K")
    scaled = (2 * math.pi / data.sigma) ** 2 * data.samples
    values = truncated_inverse(basis, scaled, n, offset_grid(n_offsets))
    return Sinogram(y_grid=offset_grid(n_offsets), angles=data.angles, values=values)


def reconstruct_regularized(
    data: FourierData,
    basis: PswfBasis,
    params: RegParams,
    y: Optional[np.ndarray] = None,
    grid_size: int = DEFAULT_GRID_SIZE,
    extent: Optional[float] = None,
    n_offsets: int = DEFAULT_OFFSETS,
    s_max: Optional[float] = None,
    threads: Optional[int] = None,
) -> Reconstruction:
    """
    Regularized reconstruction with the truncation index n* of params.

    n* beyond the certified range is clamped to basis.n_max and reported
    through Reconstruction.clamped.

    Args:
        data: Noisy (or exact) Fourier data.
        basis: PSWF basis with c = r * sigma.
        params: Output of n_star for the same c.
        y: 1D output grid in [-1, 1].
        grid_size, extent: 2D output grid; extent defaults to 2 sigma.
        n_offsets: Sinogram offsets M in 2D.
        s_max: Inverse Radon cutoff in the dilated coordinates.
        threads: Worker threads for the angle loop.
    """
    _check_c(data.c, basis)
    if abs(params.c - basis.c) > C_MATCH_RTOL * basis.c:
        raise ValueError(f"RegParams were computed for c={params.c}, basis has c={basis.c}")
    n_used, clamped = clamp_n_star(basis, params)

    if data.d == 1:
        result = reconstruct_exact_1d(data, basis, n_used, y)
        return replace(result, clamped=clamped, params=params)

    if extent is None:
        extent = GRID_EXTENT_FACTOR * data.sigma
    sinogram = sinogram_from_data(data, basis, n_used, n_offsets)
    scaled_grid = inverse_radon(
        sinogram, grid_size=grid_size, extent=extent / data.sigma, s_max=s_max, threads=threads
    )
    grid = GridFunction2D(extent=float(extent), values=scaled_grid.values)
    logger.info(
        f"2D reconstruction: c={basis.c}, n*={params.n_star}, n_used={n_used}, "
        f"K={data.angles.size}, G={grid_size}, L={extent}"
    )
    return Reconstruction(
        d=2,
        sigma=data.sigma,
        n_used=n_used,
        clamped=clamped,
        params=params,
        grid=grid,
        sinogram=sinogram,
    )


# ============================================================================
# Error Metrics
# ============================================================================

def error_metric(phantom: Phantom, reconstruction: Reconstruction) -> ErrorMetric:
    """
    Error of a reconstruction against the phantom.

    1D: L2(-sigma, sigma) with the reconstruction's quadrature weights.
    2D: discrete H^{-1/2} on the reconstruction grid, full box and B_sigma.
    """
    if reconstruction.d == 1:
        exact = evaluate(phantom, reconstruction.q)
        weights = reconstruction.q_weights
        error = math.sqrt(float(np.dot(weights, np.abs(exact - reconstruction.values) ** 2)))
        norm = math.sqrt(float(np.dot(weights, np.abs(exact) ** 2)))
        return ErrorMetric(value=error, relative=error / norm if norm > 0 else math.inf)

    grid = reconstruction.grid
    mesh = grid.mesh()
    exact = evaluate(phantom, mesh).astype(complex)
    difference = GridFunction2D(extent=grid.extent, values=exact - grid.values)
    inside = np.hypot(mesh[..., 0], mesh[..., 1]) <= reconstruction.sigma
    restricted = GridFunction2D(extent=grid.extent, values=np.where(inside, difference.values, 0.0))

    order = -0.5
    reference = sobolev_norm_grid(GridFunction2D(extent=grid.extent, values=exact), order)
    value = sobolev_norm_grid(difference, order)
    restricted_value = sobolev_norm_grid(restricted, order)
    return ErrorMetric(
        value=value,
        relative=value / reference if reference > 0 else math.inf,
        restricted=restricted_value,
        restricted_relative=restricted_value / reference if reference > 0 else math.inf,
        norm="H^-1/2",
    )


def projection_error_bound(
    phantom: Phantom,
    basis: PswfBasis,
    data: FourierData,
    n: int,
    noise_level: float,
) -> float:
    """
    Error-split bound for the reconstruction, in the units of error_metric (1D)
    or of a sinogram column (2D, root mean square over angles).

    The data error delta * N in the r-norm becomes a per-column L2(-1, 1)
    error after the (2 pi / sigma)^d scaling.
    """
    sigma, r = data.sigma, data.r
    if data.d == 1:
        f_nodes = evaluate(phantom, sigma * basis.nodes)
        column_noise = (2 * math.pi / sigma) * noise_level / math.sqrt(r)
        bound = lemma13_bound(basis, n, column_noise, projection_error(basis, f_nodes, n))
        return math.sqrt(sigma) * bound

    errors = []
    for phi in data.angles:
        column = radon(phantom, sigma * basis.nodes, phi) / sigma
        errors.append(projection_error(basis, column, n))
    rms_projection = math.sqrt(float(np.mean(np.square(errors))))
    column_noise = (2 * math.pi / sigma) ** 2 * noise_level / math.sqrt(r * math.pi)
    return lemma13_bound(basis, n, column_noise, rms_projection)


def reconstruction_difference(
    data1: FourierData,
    data2: FourierData,
    basis: PswfBasis,
    params: RegParams,
    **kwargs,
) -> DifferenceReport:
    """
    Reconstruction of the data difference w1 - w2 and its norms.

    The pipeline is linear, so this is the difference of the two
    reconstructions; the report pairs its norm (H^{-1/2} in 2D, L2 in 1D)
    with the data-side norm ||w1 - w2||_r.
    """
    if data1.d != data2.d or data1.samples.shape != data2.samples.shape:
        raise ValueError("Difference needs data on the same measurement grid")
    if data1.r != data2.r or data1.sigma != data2.sigma:
        raise ValueError("Difference needs data with the same r and sigma")
    difference = replace(
        data1,
        samples=data1.samples - data2.samples,
        provenance={"kind": "difference"},
    )
    result = reconstruct_regularized(difference, basis, params, **kwargs)
    if result.d == 1:
        norm = math.sqrt(float(np.dot(result.q_weights, np.abs(result.values) ** 2)))
    else:
        norm = sobolev_norm_grid(result.grid, -0.5)
    return DifferenceReport(reconstruction=result, difference_norm=norm, data_norm=norm_r(difference))


# ============================================================================
# Stability Sweep
# ============================================================================

def fit_stability_model(
    deltas: Sequence[float],
    errors: Sequence[float],
    beta: float,
    mu: float,
) -> Tuple[Tuple[float, float], np.ndarray, float]:
    """
    Non-negative least-squares fit of error ~ C1 delta^beta + C2 (log 1/delta)^{-mu}.

    Returns:
        Tuple ((C1, C2), per-row relative residuals, overall relative residual).
    """
    deltas = np.asarray(deltas, dtype=float)
    errors = np.asarray(errors, dtype=float)
    features = np.column_stack([deltas ** beta, np.log(1.0 / deltas) ** (-mu)])
    model = LinearRegression(fit_intercept=False, positive=True).fit(features, errors)
    predicted = model.predict(features)
    rows = np.abs(predicted - errors) / np.where(errors > 0, errors, 1.0)
    overall = float(np.linalg.norm(predicted - errors) / np.linalg.norm(errors))
    return (float(model.coef_[0]), float(model.coef_[1])), rows, overall


def stability_sweep(
    phantom: Phantom,
    c: float,
    alpha: float,
    deltas: Sequence[float],
    seeds: Sequence[int],
    sigma: float = 1.0,
    beta: float = DEFAULT_BETA,
    mu: float = DEFAULT_MU,
    noise_scale_N: Optional[float] = None,
    n_angles: int = DEFAULT_ANGLES,
    grid_size: int = DEFAULT_GRID_SIZE,
    n_offsets: int = DEFAULT_OFFSETS,
    lambda_floor: float = LAMBDA_FLOOR,
    threads: Optional[int] = None,
) -> SweepResult:
    """
    Regularized reconstructions over a decreasing list of noise levels.

    Each (delta, seed) pair is an independent job; jobs may run concurrently
    and are merged by key, so the result does not depend on scheduling.

    Args:
        phantom: Test function inside B_sigma.
        c: Bandwidth r * sigma.
        alpha: Exponent of the truncation rule.
        deltas: Strictly decreasing noise levels in (0, 1).
        seeds: Noise seeds averaged per delta.
        sigma: Support radius.
        beta, mu: Exponents of the fitted stability model.
        noise_scale_N: Bound N; defaults to norm_r of the exact data. 0 gives
            noiseless entries.

    Returns:
        SweepResult with one row per delta (delta, n_star, n_used, clamped,
        mean_error, lemma13_bound, fit_residual) and one row per job.
    """
    c = as_bandwidth(c)
    deltas = [float(value) for value in deltas]
    seeds = [int(value) for value in seeds]
    if not deltas or not seeds:
        raise ValueError("Sweep needs at least one delta and one seed")
    if any(later >= earlier for earlier, later in zip(deltas, deltas[1:])):
        raise ValueError("Sweep deltas must be strictly decreasing")
    threads = max(1, int(threads or DEFAULT_THREADS))

    r = c / sigma
    params_by_delta = {delta: n_star(c, alpha, delta, 1.0, beta, mu) for delta in deltas}
    n_request = max(params.n_star for params in params_by_delta.values())
    basis = build_basis(c, n_request, lambda_floor)
    exact = sample_fourier_data(phantom, r, sigma, basis, n_angles)
    N = norm_r(exact) if noise_scale_N is None else float(noise_scale_N)
    params_by_delta = {delta: replace(params, noise_scale_N=N) for delta, params in params_by_delta.items()}

    # Jobs run the angle loop single-threaded
    inner_threads = 1

    def run_job(key: Tuple[float, int]) -> Dict:
        delta, seed = key
        params = params_by_delta[delta]
        noisy = make_noisy(exact, delta, N, seed)
        result = reconstruct_regularized(
            noisy, basis, params,
            grid_size=grid_size, n_offsets=n_offsets, threads=inner_threads,
        )
        metric = error_metric(phantom, result)
        error = metric.restricted if metric.restricted is not None else metric.value
        logger.info(f"Sweep entry delta={delta:g}, seed={seed}: n_used={result.n_used}, error={error:.6g}")
        return {
            "delta": delta,
            "seed": seed,
            "n_star": params.n_star,
            "n_used": result.n_used,
            "clamped": result.clamped,
            "error": error,
            "relative_error": metric.restricted_relative if metric.restricted is not None else metric.relative,
        }

    keys = [(delta, seed) for delta in deltas for seed in seeds]
    with ThreadPoolExecutor(max_workers=threads) as executor:
        results = dict(zip(keys, executor.map(run_job, keys)))
    entries = pd.DataFrame([results[key] for key in keys])

    rows = []
    for delta in deltas:
        subset = entries[entries["delta"] == delta]
        n_used = int(subset["n_used"].iloc[0])
        rows.append({
            "delta": delta,
            "n_star": params_by_delta[delta].n_star,
            "n_used": n_used,
            "clamped": bool(subset["clamped"].iloc[0]),
            "mean_error": float(subset["error"].mean()),
            "lemma13_bound": projection_error_bound(phantom, basis, exact, n_used, delta * N),
        })
    table = pd.DataFrame(rows)

    if len(deltas) >= 2:
        coefficients, residuals, overall = fit_stability_model(deltas, table["mean_error"], beta, mu)
    else:
        coefficients, residuals, overall = (math.nan, math.nan), np.full(1, math.nan), math.nan
    table["fit_residual"] = residuals

    config = {
        "c": c,
        "r": r,
        "sigma": sigma,
        "alpha": alpha,
        "beta": beta,
        "mu": mu,
        "deltas": deltas,
        "seeds": seeds,
        "noise_scale_N": N,
        "n_angles": n_angles,
        "grid_size": grid_size,
        "n_offsets": n_offsets,
        "lambda_floor": lambda_floor,
        "n_max": basis.n_max,
    }
    logger.info(f"Sweep finished: {len(keys)} jobs, fit C1={coefficients[0]:.4g}, C2={coefficients[1]:.4g}, residual={overall:.3g}")
    return SweepResult(
        table=table,
        entries=entries,
        coefficients=coefficients,
        relative_residual=overall,
        config=config,
    )
