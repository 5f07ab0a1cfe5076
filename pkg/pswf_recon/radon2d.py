"""
Radon-side machinery in the plane.

This module handles:
- Sinograms on [-1, 1] x [0, pi) and their extension to the full circle
- The projection (Fourier slice) theorem for closed-form phantoms
- The inverse Radon transform by direct quadrature of the polar Fourier
  inversion formula
- Discrete Sobolev norms on grids and sinograms, and the dilation bounds

Angles are phi_k = k pi / K with theta = (cos phi, sin phi). The second
half-circle is filled in from u(y, phi + pi) = u(-y, phi).
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import pandas as pd
from scipy.interpolate import CubicSpline
from scipy.ndimage import map_coordinates

from .config import (
    DEFAULT_GRID_SIZE,
    DEFAULT_THREADS,
    MIN_ANGLES,
    SCALING_SLACK,
    S_GRID_FACTOR,
    SUPPORT_TOLERANCE,
    T_POINTS_PER_WAVE,
)
from .phantoms import Disk, Phantom, PhantomSum, fourier, radon

logger = logging.getLogger(__name__)

# Angles handled per backprojection job; fixed so sums do not depend on thread count
ANGLE_CHUNK = 16
# Rows of the exp(-i t s) kernel built at once
T_CHUNK = 1024


# ============================================================================
# Domain Types
# ============================================================================

def offset_grid(n_offsets: int) -> np.ndarray:
    """Uniform grid of n_offsets points on [-1, 1]."""
    if n_offsets < 2:
        raise ValueError(f"Sinogram needs at least 2 offsets, got {n_offsets}")
    return np.linspace(-1.0, 1.0, int(n_offsets))


def uniform_angles(n_angles: int) -> np.ndarray:
    """phi_k = k pi / K, k = 0..K-1."""
    if n_angles < 1:
        raise ValueError(f"Sinogram needs at least 1 angle, got {n_angles}")
    return np.arange(int(n_angles)) * math.pi / n_angles


@dataclass(frozen=True)
class Sinogram:
    """
    Complex samples u(y_m, phi_k) on [-1, 1] x [0, pi).

    Attributes:
        y_grid: M uniform offsets on [-1, 1].
        angles: K uniform angles k pi / K.
        values: (M, K) samples.
    """
    y_grid: np.ndarray
    angles: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        n_offsets, n_angles = self.values.shape
        if not np.allclose(self.y_grid, offset_grid(n_offsets), atol=1e-12):
            raise ValueError("Sinogram offsets must be the uniform grid on [-1, 1]")
        if not np.allclose(self.angles, uniform_angles(n_angles), atol=1e-12):
            raise ValueError("Sinogram angles must be k pi / K on [0, pi)")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("Sinogram values must be finite")

    @classmethod
    def from_values(cls, values) -> "Sinogram":
        """Sinogram on the canonical grids implied by the shape of values."""
        values = np.asarray(values)
        if values.ndim != 2:
            raise ValueError(f"Sinogram values must be a matrix, got shape {values.shape}")
        return cls(
            y_grid=offset_grid(values.shape[0]),
            angles=uniform_angles(values.shape[1]),
            values=values,
        )

    @property
    def n_offsets(self) -> int:
        return self.values.shape[0]

    @property
    def n_angles(self) -> int:
        return self.values.shape[1]

    def extended(self) -> Tuple[np.ndarray, np.ndarray]:
        """
        Angles and values on the full circle [0, 2 pi).

        Returns:
            Tuple (angles of length 2K, values of shape (M, 2K)).
        """
        angles = np.concatenate([self.angles, self.angles + math.pi])
        values = np.concatenate([self.values, self.values[::-1, :]], axis=1)
        return angles, values

    def to_frame(self) -> pd.DataFrame:
        """Long table with columns y, theta, value (and value_im for complex data)."""
        y, theta = np.meshgrid(self.y_grid, self.angles, indexing="ij")
        frame = pd.DataFrame({"y": y.ravel(), "theta": theta.ravel()})
        if np.iscomplexobj(self.values):
            frame["value"] = self.values.real.ravel()
            frame["value_im"] = self.values.imag.ravel()
        else:
            frame["value"] = self.values.ravel()
        return frame


@dataclass(frozen=True)
class GridFunction2D:
    """
    Samples values[i, j] = f(x_i, x_j) with x_j = -L + j h and h = 2L / G.

    Attributes:
        extent: Half-width L of the box [-L, L]^2.
        values: (G, G) complex samples.
    """
    extent: float
    values: np.ndarray
    dim: int = 2

    def __post_init__(self):
        if self.extent <= 0.0:
            raise ValueError(f"Grid extent must be > 0, got {self.extent}")
        if self.values.ndim != 2 or self.values.shape[0] != self.values.shape[1]:
            raise ValueError(f"Grid values must be square, got shape {self.values.shape}")
        if self.values.shape[0] < 2:
            raise ValueError("Grid resolution must be at least 2")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("Grid values must be finite")

    @property
    def resolution(self) -> int:
        return self.values.shape[0]

    @property
    def spacing(self) -> float:
        return 2.0 * self.extent / self.resolution

    @property
    def points(self) -> np.ndarray:
        return grid_points(self.resolution, self.extent)

    def mesh(self) -> np.ndarray:
        """Grid points as an array of shape (G, G, 2)."""
        x = self.points
        first, second = np.meshgrid(x, x, indexing="ij")
        return np.stack([first, second], axis=-1)

    def l2_norm(self) -> float:
        """Grid L2 norm h * sqrt(sum |f|^2)."""
        return float(self.spacing * np.sqrt(np.sum(np.abs(self.values) ** 2)))

    @classmethod
    def sample(cls, func, resolution: int, extent: float) -> "GridFunction2D":
        """Grid function of func evaluated on points of shape (G, G, 2)."""
        x = grid_points(resolution, extent)
        first, second = np.meshgrid(x, x, indexing="ij")
        values = np.asarray(func(np.stack([first, second], axis=-1)), dtype=complex)
        return cls(extent=float(extent), values=values)


def grid_points(resolution: int, extent: float) -> np.ndarray:
    """x_j = -L + j 2L / G for j = 0..G-1."""
    return -extent + np.arange(resolution) * (2.0 * extent / resolution)


# ============================================================================
# Sinograms of Phantoms
# ============================================================================

def sinogram_from_phantom(
    phantom: Phantom,
    n_offsets: int,
    n_angles: int,
    sigma: float = 1.0,
) -> Sinogram:
    """
    Sampled Radon transform of the dilate v_sigma(q) = v(sigma q).

    R[v_sigma](y, theta) = sigma^{-1} R[v](sigma y, theta).

    Args:
        phantom: 2D phantom.
        n_offsets: M.
        n_angles: K.
        sigma: Dilation; 1 samples R[v] itself.
    """
    y = offset_grid(n_offsets)
    phi = uniform_angles(n_angles)
    values = radon(phantom, sigma * y[:, None], phi[None, :]) / sigma
    return Sinogram(y_grid=y, angles=phi, values=values)


def _chord_rule(s: float, radius: float) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss rule in psi for t = t0 + a sin(psi), sized to the oscillation s a."""
    n_points = 64 + int(math.ceil(abs(s) * radius))
    nodes, weights = np.polynomial.legendre.leggauss(n_points)
    return 0.5 * math.pi * nodes, 0.5 * math.pi * weights


def _slice_integral(disk: Disk, s: float, phi: float) -> complex:
    """int exp(i s t) R[disk](t, theta) dt with the chord substitution."""
    psi, weights = _chord_rule(s, disk.radius)
    a = disk.radius
    t0 = disk.center[0] * math.cos(phi) + disk.center[1] * math.sin(phi)
    # R = 2 A a cos(psi), dt = a cos(psi) dpsi
    integrand = np.exp(1j * s * (t0 + a * np.sin(psi))) * 2.0 * disk.amplitude * a * a * np.cos(psi) ** 2
    return complex(np.dot(weights, integrand))


def projection_theorem_check(phantom: Phantom, s: float, phi: float) -> Tuple[complex, complex]:
    """
    Both sides of v_hat(s theta) = (2 pi)^{-2} int exp(i s t) R[v](t, theta) dt.

    Returns:
        Tuple (lhs, rhs).
    """
    if phantom.dim != 2:
        raise ValueError("Projection theorem check needs a 2D phantom")
    theta = np.array([math.cos(phi), math.sin(phi)])
    lhs = complex(fourier(phantom, s * theta))
    parts = phantom.components if isinstance(phantom, PhantomSum) else (phantom,)
    rhs = sum(_slice_integral(part, s, phi) for part in parts) / (2 * math.pi) ** 2
    return lhs, complex(rhs)


# ============================================================================
# Inverse Radon Transform
# ============================================================================

def default_s_max(u: Sinogram, grid_size: int, extent: float) -> float:
    """min(2 x grid Nyquist, offset-grid Nyquist)."""
    grid_nyquist = math.pi / (2.0 * extent / grid_size)
    offset_nyquist = math.pi / (u.y_grid[1] - u.y_grid[0])
    return min(2.0 * grid_nyquist, offset_nyquist)


def _trapezoid_weights(grid: np.ndarray) -> np.ndarray:
    weights = np.full(grid.size, grid[1] - grid[0])
    weights[0] *= 0.5
    weights[-1] *= 0.5
    return weights


def _backprojection_table(
    values: np.ndarray,
    y_grid: np.ndarray,
    s_grid: np.ndarray,
    t_grid: np.ndarray,
) -> np.ndarray:
    """
    h_phi(t) = int_0^{s_max} s exp(-i s t) u_hat(s, phi) ds for every extended angle.

    u_hat(s, phi) = (2 pi)^{-1} int exp(i s y) u(y, phi) dy by the trapezoid rule.
    """
    forward = np.exp(1j * np.outer(s_grid, y_grid)) * (_trapezoid_weights(y_grid) / (2 * math.pi))
    u_hat = forward @ values
    radial = (_trapezoid_weights(s_grid) * s_grid)[:, None] * u_hat

    table = np.empty((t_grid.size, values.shape[1]), dtype=complex)
    for start in range(0, t_grid.size, T_CHUNK):
        rows = slice(start, start + T_CHUNK)
        table[rows] = np.exp(-1j * np.outer(t_grid[rows], s_grid)) @ radial
    return table


def _backproject_chunk(
    t_grid: np.ndarray,
    table: np.ndarray,
    angles: np.ndarray,
    columns: np.ndarray,
    x: np.ndarray,
) -> np.ndarray:
    """Sum over the given angles of h_phi(theta . q) on the grid."""
    total = np.zeros((x.size, x.size), dtype=complex)
    for k in columns:
        spline = CubicSpline(t_grid, table[:, k])
        projection = math.cos(angles[k]) * x[:, None] + math.sin(angles[k]) * x[None, :]
        total += spline(projection)
    return total


def inverse_radon(
    u: Sinogram,
    grid_size: int = DEFAULT_GRID_SIZE,
    extent: float = 1.0,
    s_max: Optional[float] = None,
    threads: Optional[int] = None,
) -> GridFunction2D:
    """
    Inverse Radon transform by direct quadrature of the polar inversion formula.

    v(q) = (2 pi)^{-1} int_{S^1} int_0^{s_max} exp(-i s theta.q) u_hat(s, theta) s ds dtheta,
    with a trapezoid rule on a uniform s-grid of S_GRID_FACTOR * M points and
    the rectangle rule over the 2K extended angles. The inner s-integral is
    tabulated per angle on a fine t-grid and interpolated with cubic splines.

    Args:
        u: Sinogram on [-1, 1] x [0, pi).
        grid_size: Output resolution G.
        extent: Output box half-width L.
        s_max: Frequency cutoff; defaults to default_s_max.
        threads: Worker threads for the angle loop.

    Returns:
        GridFunction2D on [-L, L]^2.

    Raises:
        ValueError: If the sinogram has fewer than MIN_ANGLES angles.
    """
    if u.n_angles < MIN_ANGLES:
        raise ValueError(f"Inverse Radon needs at least {MIN_ANGLES} angles in [0, pi), got {u.n_angles}")
    if grid_size < 2 or extent <= 0.0:
        raise ValueError(f"Invalid target grid G={grid_size}, L={extent}")
    if s_max is None:
        s_max = default_s_max(u, grid_size, extent)
    if s_max <= 0.0:
        raise ValueError(f"s_max must be > 0, got {s_max}")
    threads = max(1, int(threads or DEFAULT_THREADS))

    angles, values = u.extended()
    s_grid = np.linspace(0.0, s_max, S_GRID_FACTOR * u.n_offsets)
    t_reach = math.sqrt(2.0) * extent
    t_step = 2.0 * math.pi / (T_POINTS_PER_WAVE * s_max)
    t_count = int(math.ceil(2.0 * t_reach / t_step)) + 1
    t_grid = np.linspace(-t_reach, t_reach, max(t_count, 4))

    logger.debug(
        f"Inverse Radon: M={u.n_offsets}, K={u.n_angles}, G={grid_size}, L={extent}, "
        f"s_max={s_max:.4g}, |s|={s_grid.size}, |t|={t_grid.size}, threads={threads}"
    )

    table = _backprojection_table(values, u.y_grid, s_grid, t_grid)
    x = grid_points(grid_size, extent)
    chunks = [np.arange(start, min(start + ANGLE_CHUNK, angles.size))
              for start in range(0, angles.size, ANGLE_CHUNK)]

    total = np.zeros((grid_size, grid_size), dtype=complex)
    with ThreadPoolExecutor(max_workers=threads) as executor:
        partials = executor.map(
            lambda columns: _backproject_chunk(t_grid, table, angles, columns, x), chunks
        )
        for partial in partials:
            total += partial

    total *= (math.pi / u.n_angles) / (2 * math.pi)
    return GridFunction2D(extent=float(extent), values=total)


# ============================================================================
# Sobolev Norms
# ============================================================================

def _is_power_of_two(n: int) -> bool:
    return n >= 2 and (n & (n - 1)) == 0


def sobolev_norm_grid(f: GridFunction2D, order: float) -> float:
    """
    Discrete (int (1 + |p|^2)^order |f_hat(p)|^2 dp)^{1/2}.

    f_hat is the unitary continuum transform approximated by the FFT with
    explicit spacing factors, so order 0 reproduces the grid L2 norm.

    Raises:
        ValueError: If the resolution is not a power of two.
    """
    size = f.resolution
    if not _is_power_of_two(size):
        raise ValueError(f"Grid resolution must be a power of two, got {size}")
    h = f.spacing
    spectrum = np.fft.fft2(f.values)
    frequencies = 2 * math.pi * np.fft.fftfreq(size, d=h)
    p_squared = frequencies[:, None] ** 2 + frequencies[None, :] ** 2
    total = np.sum((1.0 + p_squared) ** order * np.abs(spectrum) ** 2)
    return float(h / size * np.sqrt(total))


def sinogram_norm(u: Sinogram, order: float) -> float:
    """
    Discrete H^order(R x S^1) norm (int_{S^1} int (1 + s^2)^order |u_hat(s, theta)|^2 ds dtheta)^{1/2}.

    The half-circle of stored angles is doubled using the sinogram symmetry.
    """
    dy = u.y_grid[1] - u.y_grid[0]
    size = u.n_offsets
    spectrum = np.fft.fft(u.values, axis=0) * (dy / math.sqrt(2 * math.pi))
    s = 2 * math.pi * np.fft.fftfreq(size, d=dy)
    ds = 2 * math.pi / (size * dy)
    per_angle = np.sum((1.0 + s[:, None] ** 2) ** order * np.abs(spectrum) ** 2, axis=0) * ds
    return float(np.sqrt(2.0 * (math.pi / u.n_angles) * np.sum(per_angle)))


def support_extent(f: GridFunction2D) -> float:
    """Largest |q| where |f| exceeds SUPPORT_TOLERANCE times max |f|."""
    magnitude = np.abs(f.values)
    peak = magnitude.max()
    if peak == 0.0:
        return 0.0
    mesh = f.mesh()
    radius = np.hypot(mesh[..., 0], mesh[..., 1])
    return float(radius[magnitude > SUPPORT_TOLERANCE * peak].max())


def dilate(f: GridFunction2D, sigma: float) -> GridFunction2D:
    """
    f_sigma(q) = f(sigma q) on the same grid by cubic interpolation.

    Raises:
        ValueError: If the dilate's support leaves the grid extent.
    """
    if sigma <= 0.0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    if sigma == 1.0:
        return f
    reach = support_extent(f) / sigma
    if reach > f.extent:
        raise ValueError(
            f"Dilate by sigma={sigma} reaches |q|={reach:.3g}, beyond the grid extent {f.extent}"
        )
    x = f.points
    first, second = np.meshgrid(x, x, indexing="ij")
    coordinates = np.stack([(sigma * first + f.extent) / f.spacing,
                            (sigma * second + f.extent) / f.spacing])
    real = map_coordinates(f.values.real, coordinates, order=3, mode="constant", cval=0.0)
    imag = map_coordinates(f.values.imag, coordinates, order=3, mode="constant", cval=0.0)
    return GridFunction2D(extent=f.extent, values=real + 1j * imag)


def scaling_bounds(norm: float, sigma: float, order: float, d: int = 2) -> Tuple[float, float]:
    """
    Lower and upper bounds on ||v_sigma||_{H^order} in terms of ||v||_{H^order}.

    For order >= 0: sigma^{order - d/2} (1 + sigma)^{-order} and
    (1 + sigma)^{order} sigma^{-d/2}; the two factors swap for order <= 0.
    """
    hoelder = sigma ** (order - d / 2) / (1.0 + sigma) ** order
    binomial = (1.0 + sigma) ** order / sigma ** (d / 2)
    if order >= 0.0:
        return hoelder * norm, binomial * norm
    return binomial * norm, hoelder * norm


def scaling_check(f: GridFunction2D, sigma: float, order: float) -> Tuple[float, float, float]:
    """
    Dilation bounds against the measured norm of f_sigma.

    Returns:
        Tuple (lower, value, upper) with the bounds widened by SCALING_SLACK,
        so lower <= value <= upper is the assertion to make.
    """
    norm = sobolev_norm_grid(f, order)
    value = sobolev_norm_grid(dilate(f, sigma), order)
    lower, upper = scaling_bounds(norm, sigma, order, d=f.dim)
    return lower * (1.0 - SCALING_SLACK), value, upper * (1.0 + SCALING_SLACK)
