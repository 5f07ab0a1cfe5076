"""
PSWF core module for the reconstruction toolkit.

This module handles:
- Computing the prolate spheroidal wave functions psi_{n,c} of bandwidth c
- The spectral quantities chi_{n,c} (differential operator), lambda_{n,c}
  (sinc-kernel operator) and mu_{n,c} (finite Fourier operator F_c)
- The Gauss-Legendre quadrature used for every inner product on [-1, 1]

The PSWFs are expanded in orthonormal Legendre polynomials. In that basis
the differential operator L_c is pentadiagonal, coupling degrees k and k+2,
so it splits into an even and an odd symmetric tridiagonal block which are
solved with scipy's tridiagonal eigensolver.
"""

import logging
import math
from dataclasses import dataclass
from typing import Union

import numpy as np
import pandas as pd
from scipy.linalg import eigh_tridiagonal
from scipy.special import spherical_jn
from sklearn.linear_model import LinearRegression

from .config import (
    LAMBDA_FLOOR,
    LEGENDRE_PAD,
    QUADRATURE_PAD,
    TAIL_TOLERANCE,
    TAIL_WIDTH,
    MU_DENOMINATOR_FLOOR,
)

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

# i**k for k mod 4
_I_POWERS = np.array([1.0, 1.0j, -1.0, -1.0j])


# ============================================================================
# Errors
# ============================================================================

class NumericalFailure(RuntimeError):
    """A numerical step did not reach the accuracy it promises."""


class CertifiedRangeError(ValueError):
    """A mode index beyond the eigenpairs certified by the lambda floor."""


# ============================================================================
# Domain Types
# ============================================================================

def as_bandwidth(c: float) -> float:
    """
    Validate a bandwidth c = r * sigma.

    Raises:
        ValueError: If c is not a finite positive number.
    """
    try:
        value = float(c)
    except (TypeError, ValueError):
        raise ValueError(f"Bandwidth c must be a real number, got {c!r}")
    if not math.isfinite(value) or value <= 0.0:
        raise ValueError(f"Bandwidth c must be finite and > 0, got {c}")
    return value


@dataclass(frozen=True)
class PswfBasis:
    """
    Precomputed PSWF system for a fixed bandwidth c.

    Attributes:
        c: Bandwidth.
        n_max: Highest index with a certified eigenpair.
        n_requested: Index the caller asked for; n_max < n_requested means
            the basis was cut by the lambda floor.
        lambda_floor: Smallest lambda accepted as certified.
        legendre_coeffs: (n_max+1, N_leg) coefficients in orthonormal Legendre
            polynomials, one unit row per psi_n.
        chi: Eigenvalues of L_c.
        lam: Eigenvalues of the sinc-kernel operator Q_c.
        mu: Complex eigenvalues of F_c.
        nodes, weights: Gauss-Legendre rule on [-1, 1].
        psi_nodes: (n_max+1, K) values of psi_n at the nodes.
    """
    c: float
    n_max: int
    n_requested: int
    lambda_floor: float
    legendre_coeffs: np.ndarray
    chi: np.ndarray
    lam: np.ndarray
    mu: np.ndarray
    nodes: np.ndarray
    weights: np.ndarray
    psi_nodes: np.ndarray

    @property
    def truncated(self) -> bool:
        return self.n_max < self.n_requested

    @property
    def degree(self) -> int:
        """Number of Legendre coefficients per row (N_leg)."""
        return self.legendre_coeffs.shape[1]

    @property
    def n_nodes(self) -> int:
        return self.nodes.size

    def check_index(self, n: int) -> int:
        """
        Validate a mode index against the certified range.

        Raises:
            CertifiedRangeError: If n is negative or above n_max.
        """
        n = int(n)
        if n < 0:
            raise CertifiedRangeError(f"Mode index must be >= 0, got {n}")
        if n > self.n_max:
            raise CertifiedRangeError(
                f"Mode index {n} exceeds n_max={self.n_max} certified for c={self.c} "
                f"(lambda floor {self.lambda_floor:g})"
            )
        return n


# ============================================================================
# Legendre Machinery
# ============================================================================

def legendre_matrix(x: ArrayLike, degree: int) -> np.ndarray:
    """
    Orthonormal Legendre polynomials sqrt(k + 1/2) P_k(x) for k = 0..degree.

    Args:
        x: Points in [-1, 1].
        degree: Highest polynomial degree.

    Returns:
        Array of shape (degree + 1, len(x)).
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    values = np.empty((degree + 1, x.size))
    values[0] = 1.0
    if degree >= 1:
        values[1] = x
    for k in range(1, degree):
        values[k + 1] = ((2 * k + 1) * x * values[k] - k * values[k - 1]) / (k + 1)
    scale = np.sqrt(np.arange(degree + 1) + 0.5)
    return values * scale[:, None]


def _galerkin_block(c: float, degrees: np.ndarray):
    """
    Diagonal and off-diagonal of L_c restricted to one parity.

    Args:
        c: Bandwidth.
        degrees: Legendre degrees of a single parity, ascending by 2.

    Returns:
        Tuple (diagonal, off_diagonal) for eigh_tridiagonal.
    """
    k = degrees.astype(float)
    c2 = c * c
    diagonal = k * (k + 1) + c2 * (2 * k * (k + 1) - 1) / ((2 * k + 3) * (2 * k - 1))
    kk = k[:-1]
    off_diagonal = c2 * (kk + 2) * (kk + 1) / ((2 * kk + 3) * np.sqrt((2 * kk + 1) * (2 * kk + 5)))
    return diagonal, off_diagonal


def _solve_parity(c: float, n_legendre: int, parity: int, count: int):
    """Lowest `count` eigenpairs of the parity block, coefficients padded to n_legendre."""
    degrees = np.arange(parity, n_legendre, 2)
    if count <= 0:
        return np.empty(0), np.empty((0, n_legendre))
    diagonal, off_diagonal = _galerkin_block(c, degrees)
    values, vectors = eigh_tridiagonal(
        diagonal, off_diagonal, select="i", select_range=(0, count - 1)
    )
    coeffs = np.zeros((count, n_legendre))
    coeffs[:, degrees] = vectors.T
    return values, coeffs


def _legendre_eigensystem(c: float, n_request: int, n_legendre: int):
    """chi_0..chi_{n_request} and their Legendre coefficient rows (sign-fixed)."""
    n_even = n_request // 2 + 1
    n_odd = (n_request + 1) // 2
    chi_even, coeffs_even = _solve_parity(c, n_legendre, 0, n_even)
    chi_odd, coeffs_odd = _solve_parity(c, n_legendre, 1, n_odd)

    chi = np.empty(n_request + 1)
    coeffs = np.empty((n_request + 1, n_legendre))
    chi[0::2], coeffs[0::2] = chi_even, coeffs_even
    chi[1::2], coeffs[1::2] = chi_odd, coeffs_odd

    # Degree-n coefficient of row n is positive
    diag = coeffs[np.arange(n_request + 1), np.arange(n_request + 1)]
    signs = np.where(diag < 0.0, -1.0, 1.0)
    coeffs *= signs[:, None]
    return chi, coeffs


def _tail_ok(row: np.ndarray) -> bool:
    return float(np.max(np.abs(row[-TAIL_WIDTH:]))) < TAIL_TOLERANCE


# ============================================================================
# Spectral Quantities
# ============================================================================

def fourier_legendre_moments(c: float, x: float, degree: int) -> np.ndarray:
    """
    Integrals of exp(i c x y) against orthonormal Legendre polynomials.

    Uses the identity int_{-1}^{1} exp(i w y) P_k(y) dy = 2 i^k j_k(w).

    Returns:
        Complex array of length degree + 1.
    """
    k = np.arange(degree + 1)
    return 2.0 * _I_POWERS[k % 4] * spherical_jn(k, c * x) * np.sqrt(k + 0.5)


def compute_mu(
    c: float,
    coeffs_row: np.ndarray,
    nodes: np.ndarray,
    psi_row_nodes: np.ndarray,
) -> complex:
    """
    Eigenvalue mu_{n,c} of F_c from the eigen-relation at the largest node value.

    mu = F_c[psi_n](x*) / psi_n(x*) with x* = argmax over nodes of |psi_n|.

    Raises:
        NumericalFailure: If |psi_n(x*)| is degenerate.
    """
    i_star = int(np.argmax(np.abs(psi_row_nodes)))
    x_star = float(nodes[i_star])
    denominator = float(psi_row_nodes[i_star])
    if abs(denominator) < MU_DENOMINATOR_FLOOR:
        raise NumericalFailure(
            f"Degenerate mu denominator |psi(x*)|={abs(denominator):.3e} at x*={x_star:.6f}"
        )
    moments = fourier_legendre_moments(c, x_star, coeffs_row.size - 1)
    return complex(np.dot(coeffs_row, moments) / denominator)


# ============================================================================
# Basis Construction
# ============================================================================

def build_basis(
    c: float,
    n_request: int,
    lambda_floor: float = LAMBDA_FLOOR,
) -> PswfBasis:
    """
    Compute the PSWF basis psi_{0..n_max, c}.

    Args:
        c: Bandwidth (> 0).
        n_request: Highest index wanted (>= 0).
        lambda_floor: Eigenpairs with lambda below this are not certified.

    Returns:
        PswfBasis with n_max = min(n_request, largest n with lambda_n >= floor).
        A truncated basis (n_max < n_request) is returned, not raised, and
        logged as a warning.

    Raises:
        ValueError: On invalid parameters.
        CertifiedRangeError: If even lambda_0 is below the floor.
        NumericalFailure: If the Legendre tail check fails after doubling N_leg.
    """
    c = as_bandwidth(c)
    n_request = int(n_request)
    if n_request < 0:
        raise ValueError(f"n_request must be >= 0, got {n_request}")
    if not 0.0 < lambda_floor < 1.0:
        raise ValueError(f"lambda_floor must lie in (0, 1), got {lambda_floor}")

    n_legendre = 2 * n_request + math.ceil(c) + LEGENDRE_PAD
    chi, coeffs = _legendre_eigensystem(c, n_request, n_legendre)
    if not _tail_ok(coeffs[-1]):
        logger.debug(f"Legendre tail check failed at N_leg={n_legendre}, doubling")
        n_legendre *= 2
        chi, coeffs = _legendre_eigensystem(c, n_request, n_legendre)
        if not _tail_ok(coeffs[-1]):
            raise NumericalFailure(
                f"Legendre coefficients of psi_{n_request} did not decay below "
                f"{TAIL_TOLERANCE:g} with N_leg={n_legendre} (c={c})"
            )

    n_nodes = n_legendre + math.ceil(c) + QUADRATURE_PAD
    nodes, weights = np.polynomial.legendre.leggauss(n_nodes)
    psi_nodes = coeffs @ legendre_matrix(nodes, n_legendre - 1)

    mu = np.array([
        compute_mu(c, coeffs[n], nodes, psi_nodes[n]) for n in range(n_request + 1)
    ])
    # lambda <= 1; near the top of the spectrum it rounds to exactly 1
    lam = np.minimum(c / (2.0 * math.pi) * np.abs(mu) ** 2, 1.0)

    certified = np.nonzero(lam >= lambda_floor)[0]
    if certified.size == 0 or certified[0] != 0:
        raise CertifiedRangeError(
            f"lambda_0={lam[0]:.3e} is below the floor {lambda_floor:g} for c={c}"
        )
    # lambda is decreasing; the first gap ends the certified range
    gaps = np.nonzero(lam < lambda_floor)[0]
    n_max = int(gaps[0] - 1) if gaps.size else n_request

    if n_max < n_request:
        logger.warning(
            f"PSWF basis for c={c} truncated at n_max={n_max} < {n_request} "
            f"(lambda floor {lambda_floor:g})"
        )

    keep = slice(0, n_max + 1)
    arrays = {
        "legendre_coeffs": coeffs[keep],
        "chi": chi[keep],
        "lam": lam[keep],
        "mu": mu[keep],
        "nodes": nodes,
        "weights": weights,
        "psi_nodes": psi_nodes[keep],
    }
    for value in arrays.values():
        value.setflags(write=False)

    logger.info(
        f"Built PSWF basis: c={c}, n_max={n_max}, N_leg={n_legendre}, K={n_nodes}"
    )
    return PswfBasis(
        c=c,
        n_max=n_max,
        n_requested=n_request,
        lambda_floor=float(lambda_floor),
        **arrays,
    )


# ============================================================================
# Evaluation and Inner Products
# ============================================================================

def _check_interval(x: np.ndarray) -> None:
    if not np.all(np.isfinite(x)) or np.any(np.abs(x) > 1.0):
        raise ValueError("Evaluation points must lie in [-1, 1]")


def eval_psi(basis: PswfBasis, n: int, x: ArrayLike) -> ArrayLike:
    """
    Evaluate psi_{n,c}(x) by the Legendre recurrence summed against row n.

    Args:
        basis: PSWF basis.
        n: Mode index, 0 <= n <= n_max.
        x: Scalar or array of points in [-1, 1].

    Returns:
        Float for scalar x, array otherwise.
    """
    n = basis.check_index(n)
    points = np.asarray(x, dtype=float)
    _check_interval(points)
    values = basis.legendre_coeffs[n] @ legendre_matrix(points.ravel(), basis.degree - 1)
    if points.ndim == 0:
        return float(values[0])
    return values.reshape(points.shape)


def psi_matrix(basis: PswfBasis, x: ArrayLike, n: int = None) -> np.ndarray:
    """Values psi_{0..n}(x) as an array of shape (n + 1, len(x))."""
    n = basis.n_max if n is None else basis.check_index(n)
    points = np.atleast_1d(np.asarray(x, dtype=float))
    _check_interval(points)
    return basis.legendre_coeffs[: n + 1] @ legendre_matrix(points, basis.degree - 1)


def _check_samples(basis: PswfBasis, samples) -> np.ndarray:
    samples = np.asarray(samples)
    if samples.shape[0] != basis.n_nodes:
        raise ValueError(
            f"Expected {basis.n_nodes} samples at the quadrature nodes, got {samples.shape[0]}"
        )
    return samples


def inner_product(basis: PswfBasis, f_samples, n: int):
    """
    Coefficient f_hat_{n,c} = int psi_{n,c}(y) f(y) dy by the stored Gauss rule.

    Args:
        basis: PSWF basis.
        f_samples: Values of f at basis.nodes (real or complex).
        n: Mode index.

    Returns:
        Float for real samples, complex otherwise.
    """
    n = basis.check_index(n)
    samples = _check_samples(basis, f_samples)
    value = np.dot(basis.weights * basis.psi_nodes[n], samples)
    if np.iscomplexobj(samples):
        return complex(value)
    return float(value)


def gram_matrix(basis: PswfBasis) -> np.ndarray:
    """Gram matrix of psi_0..psi_{n_max} under the stored quadrature."""
    return (basis.psi_nodes * basis.weights) @ basis.psi_nodes.T


def eigen_residuals(basis: PswfBasis) -> np.ndarray:
    """
    Relative eigen-relation residuals max_i |F_c[psi_n](x_i) - mu_n psi_n(x_i)| / |mu_n|.

    F_c is applied by quadrature on the basis nodes.
    """
    kernel = np.exp(1j * basis.c * np.outer(basis.nodes, basis.nodes))
    applied = kernel @ (basis.weights[:, None] * basis.psi_nodes.T)
    residual = np.abs(applied - basis.psi_nodes.T * basis.mu[None, :]).max(axis=0)
    return residual / np.abs(basis.mu)


def eigen_residual(basis: PswfBasis, n: int) -> float:
    """Relative eigen-relation residual of a single mode."""
    n = basis.check_index(n)
    kernel = np.exp(1j * basis.c * np.outer(basis.nodes, basis.nodes))
    applied = kernel @ (basis.weights * basis.psi_nodes[n])
    residual = np.max(np.abs(applied - basis.mu[n] * basis.psi_nodes[n]))
    return float(residual / abs(basis.mu[n]))


def count_concentrated(basis: PswfBasis, level: float = 0.5) -> int:
    """
    Number of modes with lambda_n >= level.

    Raises:
        ValueError: If the basis stops before lambda drops below the level.
    """
    if basis.lam[-1] >= level:
        raise ValueError(
            f"Basis ends at n_max={basis.n_max} with lambda={basis.lam[-1]:.3f} >= {level}; "
            f"request more modes"
        )
    return int(np.count_nonzero(basis.lam >= level))


@dataclass(frozen=True)
class DecayFit:
    """Linear fit of log lambda_n against -2 n~ (log n~ - kappa)."""
    slope: float
    intercept: float
    n_values: np.ndarray


def decay_law_fit(basis: PswfBasis, lambda_min: float = 1e-13) -> DecayFit:
    """
    Regress log lambda_n on -2 n~ (log n~ - kappa) with n~ = n + 1/2 and
    kappa = log(e c / 4), over n >= max(3, 2c/pi) and lambda_n >= lambda_min.

    Raises:
        ValueError: If fewer than two modes fall in the range.
    """
    n = np.arange(basis.n_max + 1)
    mask = (n >= max(3.0, 2.0 * basis.c / math.pi)) & (basis.lam >= lambda_min)
    if np.count_nonzero(mask) < 2:
        raise ValueError(f"Not enough modes in the decay range for c={basis.c}")
    n_tilde = n[mask] + 0.5
    kappa = math.log(math.e * basis.c / 4.0)
    regressor = (-2.0 * n_tilde * (np.log(n_tilde) - kappa)).reshape(-1, 1)
    model = LinearRegression().fit(regressor, np.log(basis.lam[mask]))
    return DecayFit(
        slope=float(model.coef_[0]),
        intercept=float(model.intercept_),
        n_values=n[mask],
    )


def spectral_table(basis: PswfBasis):
    """
    Per-mode table with columns n, chi, lambda, abs_mu, arg_mu.

    Returns:
        pandas DataFrame.
    """
    return pd.DataFrame({
        "n": np.arange(basis.n_max + 1),
        "chi": basis.chi,
        "lambda": basis.lam,
        "abs_mu": np.abs(basis.mu),
        "arg_mu": np.angle(basis.mu),
    })
