"""
1D operator layer on top of the PSWF basis.

This module handles:
- Applying the finite Fourier operator F_c by quadrature
- Projection onto the first PSWFs and synthesis from coefficients
- The truncated SVD inverse F^{-1}_{n,c}
- The explicit truncation rule n*(c, alpha, delta) and its tau equation
- Norms and bounds used to check the regularized estimates

Functions on [-1, 1] are carried as samples at the basis quadrature nodes
for analysis, and evaluated on caller-chosen grids for output. All data may
be complex; the PSWFs are real.
"""

import logging
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.optimize import brentq

from .config import DEFAULT_BETA, DEFAULT_MU, TAU_MAX_ITER, TAU_TOLERANCE
from .pswf_core import CertifiedRangeError, PswfBasis, as_bandwidth, psi_matrix

logger = logging.getLogger(__name__)


# ============================================================================
# Domain Types
# ============================================================================

@dataclass(frozen=True)
class Coefficients:
    """PSWF coefficients f_hat_{0..n, c} of a function on [-1, 1]."""
    c: float
    values: np.ndarray

    @property
    def n(self) -> int:
        return self.values.shape[0] - 1


@dataclass(frozen=True)
class RegParams:
    """
    Regularization and stability parameters.

    Attributes:
        alpha: Exponent in (0, 1) of the truncation rule.
        delta: Relative noise level in (0, 1).
        noise_scale_N: A priori bound N on the data norm; 0 marks exact data.
        c: Bandwidth the rule was evaluated for.
        rho: (4 / (e c)) alpha log(1 / delta).
        tau: Solution of tau log tau = rho.
        n_star: floor(3 + tau e c / 4).
        beta: Hoelder exponent of the stability model, in (0, 1 - alpha).
        mu: Logarithmic exponent of the stability model.
    """
    alpha: float
    delta: float
    noise_scale_N: float
    c: float
    rho: float
    tau: float
    n_star: int
    beta: float = DEFAULT_BETA
    mu: float = DEFAULT_MU

    @property
    def noise_level(self) -> float:
        """Absolute noise level delta * N."""
        return self.delta * self.noise_scale_N


@dataclass(frozen=True)
class HTildeNorm:
    """Spectral Sobolev-type norm with the number of terms it was summed over."""
    value: float
    n_terms: int
    truncated: bool


# ============================================================================
# Helpers
# ============================================================================

def _weighted(basis: PswfBasis, samples) -> np.ndarray:
    """Samples times quadrature weights, broadcasting along extra columns."""
    samples = np.asarray(samples)
    if samples.shape[0] != basis.n_nodes:
        raise ValueError(
            f"Expected {basis.n_nodes} samples at the quadrature nodes, got {samples.shape[0]}"
        )
    shape = (-1,) + (1,) * (samples.ndim - 1)
    return samples * basis.weights.reshape(shape)


def _check_grid(x) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if not np.all(np.isfinite(x)) or np.any(np.abs(x) > 1.0):
        raise ValueError("Evaluation grid must lie in [-1, 1]")
    return x


def _check_unit_interval(name: str, value: float) -> float:
    value = float(value)
    if not 0.0 < value < 1.0:
        raise ValueError(f"{name} must lie in (0, 1), got {value}")
    return value


# ============================================================================
# Operators
# ============================================================================

def apply_Fc(basis: PswfBasis, f_samples, x) -> np.ndarray:
    """
    Finite Fourier operator g(x) = int_{-1}^{1} exp(i c x y) f(y) dy.

    Args:
        basis: PSWF basis supplying c and the quadrature.
        f_samples: f at basis.nodes; extra trailing axes are transformed
            column by column.
        x: Evaluation grid in [-1, 1].

    Returns:
        Complex array with len(x) rows.
    """
    x = _check_grid(x)
    kernel = np.exp(1j * basis.c * np.outer(x, basis.nodes))
    return kernel @ _weighted(basis, f_samples)


def project(basis: PswfBasis, f_samples, n: int) -> Coefficients:
    """
    PSWF coefficients f_hat_{0..n, c} of f by the stored Gauss rule.

    Raises:
        CertifiedRangeError: If n is outside 0..n_max.
    """
    n = basis.check_index(n)
    values = basis.psi_nodes[: n + 1] @ _weighted(basis, f_samples)
    return Coefficients(c=basis.c, values=values.astype(complex))


def synthesize(basis: PswfBasis, coeffs: Coefficients, y=None) -> np.ndarray:
    """
    Evaluate sum_j f_hat_j psi_j on a grid.

    Args:
        basis: PSWF basis.
        coeffs: Coefficients from project or truncated inversion.
        y: Grid in [-1, 1]; defaults to the quadrature nodes.
    """
    if coeffs.c != basis.c:
        raise ValueError(f"Coefficients for c={coeffs.c} do not match basis c={basis.c}")
    n = basis.check_index(coeffs.n)
    if y is None:
        values = basis.psi_nodes[: n + 1]
    else:
        values = psi_matrix(basis, _check_grid(y), n)
    return values.T @ coeffs.values


def inverse_coefficients(basis: PswfBasis, w_samples, n: int) -> Coefficients:
    """Coefficients <psi_j, w> / mu_j, j = 0..n, of F^{-1}_{n,c}[w]."""
    n = basis.check_index(n)
    moments = basis.psi_nodes[: n + 1] @ _weighted(basis, w_samples)
    shape = (-1,) + (1,) * (moments.ndim - 1)
    return Coefficients(c=basis.c, values=moments / basis.mu[: n + 1].reshape(shape))


def truncated_inverse(basis: PswfBasis, w_samples, n: int, y=None) -> np.ndarray:
    """
    Truncated SVD inverse F^{-1}_{n,c}[w](y) = sum_{j<=n} psi_j(y) <psi_j, w> / mu_j.

    Args:
        basis: PSWF basis.
        w_samples: Data at basis.nodes; a 2D array inverts each column.
        n: Truncation index.
        y: Output grid in [-1, 1]; defaults to the quadrature nodes.

    Returns:
        Complex samples on y.

    Raises:
        CertifiedRangeError: If n exceeds the modes certified by the lambda floor.
    """
    coeffs = inverse_coefficients(basis, w_samples, n)
    if y is None:
        return basis.psi_nodes[: coeffs.n + 1].T @ coeffs.values
    return psi_matrix(basis, _check_grid(y), coeffs.n).T @ coeffs.values


def l2_norm(basis: PswfBasis, samples) -> float:
    """L2([-1, 1]) norm of nodal samples by the basis quadrature."""
    weighted = _weighted(basis, np.abs(np.asarray(samples)) ** 2)
    return float(np.sqrt(np.sum(weighted)))


def projection_error(basis: PswfBasis, f_samples, n: int) -> float:
    """||f - pi_n f||_{L2} with f and pi_n f compared at the quadrature nodes."""
    f_samples = np.asarray(f_samples)
    approximation = synthesize(basis, project(basis, f_samples, n))
    return l2_norm(basis, f_samples - approximation)


# ============================================================================
# Truncation Rule
# ============================================================================

def tau_bracket(rho: float) -> Tuple[float, float]:
    """Interval [max(1, rho / log(1 + rho)), 1 + rho] containing tau."""
    return max(1.0, rho / math.log1p(rho)), 1.0 + rho


def solve_tau(rho: float) -> float:
    """
    Unique tau > 1 with tau log tau = rho.

    Newton iteration from the bracket midpoint, falling back to brentq when
    a step leaves the bracket or the iteration cap is hit.

    Raises:
        ValueError: If rho <= 0.
    """
    rho = float(rho)
    if not math.isfinite(rho) or rho <= 0.0:
        raise ValueError(f"rho must be finite and > 0, got {rho}")

    lower, upper = tau_bracket(rho)
    tau = 0.5 * (lower + upper)
    converged = False
    for iteration in range(TAU_MAX_ITER):
        residual = tau * math.log(tau) - rho
        if abs(residual) <= TAU_TOLERANCE:
            converged = True
            break
        step = residual / (math.log(tau) + 1.0)
        candidate = tau - step
        if not lower <= candidate <= upper:
            logger.debug(f"Newton step left the tau bracket at iteration {iteration}")
            break
        if candidate == tau:
            converged = True
            break
        tau = candidate

    if not converged:
        tau = brentq(lambda t: t * math.log(t) - rho, lower, upper, xtol=1e-15)

    return min(max(tau, lower), upper)


def n_star(
    c: float,
    alpha: float,
    delta: float,
    noise_scale_N: float = 1.0,
    beta: float = DEFAULT_BETA,
    mu: float = DEFAULT_MU,
) -> RegParams:
    """
    Explicit truncation index n* = floor(3 + tau e c / 4).

    Args:
        c: Bandwidth.
        alpha: Exponent in (0, 1).
        delta: Noise level in (0, 1).
        noise_scale_N: A priori bound N (>= 0).
        beta, mu: Stability-model exponents carried along for sweeps.

    Returns:
        RegParams with rho, tau and n_star filled in.
    """
    c = as_bandwidth(c)
    alpha = _check_unit_interval("alpha", alpha)
    delta = _check_unit_interval("delta", delta)
    if noise_scale_N < 0.0:
        raise ValueError(f"noise_scale_N must be >= 0, got {noise_scale_N}")

    rho = 4.0 / (math.e * c) * alpha * math.log(1.0 / delta)
    tau = solve_tau(rho)
    index = int(math.floor(3.0 + tau * math.e * c / 4.0))
    logger.debug(f"n* rule: c={c}, alpha={alpha}, delta={delta:g} -> rho={rho:.6g}, tau={tau:.6g}, n*={index}")
    return RegParams(
        alpha=alpha,
        delta=delta,
        noise_scale_N=float(noise_scale_N),
        c=c,
        rho=rho,
        tau=tau,
        n_star=index,
        beta=float(beta),
        mu=float(mu),
    )


# ============================================================================
# Bounds and Norms
# ============================================================================

def lemma13_bound(basis: PswfBasis, n: int, delta: float, proj_err: float) -> float:
    """
    Error-split bound delta / |mu_n| + ||f - pi_n f|| for the truncated inverse.

    Args:
        basis: PSWF basis.
        n: Truncation index.
        delta: L2 norm of the data perturbation.
        proj_err: Projection error of the target at n.
    """
    n = basis.check_index(n)
    if delta < 0.0 or proj_err < 0.0:
        raise ValueError("delta and proj_err must be >= 0")
    return float(delta / abs(basis.mu[n]) + proj_err)


def htilde_norm(basis: PswfBasis, coeffs: Coefficients, nu: float) -> HTildeNorm:
    """
    Spectral norm (sum_n chi_n^nu |f_hat_n|^2)^{1/2} over the available modes.

    The result is marked truncated when the basis itself was cut by the
    lambda floor, so the sum misses modes of the full series.
    """
    if nu < 0.0:
        raise ValueError(f"nu must be >= 0, got {nu}")
    n = basis.check_index(coeffs.n)
    weights = basis.chi[: n + 1] ** nu
    value = math.sqrt(float(np.sum(weights * np.abs(coeffs.values) ** 2)))
    return HTildeNorm(value=value, n_terms=n + 1, truncated=basis.truncated)


def htilde_tail(basis: PswfBasis, coeffs: Coefficients, n: int, nu: float = 0.0) -> float:
    """
    Norm of the modes above n, i.e. ||f - pi_n f|| measured in the spectral norm.

    Only modes up to coeffs.n are known, so n must lie below coeffs.n.
    """
    if nu < 0.0:
        raise ValueError(f"nu must be >= 0, got {nu}")
    top = basis.check_index(coeffs.n)
    if n >= top:
        raise CertifiedRangeError(f"Tail above n={n} is unknown: coefficients stop at n={top}")
    tail = slice(n + 1, top + 1)
    return math.sqrt(float(np.sum(basis.chi[tail] ** nu * np.abs(coeffs.values[tail]) ** 2)))


def lemma52_sides(c: float, alpha: float, delta: float, q: float) -> Tuple[float, float]:
    """
    Logarithms of both sides of exp(eta (log eta - kappa)) <= (4 eta / c)^q delta^{-alpha}.

    eta = q + tau e c / 4 and kappa = log(e c / 4).

    Returns:
        Tuple (log_lhs, log_rhs).
    """
    if q < 0.0:
        raise ValueError(f"q must be >= 0, got {q}")
    params = n_star(c, alpha, delta)
    eta = q + params.tau * math.e * params.c / 4.0
    kappa = math.log(math.e * params.c / 4.0)
    log_lhs = eta * (math.log(eta) - kappa)
    log_rhs = q * math.log(4.0 * eta / params.c) + params.alpha * math.log(1.0 / params.delta)
    return log_lhs, log_rhs


def noise_bound_ratio(basis: PswfBasis, params: RegParams) -> float:
    """
    (delta / |mu_{n*}|) / delta^{1 - alpha}.

    Stays bounded as delta -> 0 when n* follows the truncation rule, which is
    the noise half of the regularized estimate.
    """
    n = basis.check_index(params.n_star)
    return float(params.delta / abs(basis.mu[n]) / params.delta ** (1.0 - params.alpha))


def clamp_n_star(basis: PswfBasis, params: RegParams) -> Tuple[int, bool]:
    """
    n* limited to the certified range.

    Returns:
        Tuple (n_used, clamped).
    """
    if params.n_star > basis.n_max:
        logger.warning(
            f"n*={params.n_star} exceeds n_max={basis.n_max} for c={basis.c}; "
            f"clamping (lambda floor {basis.lambda_floor:g})"
        )
        return basis.n_max, True
    return params.n_star, False
