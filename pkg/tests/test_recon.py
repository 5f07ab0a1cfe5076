"""
Tests for the reconstruction pipelines.

Tests cover:
- Fourier data sampling and the data norm
- Calibrated noise injection
- Exact and regularized 1D reconstruction
- Per-angle consistency and the scaling identity in 2D
- Error metrics, reconstruction differences and the stability fit
- Stability sweeps (1D fast, 2D marked slow)
"""

import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from pswf_recon.bandlimit1d import n_star
from pswf_recon.phantoms import Disk, Hat, evaluate, fourier
from pswf_recon.pswf_core import build_basis, eval_psi, psi_matrix
from pswf_recon.radon2d import GridFunction2D, inverse_radon, offset_grid, sobolev_norm_grid
from pswf_recon.recon import (
    FourierData,
    Reconstruction,
    error_metric,
    fit_stability_model,
    make_noisy,
    norm_r,
    projection_error_bound,
    reconstruct_exact_1d,
    reconstruct_regularized,
    reconstruction_difference,
    sample_fourier_data,
    sinogram_from_data,
    stability_sweep,
)
from oracles import chord_coefficients, piecewise_gauss_rule, polar_data_norm

HAT = Hat(center=0.0, halfwidth=0.5)


@pytest.fixture(scope="module")
def basis20():
    """c = 20 basis certified through n = 25."""
    return build_basis(20.0, 30, lambda_floor=1e-16)


@pytest.fixture(scope="module")
def basis10():
    """c = 10 basis."""
    return build_basis(10.0, 30)


@pytest.fixture(scope="module")
def disk_sweep():
    """2D disk sweep at c = 15 over delta = 1e-1, 1e-2, 1e-3."""
    return stability_sweep(Disk(0.5), 15.0, 0.3, [1e-1, 1e-2, 1e-3], seeds=range(5),
                           n_angles=90, grid_size=256, n_offsets=256)


def hat_projection_error(basis, n, sigma=1.0):
    """||f - pi_n f|| on [-1, 1] for f(y) = hat(sigma y) by rules split at the kinks."""
    breaks = [-1.0, -0.5 / sigma, 0.0, 0.5 / sigma, 1.0]
    points, weights = piecewise_gauss_rule(breaks, 80)
    f_points = evaluate(HAT, sigma * points)
    coeffs = psi_matrix(basis, points, n) @ (weights * f_points)
    return math.sqrt(max(float(np.sum(weights * f_points ** 2)) - float(np.sum(coeffs ** 2)), 0.0))


class TestFourierData:
    """Test data sampling and the data norm."""

    def test_rejects_empty(self):
        """Test that an empty measurement grid is refused."""
        with pytest.raises(ValueError, match="non-empty"):
            FourierData(r=1.0, d=1, sigma=1.0, samples=np.zeros(0),
                        x_nodes=np.zeros(0), x_weights=np.zeros(0))

    def test_c_mismatch(self, basis10):
        """Test that r * sigma must equal the basis c."""
        with pytest.raises(ValueError, match="does not match"):
            sample_fourier_data(HAT, 5.0, 1.0, basis10)

    def test_support_outside_ball(self, basis10):
        """Test that a phantom reaching past B_sigma is refused."""
        with pytest.raises(ValueError, match="B_sigma"):
            sample_fourier_data(Hat(0.0, 1.0), 10.0, 1.0, basis10)

    def test_zero_norm(self, basis10):
        """Test norm_r of zero data."""
        data = FourierData(r=10.0, d=1, sigma=1.0, samples=np.zeros(basis10.n_nodes, dtype=complex),
                           x_nodes=basis10.nodes, x_weights=basis10.weights)
        assert norm_r(data) == 0.0

    def test_norm_1d_constant(self, basis10):
        """Test ||1||_r = sqrt(2r) on the line."""
        data = FourierData(r=10.0, d=1, sigma=1.0, samples=np.ones(basis10.n_nodes, dtype=complex),
                           x_nodes=basis10.nodes, x_weights=basis10.weights)
        assert norm_r(data) == pytest.approx(math.sqrt(20.0), rel=1e-12)

    def test_norm_2d_constant(self):
        """Test ||1||_r = sqrt(4 pi) at r = 2 in the plane."""
        basis = build_basis(2.0, 5)
        data = FourierData(r=2.0, d=2, sigma=1.0, samples=np.ones((basis.n_nodes, 12), dtype=complex),
                           x_nodes=basis.nodes, x_weights=basis.weights, angles=np.arange(12) * math.pi / 12)

        assert norm_r(data) == pytest.approx(math.sqrt(4 * math.pi), rel=1e-12)
        assert norm_r(data) == pytest.approx(polar_data_norm(1.0, 2.0), abs=1e-10)

    def test_2d_sample_points(self, basis10):
        """Test 2D samples sit at p = r x_i theta_k."""
        phantom = Disk(0.3, center=(0.2, 0.1))
        data = sample_fourier_data(phantom, 10.0, 1.0, basis10, n_angles=8)

        assert data.samples.shape == (basis10.n_nodes, 8)
        theta = np.array([math.cos(data.angles[3]), math.sin(data.angles[3])])
        expected = fourier(phantom, 10.0 * basis10.nodes[5] * theta)
        assert data.samples[5, 3] == pytest.approx(complex(expected))


class TestNoise:
    """Test calibrated noise."""

    def test_zero_level_returns_input(self, basis10):
        """Test delta * N = 0 leaves the data unchanged."""
        exact = sample_fourier_data(HAT, 10.0, 1.0, basis10)
        assert make_noisy(exact, 0.1, 0.0, seed=1) is exact

    @pytest.mark.parametrize("d", [1, 2])
    def test_exact_error_norm(self, basis10, d):
        """Test norm_r(w - v_hat) = delta * N for two seeds with different noise."""
        phantom = HAT if d == 1 else Disk(0.4)
        exact = sample_fourier_data(phantom, 10.0, 1.0, basis10, n_angles=12)
        first = make_noisy(exact, 1e-2, 3.0, seed=1)
        second = make_noisy(exact, 1e-2, 3.0, seed=2)

        for noisy in (first, second):
            difference = replace(exact, samples=noisy.samples - exact.samples)
            assert norm_r(difference) == pytest.approx(3e-2, rel=1e-12)
        assert not np.allclose(first.samples, second.samples)
        assert first.provenance == {"kind": "noisy", "seed": 1, "delta": 1e-2, "N": 3.0}

    def test_deterministic(self, basis10):
        """Test the same seed gives identical samples."""
        exact = sample_fourier_data(HAT, 10.0, 1.0, basis10)
        np.testing.assert_array_equal(make_noisy(exact, 1e-3, 1.0, 5).samples,
                                      make_noisy(exact, 1e-3, 1.0, 5).samples)

    def test_direction_independent_of_delta(self, basis10):
        """Test the noise for a seed only rescales with delta."""
        exact = sample_fourier_data(HAT, 10.0, 1.0, basis10)
        large = make_noisy(exact, 1e-2, 1.0, 4).samples - exact.samples
        small = make_noisy(exact, 1e-4, 1.0, 4).samples - exact.samples

        np.testing.assert_allclose(small * 100.0, large, rtol=1e-10, atol=1e-16)

    def test_rejects_negative(self, basis10):
        """Test that negative levels are refused."""
        exact = sample_fourier_data(HAT, 10.0, 1.0, basis10)
        with pytest.raises(ValueError):
            make_noisy(exact, -1.0, 1.0, 0)


class TestExactReconstruction1D:
    """Test the exact 1D pipeline."""

    def test_recovers_mode(self, basis10):
        """Test a single PSWF is recovered at sigma = 2."""
        sigma = 2.0
        data_basis = basis10
        # v(q) = psi_3(q / sigma) has v_hat(p) = sigma / (2 pi) F_c[psi_3](p / r)
        r = 10.0 / sigma
        samples = sigma / (2 * math.pi) * data_basis.mu[3] * data_basis.psi_nodes[3]
        data = FourierData(r=r, d=1, sigma=sigma, samples=samples.astype(complex),
                           x_nodes=data_basis.nodes, x_weights=data_basis.weights)
        result = reconstruct_exact_1d(data, data_basis, 10)

        np.testing.assert_allclose(result.values, data_basis.psi_nodes[3], atol=1e-7)
        np.testing.assert_allclose(result.q, sigma * data_basis.nodes)

    def test_hat_error(self, basis20):
        """Test the hat at c = 20, n = 25: small error, close to the projection error."""
        data = sample_fourier_data(HAT, 20.0, 1.0, basis20)
        result = reconstruct_exact_1d(data, basis20, 25)
        metric = error_metric(HAT, result)

        assert metric.relative <= 2e-2
        assert metric.value == pytest.approx(hat_projection_error(basis20, 25), rel=0.1)

    def test_zero_data(self, basis10):
        """Test that zero data reconstructs to zero."""
        data = FourierData(r=10.0, d=1, sigma=1.0, samples=np.zeros(basis10.n_nodes, dtype=complex),
                           x_nodes=basis10.nodes, x_weights=basis10.weights)
        assert np.all(reconstruct_exact_1d(data, basis10, 5).values == 0.0)

    def test_output_grid(self, basis10):
        """Test reconstruction on a caller grid carries trapezoid weights in q."""
        data = sample_fourier_data(HAT, 10.0, 1.0, basis10)
        y = np.linspace(-1.0, 1.0, 101)
        result = reconstruct_exact_1d(data, basis10, 10, y=y)

        assert result.values.shape == (101,)
        assert result.q_weights.sum() == pytest.approx(2.0)

    def test_rejects_2d(self, basis10):
        """Test that 2D data is refused."""
        data = sample_fourier_data(Disk(0.4), 10.0, 1.0, basis10, n_angles=8)
        with pytest.raises(ValueError, match="1D"):
            reconstruct_exact_1d(data, basis10, 5)


class TestRegularized:
    """Test the regularized pipelines."""

    def test_1d_uses_n_star(self, basis20):
        """Test the 1D regularized result equals the exact pipeline at n*."""
        data = sample_fourier_data(HAT, 20.0, 1.0, basis20)
        params = n_star(20.0, 0.5, 1e-3)
        result = reconstruct_regularized(data, basis20, params)
        reference = reconstruct_exact_1d(data, basis20, params.n_star)

        assert result.n_used == params.n_star
        assert not result.clamped
        np.testing.assert_array_equal(result.values, reference.values)

    def test_clamped(self):
        """Test n* above n_max is clamped and reported."""
        basis = build_basis(20.0, 40, lambda_floor=0.5)
        data = sample_fourier_data(HAT, 20.0, 1.0, basis)
        result = reconstruct_regularized(data, basis, n_star(20.0, 0.5, 1e-3))

        assert result.clamped
        assert result.n_used == basis.n_max

    def test_params_for_other_c(self, basis10):
        """Test that parameters computed for another c are refused."""
        data = sample_fourier_data(HAT, 10.0, 1.0, basis10)
        with pytest.raises(ValueError, match="RegParams"):
            reconstruct_regularized(data, basis10, n_star(12.0, 0.5, 1e-2))

    def test_2d_zero_data(self, basis10):
        """Test zero 2D data gives the zero grid."""
        data = sample_fourier_data(Disk(0.4), 10.0, 1.0, basis10, n_angles=8)
        zero = replace(data, samples=np.zeros_like(data.samples))
        result = reconstruct_regularized(zero, basis10, n_star(10.0, 0.5, 1e-2), grid_size=16, n_offsets=32)

        assert result.grid.extent == pytest.approx(2.0)
        assert np.all(result.grid.values == 0.0)

    def test_2d_rejects_nonuniform_angles(self, basis10):
        """Test that data angles must match the sinogram angles."""
        data = sample_fourier_data(Disk(0.4), 10.0, 1.0, basis10, n_angles=8)
        shifted = replace(data, angles=data.angles + 0.05)
        with pytest.raises(ValueError, match="angles"):
            sinogram_from_data(shifted, basis10, 5, 32)

    @pytest.mark.parametrize("sigma", [1.0, 2.0])
    def test_2d_column_consistency(self, sigma):
        """Test each sinogram column equals the truncated expansion of the scaled Radon profile."""
        c = 15.0
        basis = build_basis(c, 40)
        phantom = Disk(0.5 * sigma)
        data = sample_fourier_data(phantom, c / sigma, sigma, basis, n_angles=8)
        n = basis.n_max
        sinogram = sinogram_from_data(data, basis, n, 65)

        coeffs = np.array([
            chord_coefficients(lambda y, j=j: eval_psi(basis, j, y), 0.5 * sigma, scale=sigma)
            for j in range(n + 1)
        ])
        expected = psi_matrix(basis, offset_grid(65), n).T @ coeffs
        for k in range(8):
            np.testing.assert_allclose(sinogram.values[:, k], expected, atol=1e-5)

    def test_scaling_identity(self):
        """Test (2 pi / sigma)^2 v_hat(r x theta) = sigma^{-1} int exp(i c x y) R[v](sigma y, theta) dy."""
        sigma, c = 2.0, 12.0
        basis = build_basis(c, 20)
        phantom = Disk(0.6)
        data = sample_fourier_data(phantom, c / sigma, sigma, basis, n_angles=8)

        for i in (0, 17, basis.n_nodes // 2):
            x = basis.nodes[i]
            reference = chord_coefficients(lambda y: np.exp(1j * c * x * y), 0.6, scale=sigma)
            scaled = (2 * math.pi / sigma) ** 2 * data.samples[i, 0]
            assert abs(scaled - reference) <= 1e-8


class TestErrorMetric:
    """Test error metrics."""

    def test_1d_exact_values(self, basis10):
        """Test zero error for a reconstruction equal to the phantom."""
        q = basis10.nodes
        result = Reconstruction(d=1, sigma=1.0, n_used=0, clamped=False, q=q,
                                values=evaluate(HAT, q), q_weights=basis10.weights)
        metric = error_metric(HAT, result)

        assert metric.value == 0.0
        assert metric.norm == "L2"

    def test_projection_bound_1d(self, basis20):
        """Test the measured 1D error stays below the error-split bound."""
        data = sample_fourier_data(HAT, 20.0, 1.0, basis20)
        N = norm_r(data)
        for delta in (1e-2, 1e-3):
            noisy = make_noisy(data, delta, N, seed=0)
            result = reconstruct_exact_1d(noisy, basis20, 15)
            bound = projection_error_bound(HAT, basis20, data, 15, delta * N)
            assert error_metric(HAT, result).value <= bound * 1.01

    def test_difference_is_linear(self, basis20):
        """Test the reconstruction of w1 - w2 equals the difference of reconstructions."""
        first = sample_fourier_data(HAT, 20.0, 1.0, basis20)
        second = sample_fourier_data(Hat(0.1, 0.4), 20.0, 1.0, basis20)
        params = n_star(20.0, 0.5, 1e-3)

        report = reconstruction_difference(first, second, basis20, params)
        direct = (reconstruct_regularized(first, basis20, params).values
                  - reconstruct_regularized(second, basis20, params).values)

        np.testing.assert_allclose(report.reconstruction.values, direct, atol=1e-12)
        assert report.data_norm == pytest.approx(
            norm_r(replace(first, samples=first.samples - second.samples)))
        assert report.difference_norm > 0.0

    def test_difference_needs_same_grid(self, basis20, basis10):
        """Test that data on different grids is refused."""
        first = sample_fourier_data(HAT, 20.0, 1.0, basis20)
        second = sample_fourier_data(HAT, 10.0, 1.0, basis10)
        with pytest.raises(ValueError):
            reconstruction_difference(first, second, basis20, n_star(20.0, 0.5, 1e-3))


class TestStabilityFit:
    """Test the two-term stability model fit."""

    def test_recovers_coefficients(self):
        """Test exact synthetic errors are fitted with zero residual."""
        deltas = np.array([1e-1, 1e-2, 1e-3, 1e-4])
        errors = 2.0 * deltas ** 0.5 + 0.3 * np.log(1 / deltas) ** -0.5
        (c1, c2), rows, overall = fit_stability_model(deltas, errors, 0.5, 0.5)

        assert c1 == pytest.approx(2.0, rel=1e-6)
        assert c2 == pytest.approx(0.3, rel=1e-6)
        assert overall <= 1e-8
        assert rows.shape == (4,)

    def test_coefficients_non_negative(self):
        """Test the fit never returns negative constants."""
        deltas = np.array([1e-1, 1e-2, 1e-3])
        (c1, c2), _, _ = fit_stability_model(deltas, [0.1, 0.2, 0.3], 0.5, 0.5)
        assert c1 >= 0.0 and c2 >= 0.0


class TestStabilitySweep:
    """Test stability sweeps."""

    def test_1d_sweep(self):
        """Test a 1D hat sweep: table layout, monotone n* and errors."""
        result = stability_sweep(HAT, 20.0, 0.5, [1e-2, 1e-3, 1e-4], seeds=range(5), threads=1)
        table = result.table

        assert list(table.columns) == ["delta", "n_star", "n_used", "clamped", "mean_error",
                                       "lemma13_bound", "fit_residual"]
        assert len(result.entries) == 15
        assert table["n_star"].is_monotonic_increasing
        assert table["mean_error"].is_monotonic_decreasing
        assert result.config["seeds"] == [0, 1, 2, 3, 4]

    def test_sweep_independent_of_threads(self):
        """Test that concurrent jobs give the same table."""
        args = (HAT, 20.0, 0.5, [1e-2, 1e-3], [0, 1, 2])
        single = stability_sweep(*args, threads=1)
        multi = stability_sweep(*args, threads=4)

        pd.testing.assert_frame_equal(single.table, multi.table)
        pd.testing.assert_frame_equal(single.entries, multi.entries)

    def test_noiseless_entries(self, basis20):
        """Test N = 0 gives the pure projection error."""
        result = stability_sweep(HAT, 20.0, 0.5, [1e-3], seeds=[0], noise_scale_N=0.0, threads=1)
        n_used = int(result.table["n_used"].iloc[0])

        assert result.table["mean_error"].iloc[0] == pytest.approx(hat_projection_error(basis20, n_used), rel=0.1)

    def test_rejects_unordered_deltas(self):
        """Test that deltas must decrease."""
        with pytest.raises(ValueError, match="strictly decreasing"):
            stability_sweep(HAT, 20.0, 0.5, [1e-3, 1e-2], seeds=[0])

    def test_2d_jobs_run_angle_loop_single_threaded(self, mocker):
        """Test every 2D job inverts its sinogram with one thread, also when the sweep runs serially."""
        spy = mocker.patch("pswf_recon.recon.inverse_radon", wraps=inverse_radon)
        stability_sweep(Disk(0.5), 5.0, 0.3, [1e-1], seeds=[0, 1], n_angles=16,
                        grid_size=32, n_offsets=32, threads=1)

        assert spy.call_count == 2
        assert all(call.kwargs["threads"] == 1 for call in spy.call_args_list)

    @pytest.mark.slow
    def test_2d_disk_sweep(self, disk_sweep):
        """Test the 2D disk sweep: errors fall with delta and the model fits within 20%."""
        result = disk_sweep
        errors = result.table["mean_error"].tolist()

        assert errors[0] > errors[1] > errors[2]
        assert result.relative_residual <= 0.2

        entries = result.entries
        first = entries[(entries["seed"] == 0) & (entries["delta"] == 1e-1)]["error"].iloc[0]
        last = entries[(entries["seed"] == 0) & (entries["delta"] == 1e-3)]["error"].iloc[0]
        assert last < first

    @pytest.mark.slow
    def test_2d_difference_within_fitted_model(self, disk_sweep):
        """Test two nearby disks reconstruct within C1 delta^beta + C2 log(1/delta)^-mu."""
        config = disk_sweep.config
        N = config["noise_scale_N"]
        c1, c2 = disk_sweep.coefficients

        params = n_star(15.0, 0.3, 1e-3, 1.0, config["beta"], config["mu"])
        basis = build_basis(15.0, params.n_star)
        first = sample_fourier_data(Disk(0.5), 15.0, 1.0, basis, 90)
        second = sample_fourier_data(Disk(0.5, amplitude=0.999), 15.0, 1.0, basis, 90)

        report = reconstruction_difference(first, second, basis, params, grid_size=256, n_offsets=256)
        delta = report.data_norm / N
        assert delta == pytest.approx(1e-3, rel=1e-6)

        grid = report.reconstruction.grid
        mesh = grid.mesh()
        inside = np.hypot(mesh[..., 0], mesh[..., 1]) <= 1.0
        restricted = sobolev_norm_grid(
            GridFunction2D(extent=grid.extent, values=np.where(inside, grid.values, 0.0)), -0.5)
        model = c1 * delta ** config["beta"] + c2 * math.log(1.0 / delta) ** -config["mu"]

        assert 0.0 < restricted <= model
        assert report.difference_norm > 0.0


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
