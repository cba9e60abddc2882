"""Special-function layer: quadrature Bessel K, potentials, Riesz multipliers."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cgolab import (BesselPotentialParams, DomainError, FourierConvention,
                    Grid, QuadratureFailure, bessel_k, bessel_k_boundary,
                    bessel_k_fast, bessel_potential, k0_line_integral,
                    riesz_apply, riesz_kernel)
from cgolab.grid import spectral_laplacian

from conftest import random_field

# frozen from the defining integral evaluated with mpmath tanh-sinh (dps 35)
K0_AT_1 = 0.42102443824070834


def test_k_half_closed_form():
    val = bessel_k(0.5, 1.0)
    assert abs(val - np.sqrt(np.pi / 2) / np.e) < 1e-10


def test_k0_at_1_against_de_oracle():
    # independent oracle: tanh-sinh (double-exponential) quadrature of the
    # defining integral; truncating at t = 8 discards less than e^-1490
    mp = pytest.importorskip("mpmath")
    mp.mp.dps = 30
    oracle = float(mp.quad(lambda t: mp.exp(-mp.cosh(t)), [0, 4, 8]))
    assert abs(oracle - K0_AT_1) < 1e-15
    assert abs(bessel_k(0.0, 1.0) - oracle) < 1e-12


@settings(max_examples=20, deadline=None)
@given(st.floats(0.05, 4.0), st.floats(-3.0, 3.0), st.floats(0.0, 2.0))
def test_conjugation_symmetry(re, im, order):
    w = complex(re, im)
    a = bessel_k(order, np.conj(w))
    b = np.conj(bessel_k(order, w))
    assert abs(a - b) <= 1e-12 * abs(b)


def test_complex_order_against_mpmath():
    mp = pytest.importorskip("mpmath")
    mp.mp.dps = 25
    for order, arg in [(0.7 + 0.3j, 1.2 + 0.5j), (1.5, 2.5), (0.0, 0.8 + 2.0j)]:
        ref = complex(mp.besselk(mp.mpc(order), mp.mpc(arg)))
        val = bessel_k(order, arg)
        assert abs(val - ref) < 1e-10 * max(abs(ref), 1.0)


def test_fast_path_matches_quadrature():
    args = [0.3 + 0.1j, 1.0, 2.0 - 1.5j, 0.05 + 3.0j]
    for order in (0.0, 0.5, 1.0):
        for w in args:
            assert abs(bessel_k_fast(order, w) - bessel_k(order, w)) \
                < 1e-11 * max(1.0, abs(bessel_k(order, w)))


def test_domain_and_quadrature_errors():
    with pytest.raises(DomainError):
        bessel_k(0.0, -1.0)
    with pytest.raises(DomainError):
        bessel_k(0.0, 1j)
    with pytest.raises(QuadratureFailure):
        bessel_k(0.0, 1.0, tol=1e-17)


def test_boundary_extrapolation():
    # oracle: the analytic continuation onto the imaginary axis (AMOS)
    for y in (0.5, 1.0, 3.0):
        ref = bessel_k_fast(0.0, 1j * y)
        val = bessel_k_boundary(0.0, 1j * y)
        assert abs(val - ref) < 2e-6 * abs(ref)


def test_bessel_potential_2d_reduction():
    p = BesselPotentialParams(alpha=1.0, mu=2.0, dim=2)
    val = bessel_potential(p, 0.7)
    ref = bessel_k(0.0, np.sqrt(2.0) * 0.7) / (2 * np.pi)
    assert abs(val - ref) < 1e-12


def test_bessel_potential_yukawa_point():
    p = BesselPotentialParams(alpha=1.0, mu=1.0, dim=3)
    assert abs(bessel_potential(p, 1.0) - np.exp(-1.0) / (4 * np.pi)) < 1e-10


def test_yukawa_identity_grid():
    for r in np.geomspace(0.1, 10.0, 7):
        for mu in np.geomspace(0.5, 10.0, 5):
            p = BesselPotentialParams(alpha=1.0, mu=mu, dim=3)
            val = bessel_potential(p, r)
            ref = np.exp(-np.sqrt(mu) * r) / (4 * np.pi * r)
            assert abs(val - ref) < 1e-8 * abs(ref)


def test_bessel_potential_riesz_limit():
    p = BesselPotentialParams(alpha=1.0, mu=1e-10, dim=3)
    val = bessel_potential(p, 1.0)
    ref = riesz_kernel(2.0, 3, [1.0, 0.0, 0.0])
    assert abs(val - ref) < 1e-4 * abs(ref)


def test_envelope_bound_short_range():
    # |F_alpha(r, mu)| <= C_alpha r^{2 alpha - d} for |mu|^{1/2} r <= 1; the
    # constant depends on Re(alpha) only, so fit it per alpha on a coarse
    # (r, mu) subgrid and require stability on a denser one
    d = 3

    def ratios(alpha, rs, mus):
        out = []
        for mu in mus:
            for r in rs:
                if np.sqrt(abs(mu)) * r <= 1.0:
                    p = BesselPotentialParams(alpha=alpha, mu=mu, dim=d)
                    out.append(abs(bessel_potential(p, r)) * r ** (d - 2 * alpha))
        return np.array(out)

    for alpha in (0.5, 0.75, 1.0, 1.25):
        C = ratios(alpha, np.geomspace(0.05, 0.9, 4), [0.5, 2.0]).max()
        probe = ratios(alpha, np.geomspace(0.02, 0.98, 9), [0.3, 1.0, 4.0, 9.0])
        assert probe.max() <= 1.1 * C, f"alpha={alpha}"


def test_riesz_kernel_values():
    assert abs(riesz_kernel(2.0, 3, [1, 0, 0]) - 1 / (4 * np.pi)) < 1e-14
    assert abs(riesz_kernel(2.0, 3, [0, 2, 0])
               - 0.5 * riesz_kernel(2.0, 3, [1, 0, 0])) < 1e-14
    assert abs(riesz_kernel(1.0, 3, [0, 0, 1]) - 1 / (2 * np.pi**2)) < 1e-14
    with pytest.raises(DomainError):
        riesz_kernel(3.0, 3, [1, 0, 0])
    with pytest.raises(DomainError):
        riesz_kernel(2.0, 3, [0, 0, 0])


def test_riesz_alpha1_radial_transform_oracle():
    # Abel-regularized radial Fourier transform of |xi|^{-1} in 3D:
    # (2 pi^2 |x|)^{-1} int_0^inf sin(t) e^{-eps t} dt -> 1/(2 pi^2 |x|^2)|_{|x|=1}
    eps = np.array([1e-2, 1e-3, 1e-4])
    vals = 1.0 / (2 * np.pi**2) * 1.0 / (1.0 + eps**2)
    # Richardson in eps^2 (the integral is 1/(1+eps^2))
    extrap = vals[-1] + (vals[-1] - vals[-2]) / (eps[-2]**2 / eps[-1]**2 - 1.0)
    assert abs(riesz_kernel(1.0, 3, [1, 0, 0]) - extrap) < 1e-10


def test_k0_line_integral():
    assert abs(k0_line_integral() - np.pi / 2) < 1e-6


# --- lattice Riesz multipliers ------------------------------------------------


def test_riesz_identity_alpha0(unshifted_grid):
    f = random_field(unshifted_grid, seed=1)
    g = riesz_apply(0.0, f)
    assert np.max(np.abs(g.values - f.values)) < 1e-12
    assert "zero_mode_dropped" in g.meta


@settings(max_examples=8, deadline=None)
@given(st.integers(0, 10_000))
def test_riesz_semigroup(seed):
    grid = Grid(n=16, length=4.0, origin=(-2, -2, -2), shifted=False)
    f = random_field(grid, seed=seed)
    a, b = 1.0, 1.0
    lhs = riesz_apply(a, riesz_apply(b, f))
    rhs = riesz_apply(a + b, f)
    scale = np.linalg.norm(rhs.values)
    assert np.linalg.norm(lhs.values - rhs.values) < 1e-12 * scale


def test_riesz_inverts_laplacian(unshifted_grid):
    f = random_field(unshifted_grid, seed=7)
    lap = spectral_laplacian(f)
    back = riesz_apply(2.0, lap)
    # -Delta has multiplier |xi|^2; J_2 multiplies by |xi|^{-2}: recovers -f
    assert np.linalg.norm(back.values + f.values) \
        < 1e-11 * np.linalg.norm(f.values)


def test_fourier_roundtrip(small_grid, unshifted_grid):
    for g in (small_grid, unshifted_grid):
        f = random_field(g, seed=3)
        assert FourierConvention.roundtrip_defect(f) < 1e-12
