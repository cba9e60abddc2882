import numpy as np
import pytest

from cgolab import Grid, KatoQuadrature, ball_potential, bump_potential


@pytest.fixture(scope="session")
def small_grid():
    return Grid(n=16, length=4.0, origin=(-2.0, -2.0, -2.0), shifted=True)


@pytest.fixture(scope="session")
def medium_grid():
    return Grid(n=32, length=4.0, origin=(-2.0, -2.0, -2.0), shifted=True)


@pytest.fixture(scope="session")
def unshifted_grid():
    return Grid(n=16, length=4.0, origin=(-2.0, -2.0, -2.0), shifted=False)


@pytest.fixture(scope="session")
def bump():
    return bump_potential(amplitude=10.0, radius=0.5)


@pytest.fixture(scope="session")
def ball():
    return ball_potential(radius=1.0, amplitude=1.0)


@pytest.fixture(scope="session")
def cheap_kato_quad():
    """Reduced-depth settings for fast unit tests (not acceptance grade)."""
    return KatoQuadrature(u_depth=40.0, v_max=25.0, n_phi=8,
                          search_lattice=5, refine_rounds=1, top_k=2,
                          verify=False)


def random_field(grid, seed=0, band=3):
    """Mean-free band-limited random complex field on the grid."""
    rng = np.random.default_rng(seed)
    spec = np.zeros(grid.shape, dtype=complex)
    n = grid.n
    idx = np.fft.fftfreq(n, d=1.0 / n).astype(int)
    sel = np.abs(idx) <= band
    block = rng.standard_normal((sel.sum(),) * 3) \
        + 1j * rng.standard_normal((sel.sum(),) * 3)
    spec[np.ix_(sel, sel, sel)] = block
    vals = np.fft.ifftn(spec)
    vals -= vals.mean()
    from cgolab import GridField
    return GridField(grid, vals)
