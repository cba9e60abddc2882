"""Discrete inverse conjugated Laplacian and the Neumann-series CGO build.

The conjugated Laplacian has symbol p_z(xi) = |xi|^2 + 2 z.xi, which
vanishes at xi = 0 for every admissible z and on a circle of radius
tau = |z|/sqrt(2) elsewhere.  On the half-shifted lattice (frequencies
(2 pi/L)(k + 1/2)) the zero mode is never present and the circle is missed
generically; a floor on |p_z(xi_k)| guards the remaining degeneracies and
is reported through SymbolZero so that callers can nudge z and retry.

With G_z the exact lattice inverse (multiplier 1/p_z(xi_k)), a solution of
(-Delta + V) u = 0 of the form u = e^{i z.x}(1 + r) is produced by solving

    f + w G_z(v f) = -w,        v = |V|^{1/2},  w = V/|V|^{1/2},

by direct Neumann iteration (f <- -w - w G_z(v f)), and setting
r = G_z(v f).  The iteration mirrors the contraction argument: it converges
precisely when ||w G_z v|| < 1 and the observed ratio is reported.  For
V >= 0 one has w = v and the right-hand side -w coincides with the
conventional -v; for sign-changing V the -w form is the one that makes
(p_z(D) + V) r = -V hold identically, which the residual tests check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NoConvergence, NotContractive, SymbolZero
from .fundsol import CgoVector, z_to_canonical
from .grid import Grid, GridField, apply_multiplier
from .kato import PotentialSpec

SYMBOL_FLOOR_FACTOR = 1e-8   # floor = factor * |z|^2


def _as_cgo_vector(z) -> CgoVector:
    if isinstance(z, CgoVector):
        return z
    return z_to_canonical(z)


class GzOperator:
    """Cached lattice multipliers for one (z, grid) pair.

    ``apply`` is G_z (the right inverse), ``apply_forward`` is p_z(D); both
    act on the half-shifted lattice so that p_z(D) G_z = identity holds to
    rounding by construction.
    """

    def __init__(self, z, grid: Grid):
        self.z = _as_cgo_vector(z)
        self.grid = grid
        KX, KY, KZ = grid.freq_mesh()
        zv = self.z.z
        mag2 = KX**2 + KY**2 + KZ**2
        zdot = zv[0] * KX + zv[1] * KY + zv[2] * KZ
        self.symbol = mag2 + 2.0 * zdot
        self.floor = SYMBOL_FLOOR_FACTOR * float(np.sum(np.abs(zv) ** 2))
        amin = np.abs(self.symbol).argmin()
        if np.abs(self.symbol).flat[amin] <= self.floor:
            idx = np.unravel_index(amin, self.symbol.shape)
            xi = (KX[idx], KY[idx], KZ[idx])
            raise SymbolZero(xi, self.symbol[idx], self.floor)
        self.multiplier = 1.0 / self.symbol

    def apply(self, f: GridField) -> GridField:
        return apply_multiplier(f, self.multiplier)

    def apply_forward(self, f: GridField) -> GridField:
        return apply_multiplier(f, self.symbol)

    def apply_adjoint(self, f: GridField) -> GridField:
        return apply_multiplier(f, np.conj(self.multiplier))


def gz_apply(z, f: GridField) -> GridField:
    """One-shot G_z application (prefer GzOperator when applying repeatedly)."""
    return GzOperator(z, f.grid).apply(f)


def operator_norm(z, left: np.ndarray, right: np.ndarray, grid: Grid,
                  tol: float = 1e-6, max_iter: int = 2000,
                  seed: int = 0) -> float:
    """||M_left G_z M_right|| on L^2 of the lattice, by power iteration.

    ``left``/``right`` are multiplication weights sampled on the grid.  The
    iteration runs on T*T and stops when the Rayleigh quotient is stable to
    ``tol`` relative; raises NoConvergence past ``max_iter``.
    """
    op = GzOperator(z, grid)
    left = np.asarray(left, dtype=complex)
    right = np.asarray(right, dtype=complex)
    if not (np.any(left) and np.any(right)):
        return 0.0
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    u /= np.linalg.norm(u)
    rq_old = np.inf
    for _ in range(max_iter):
        Tu = left * op.apply(GridField(grid, right * u)).values
        TtTu = np.conj(right) * op.apply_adjoint(
            GridField(grid, np.conj(left) * Tu)).values
        rq = float(np.vdot(u, TtTu).real)
        nrm = np.linalg.norm(TtTu)
        if nrm == 0.0:
            return 0.0
        u = TtTu / nrm
        if np.isfinite(rq_old) and abs(rq - rq_old) <= tol * abs(rq):
            return float(np.sqrt(max(rq, 0.0)))
        rq_old = rq
    raise NoConvergence(f"power iteration did not stabilize in {max_iter} steps")


@dataclass
class CgoSolveReport:
    """Diagnostics of one Neumann-series solve."""

    iterations: int
    contraction_estimate: float
    residual: float            # ||f + w + w G_z(v f)||_2 / ||w||_2
    r_norm: float              # ||r_z||_{L^2} over the potential's support box
    f_norm: float
    v_norm: float

    def to_dict(self) -> dict:
        return {k: float(v) for k, v in self.__dict__.items()}


def solve_cgo(V: PotentialSpec, z, grid: Grid, tol: float = 1e-12,
              max_iter: int = 400):
    """Neumann-series solve of f + w G_z(v f) = -w; returns (r_z, f_z, report).

    r_z = G_z(v f_z).  Raises NotContractive when the iteration is observed
    to expand and NoConvergence when the residual stalls above ``tol``.
    """
    zc = _as_cgo_vector(z)
    op = GzOperator(zc, grid)
    v = V.v_field(grid).values
    w = V.w_field(grid).values
    v_norm = float(np.linalg.norm(v))
    if v_norm == 0.0:
        rep = CgoSolveReport(0, 0.0, 0.0, 0.0, 0.0, 0.0)
        return grid.zeros(), grid.zeros(), rep

    def T(g: np.ndarray) -> np.ndarray:
        return w * op.apply(GridField(grid, v * g)).values

    f = -w.astype(complex)
    Tf = T(f)
    contraction = 0.0
    prev_delta = None
    converged = False
    for it in range(max_iter + 1):
        residual = float(np.linalg.norm(f + w + Tf) / v_norm)
        if residual < tol:
            converged = True
            break
        f_next = -w - Tf
        delta = float(np.linalg.norm(f_next - f))
        if prev_delta is not None and prev_delta > 0:
            ratio = delta / prev_delta
            contraction = ratio
            if ratio >= 1.0 and it > 3:
                raise NotContractive(
                    f"iteration expands (ratio {ratio:.3f} at step {it}); "
                    f"||w G_z v|| >= 1 for |z| = {zc.magnitude:.3g}")
        prev_delta = delta
        f = f_next
        Tf = T(f)
    if not converged:
        raise NoConvergence(
            f"Neumann residual {residual:.2e} above tol {tol:.1e} "
            f"after {max_iter} iterations")

    r = op.apply(GridField(grid, v * f))
    box_mask = r.box_mask(V.support_box)
    h3 = grid.cell_volume
    rep = CgoSolveReport(
        iterations=it,
        contraction_estimate=contraction,
        residual=residual,
        r_norm=float(np.sqrt(np.sum(np.abs(r.values[box_mask]) ** 2) * h3)),
        f_norm=float(np.linalg.norm(f) * np.sqrt(h3)),
        v_norm=float(v_norm * np.sqrt(h3)),
    )
    return r, GridField(grid, f), rep


def phase_field(z, grid: Grid, center=None) -> np.ndarray:
    """e^{i z.(x - center)} on the grid nodes."""
    zc = _as_cgo_vector(z)
    X, Y, Z = grid.coord_mesh()
    c = np.zeros(3) if center is None else np.asarray(center, dtype=float)
    ph = (zc.z[0] * (X - c[0]) + zc.z[1] * (Y - c[1]) + zc.z[2] * (Z - c[2]))
    return np.exp(1j * ph)


def cgo_solution(V: PotentialSpec, z, grid: Grid, center=None,
                 solve_result=None, tol: float = 1e-12) -> GridField:
    """Assemble u_z = e^{i z.(x-center)} (1 + r_z) on the grid nodes.

    ``center`` only renormalizes the plane-wave factor (any constant phase
    reference gives a solution); pass ``solve_result`` to reuse an existing
    (r_z, f_z, report) triple.
    """
    if solve_result is None:
        solve_result = solve_cgo(V, z, grid, tol=tol)
    r, _, _ = solve_result
    u = phase_field(z, grid, center) * (1.0 + r.values)
    out = GridField(grid, u)
    out.meta["center"] = center
    return out


def schrodinger_residual(V: PotentialSpec, z, grid: Grid, r: GridField,
                         f: GridField, center=None) -> float:
    """Relative residual ||(-Delta + V) u_z|| / ||V u_z|| over the support box.

    The Laplacian acts on u_z = e^{iz.x}(1 + r) through the conjugation
    identity: -Delta(e^{iz.x} g) = e^{iz.x} p_z(D) g holds exactly for
    lattice modes g, so the bracket p_z(D) r + V (1 + r) is evaluated
    spectrally and both sides carry the same exponential weight.
    """
    zc = _as_cgo_vector(z)
    op = GzOperator(zc, grid)
    Vg = V.sample(grid).values.real
    bracket = op.apply_forward(r).values + Vg * (1.0 + r.values)
    ez = phase_field(zc, grid, center)
    num = ez * bracket
    den = ez * (Vg * (1.0 + r.values))
    mask = r.box_mask(V.support_box)
    scale = np.linalg.norm(den[mask])
    if scale == 0.0:
        return float(np.linalg.norm(num[mask]))
    return float(np.linalg.norm(num[mask]) / scale)


def gradient_norm(z, grid: Grid, r: GridField, center=None) -> float:
    """||grad u_z||_{L^2} via lattice multipliers i(z + xi_k) on the r-modes."""
    from .grid import spectral_gradient

    zc = _as_cgo_vector(z)
    ez = phase_field(zc, grid, center)
    gx, gy, gz_ = spectral_gradient(r)
    total = 0.0
    for comp, zcomp in zip((gx, gy, gz_), zc.z):
        vals = ez * (1j * zcomp * (1.0 + r.values) + comp.values)
        total += np.sum(np.abs(vals) ** 2)
    return float(np.sqrt(total * grid.cell_volume))
