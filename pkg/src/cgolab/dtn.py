"""Discrete Dirichlet problem and Dirichlet-to-Neumann map on the unit box.

The domain is the unit cube [0,1]^3 with n cells (n+1 nodes) per axis and
the standard 7-point Laplacian plus a diagonal potential at the interior
nodes.  The Neumann side is defined weakly: with the discrete energy form

    a(u, e) = h sum_edges w_e (Du)(De) + h^3 sum_nodes w_x V u e,

the map phi |-> Lambda_V phi acts on boundary data through

    <Lambda_V phi, psi> = a(P_V phi, E psi),

where P_V solves the Dirichlet problem and E psi is any nodal extension of
psi: summation by parts makes the pairing extension-independent exactly (up
to the linear-solver residual), which the tests exercise with the trivial
and the harmonic extension.  Edge weights w_e halve per transverse boundary
face (trapezoid weighting); this leaves the interior operator untouched but
makes the form reproduce integrals of piecewise-linear fields exactly, e.g.
<Lambda_0 x1, x1> = 1 on the unit box.

Boundary bases are tensor cosine modes per face (DCT flavor), which resolve
smooth oscillatory traces far better than nodal hat functions at coarse n;
``project_trace`` reports the relative nodal residual of a truncation so the
reconstruction pipeline can gate on it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sps
import scipy.sparse.linalg as spla

from .errors import (BasisMismatch, SolverDivergence, SpectrumAtZero,
                     TraceResolutionError)
from .kato import PotentialSpec

DIRECT_SOLVER_MAX_CELLS = 48   # splu below, diagonally preconditioned CG above


@dataclass(frozen=True, eq=False)
class DiscreteDomain:
    """Unit box [0,1]^3 with n_cells cells per axis; nodes carry the fields."""

    n_cells: int

    def __post_init__(self):
        if self.n_cells < 2:
            raise ValueError("need at least 2 cells per axis")

    @property
    def h(self) -> float:
        return 1.0 / self.n_cells

    @property
    def n_nodes(self) -> int:
        return self.n_cells + 1

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n_nodes,) * 3

    def node_mesh(self):
        ax = np.linspace(0.0, 1.0, self.n_nodes)
        return np.meshgrid(ax, ax, ax, indexing="ij")

    def boundary_mask(self) -> np.ndarray:
        m = np.zeros(self.shape, dtype=bool)
        m[0, :, :] = m[-1, :, :] = True
        m[:, 0, :] = m[:, -1, :] = True
        m[:, :, 0] = m[:, :, -1] = True
        return m

    def points(self) -> np.ndarray:
        X, Y, Z = self.node_mesh()
        return np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)

    def trapezoid_weights(self) -> np.ndarray:
        """Per-node trapezoid weights (1/2 per touched face)."""
        w1 = np.ones(self.n_nodes)
        w1[0] = w1[-1] = 0.5
        return w1[:, None, None] * w1[None, :, None] * w1[None, None, :]


def sample_potential(V: PotentialSpec | np.ndarray, dom: DiscreteDomain) -> np.ndarray:
    if isinstance(V, PotentialSpec):
        return V(dom.points()).reshape(dom.shape)
    V = np.asarray(V, dtype=float)
    if V.shape != dom.shape:
        raise BasisMismatch(f"potential sampled as {V.shape}, domain {dom.shape}")
    return V


def _edge_weights(dom: DiscreteDomain, axis: int) -> np.ndarray:
    """Transverse trapezoid weights for difference stencils along ``axis``."""
    n = dom.n_nodes
    shape = [n, n, n]
    shape[axis] = n - 1
    w = np.ones(shape)
    for t in range(3):
        if t == axis:
            continue
        sl = [slice(None)] * 3
        sl[t] = 0
        w[tuple(sl)] *= 0.5
        sl[t] = -1
        w[tuple(sl)] *= 0.5
    return w


def energy_pairing(dom: DiscreteDomain, Vn: np.ndarray,
                   u: np.ndarray, e: np.ndarray) -> complex:
    """The bilinear form a(u, e) (no conjugation; complex bilinear)."""
    h = dom.h
    total = 0.0 + 0.0j
    for axis in range(3):
        du = np.diff(u, axis=axis)
        de = np.diff(e, axis=axis)
        total += h * np.sum(du * de * _edge_weights(dom, axis))
    total += h**3 * np.sum(Vn * u * e * dom.trapezoid_weights())
    return complex(total)


class DtnOperator:
    """Dirichlet solver and weak DtN pairings for one potential.

    Assembles the interior operator once; the (real) sparse factorization is
    reused for every trace.  The spectrum guard runs a few inverse-power
    steps and refuses to proceed when the smallest eigenvalue is at
    numerical zero, mirroring the standing invertibility assumption.
    """

    def __init__(self, V: PotentialSpec | np.ndarray, dom: DiscreteDomain,
                 guard: bool = True, solver_tol: float = 1e-10):
        self.dom = dom
        self.Vn = sample_potential(V, dom)
        self.solver_tol = solver_tol
        n = dom.n_nodes
        idx = np.arange(n**3).reshape(dom.shape)
        bnd = dom.boundary_mask()
        self.boundary_mask = bnd
        self.interior_ids = idx[~bnd]
        renum = -np.ones(n**3, dtype=np.int64)
        renum[self.interior_ids] = np.arange(self.interior_ids.size)
        self._renum = renum
        self._assemble()
        if guard:
            self._spectrum_guard()

    def _assemble(self):
        dom = self.dom
        n = dom.n_nodes
        h2 = dom.h**2
        idx = np.arange(n**3).reshape(dom.shape)
        interior = ~self.boundary_mask
        nint = self.interior_ids.size
        rows = [np.arange(nint)]
        cols = [np.arange(nint)]
        vals = [6.0 / h2 + self.Vn[interior]]
        I, J, K = np.meshgrid(np.arange(n), np.arange(n), np.arange(n),
                              indexing="ij")
        for di, dj, dk in [(1, 0, 0), (-1, 0, 0), (0, 1, 0),
                           (0, -1, 0), (0, 0, 1), (0, 0, -1)]:
            ni, nj, nk = I + di, J + dj, K + dk
            nid = idx[np.clip(ni, 0, n - 1), np.clip(nj, 0, n - 1),
                      np.clip(nk, 0, n - 1)]
            m = interior & (self._renum[nid] >= 0)
            rows.append(self._renum[idx[m]])
            cols.append(self._renum[nid[m]])
            vals.append(np.full(int(m.sum()), -1.0 / h2))
        A = sps.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(nint, nint))
        self.A = A
        self._lu = None
        if dom.n_cells <= DIRECT_SOLVER_MAX_CELLS:
            self._lu = spla.splu(A.tocsc())

    def _solve_interior(self, b: np.ndarray) -> np.ndarray:
        if self._lu is not None:
            if np.iscomplexobj(b):
                return self._lu.solve(b.real) + 1j * self._lu.solve(b.imag)
            return self._lu.solve(b)
        # diagonally preconditioned CG on the (real symmetric) system
        M = sps.diags(1.0 / self.A.diagonal())

        def cg(rhs):
            x, info = spla.cg(self.A, rhs, M=M, rtol=self.solver_tol,
                              maxiter=20000)
            if info != 0:
                raise SolverDivergence(f"CG failed with info={info}")
            return x

        if np.iscomplexobj(b):
            return cg(b.real) + 1j * cg(b.imag)
        return cg(b)

    def _spectrum_guard(self, iters: int = 10, floor: float = 1e-8):
        rng = np.random.default_rng(0)
        x = rng.standard_normal(self.interior_ids.size)
        x /= np.linalg.norm(x)
        mu = 0.0
        for _ in range(iters):
            y = self._solve_interior(x)
            ny = np.linalg.norm(y)
            if not np.isfinite(ny) or ny == 0.0:
                raise SpectrumAtZero("inverse iteration diverged; "
                                     "eigenvalue at numerical zero")
            mu = 1.0 / ny          # |lambda_min| estimate
            x = y / ny
        scale = float(np.abs(self.A.diagonal()).max())
        if mu < floor * scale:
            raise SpectrumAtZero(
                f"|lambda_min| ~ {mu:.3e} below {floor:.0e} * ||A|| ~ "
                f"{floor * scale:.3e}")

    # -- solves ------------------------------------------------------------

    def solve(self, phi: np.ndarray, f: np.ndarray | None = None) -> np.ndarray:
        """Solve (-Delta_h + V) u = f with u = phi on the boundary.

        ``phi`` is a full (n+1)^3 array whose boundary values are used (the
        interior entries are ignored); returns the full nodal solution with
        the boundary set to phi exactly.
        """
        dom = self.dom
        if phi.shape != dom.shape:
            raise BasisMismatch(f"trace shape {phi.shape} != {dom.shape}")
        h2 = dom.h**2
        lift = np.where(self.boundary_mask, phi, 0.0)
        b = np.zeros(dom.shape, dtype=complex)
        for axis in range(3):
            for shift in (1, -1):
                b += np.roll(lift, shift, axis=axis) / h2
        interior = ~self.boundary_mask
        rhs = b[interior]
        if f is not None:
            rhs = rhs + f[interior]
        x = self._solve_interior(rhs)
        resid = np.linalg.norm(self.A @ x - rhs)
        scale = np.linalg.norm(rhs)
        if scale > 0 and resid > 1e-9 * scale:
            raise SolverDivergence(
                f"linear solve residual {resid / scale:.2e} above 1e-9")
        u = np.zeros(dom.shape, dtype=complex if np.iscomplexobj(rhs) or
                     np.iscomplexobj(phi) else float)
        u[interior] = x
        u[self.boundary_mask] = phi[self.boundary_mask]
        return u

    # -- weak Neumann data ---------------------------------------------------

    def pair(self, phi: np.ndarray, psi: np.ndarray,
             extension: str = "trivial") -> complex:
        """<Lambda_V phi, psi> = a(P_V phi, E psi).

        ``extension``: 'trivial' extends psi by zero to the interior,
        'harmonic' uses the V-problem solve; the two agree to solver
        tolerance by summation by parts.
        """
        u = self.solve(phi)
        if extension == "trivial":
            e = np.where(self.boundary_mask, psi, 0.0)
        elif extension == "harmonic":
            e = self.solve(psi)
        else:
            raise ValueError(f"unknown extension {extension!r}")
        return energy_pairing(self.dom, self.Vn, u, e)

    def apply(self, phi: np.ndarray) -> "BoundaryFunctional":
        """The functional psi -> <Lambda_V phi, psi> with coefficients cached."""
        u = self.solve(phi)
        g = np.zeros(self.dom.shape, dtype=u.dtype)
        h = self.dom.h
        for axis in range(3):
            du = np.diff(u, axis=axis) * _edge_weights(self.dom, axis)
            lo = [slice(None)] * 3
            hi = [slice(None)] * 3
            lo[axis] = slice(0, -1)
            hi[axis] = slice(1, None)
            # a(u, e) with e supported on the boundary: distribute edge terms
            g[tuple(lo)] -= h * du
            g[tuple(hi)] += h * du
        g += self.dom.h**3 * self.Vn * u * self.dom.trapezoid_weights()
        g = np.where(self.boundary_mask, g, 0.0)
        return BoundaryFunctional(self.dom, g)


@dataclass(eq=False)
class BoundaryFunctional:
    """Weak Neumann data: coefficients g with <., psi> = sum g psi."""

    dom: DiscreteDomain
    coefficients: np.ndarray

    def pair(self, psi: np.ndarray) -> complex:
        if psi.shape != self.dom.shape:
            raise BasisMismatch(f"trace shape {psi.shape} != {self.dom.shape}")
        return complex(np.sum(self.coefficients * psi))


def dirichlet_solve(V, dom: DiscreteDomain, phi: np.ndarray,
                    f: np.ndarray | None = None) -> np.ndarray:
    return DtnOperator(V, dom).solve(phi, f)


def dtn_apply(V, dom: DiscreteDomain, phi: np.ndarray) -> BoundaryFunctional:
    return DtnOperator(V, dom).apply(phi)


def alessandrini_pairing(op1: DtnOperator, op2: DtnOperator,
                         phi1: np.ndarray, phi2: np.ndarray) -> complex:
    """<Lambda_{V1} phi1, phi2> - <Lambda_{V2} phi2, phi1>.

    Equals the volume integral of (V1 - V2) u1 u2 for the discrete
    solutions, exactly up to solver residuals.
    """
    if op1.dom.shape != op2.dom.shape:
        raise BasisMismatch("operators live on different domains")
    if phi1.shape != op1.dom.shape or phi2.shape != op1.dom.shape:
        raise BasisMismatch("trace shapes do not match the domain")
    return op1.pair(phi1, phi2) - op2.pair(phi2, phi1)


# ---------------------------------------------------------------------------
# boundary bases and trace projection
# ---------------------------------------------------------------------------

_FACES = [(0, 0), (0, -1), (1, 0), (1, -1), (2, 0), (2, -1)]


def _face_slices(axis: int, side: int):
    sl = [slice(None)] * 3
    sl[axis] = side
    return tuple(sl)


@dataclass(eq=False)
class DtnMatrix:
    """DtN operator restricted to a finite boundary basis."""

    basis_labels: list
    entries: np.ndarray

    def symmetry_defect(self) -> float:
        return float(np.max(np.abs(self.entries - self.entries.T)))

    def to_dict(self) -> dict:
        return {"basis": self.basis_labels,
                "entries_re": self.entries.real.tolist(),
                "entries_im": self.entries.imag.tolist()}


def face_cos_basis(dom: DiscreteDomain, order: int,
                   include_constant: bool = True) -> tuple[list, list]:
    """Per-face tensor cosine modes cos(k pi s) cos(l pi t), plus a constant.

    Returns (labels, traces); each trace is a full nodal array supported on
    one face (the constant spans the whole boundary).
    """
    n = dom.n_nodes
    s = np.linspace(0.0, 1.0, n)
    labels, traces = [], []
    if include_constant:
        tr = np.where(dom.boundary_mask(), 1.0, 0.0)
        labels.append({"mode": "constant"})
        traces.append(tr)
    for face_id, (axis, side) in enumerate(_FACES):
        for k in range(order + 1):
            for l in range(order + 1):
                if k == 0 and l == 0:
                    continue   # the global constant already covers flat data
                tr = np.zeros(dom.shape)
                face = np.outer(np.cos(k * np.pi * s), np.cos(l * np.pi * s))
                tr[_face_slices(axis, side)] = face
                labels.append({"mode": "face_cos", "face": face_id,
                               "k": k, "l": l})
                traces.append(tr)
    return labels, traces


def dtn_matrix(V, dom: DiscreteDomain, basis: tuple[list, list] | None = None,
               order: int = 2) -> DtnMatrix:
    """Assemble <Lambda_V phi_i, phi_j> over a boundary basis."""
    op = V if isinstance(V, DtnOperator) else DtnOperator(V, dom)
    labels, traces = basis if basis is not None else face_cos_basis(dom, order)
    m = len(traces)
    entries = np.zeros((m, m), dtype=complex)
    for i, tr in enumerate(traces):
        func = op.apply(tr)
        for j, tr2 in enumerate(traces):
            entries[i, j] = func.pair(tr2)
    return DtnMatrix(basis_labels=labels, entries=entries)


def project_trace(dom: DiscreteDomain, trace: np.ndarray, order: int | None,
                  threshold: float | None = None) -> tuple[np.ndarray, float]:
    """Project a boundary trace onto per-face cosine modes up to ``order``.

    Each face grid is expanded in a 2D DCT-I basis and truncated to
    max(k, l) <= order; shared edges take the average of the adjacent face
    reconstructions.  Returns (projected trace, relative nodal residual).
    ``order = None`` (or >= n_cells) keeps the trace exactly.  When
    ``threshold`` is given, a residual above it raises TraceResolutionError.
    """
    import scipy.fft

    bnd = dom.boundary_mask()
    if order is None or order >= dom.n_cells:
        return trace.copy(), 0.0
    out = np.zeros(dom.shape, dtype=complex)
    count = np.zeros(dom.shape)
    for axis, side in _FACES:
        sl = _face_slices(axis, side)
        face = np.asarray(trace[sl], dtype=complex)
        coef = scipy.fft.dctn(face, type=1)
        coef[order + 1:, :] = 0.0
        coef[:, order + 1:] = 0.0
        rec = scipy.fft.idctn(coef, type=1)
        out[sl] += rec
        count[sl] += 1.0
    nz = count > 0
    out[nz] /= count[nz]
    scale = np.linalg.norm(trace[bnd])
    resid = float(np.linalg.norm((out - trace)[bnd]) / scale) if scale > 0 else 0.0
    if threshold is not None and resid > threshold:
        raise TraceResolutionError(
            f"trace projection residual {resid:.3e} above threshold "
            f"{threshold:.1e} at order {order}")
    return out, resid
