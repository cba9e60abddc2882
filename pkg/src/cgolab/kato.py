"""Kato-class potentials: norms, moduli, mollification, and splittings.

A potential V on R^3 is in the Kato class when

    sup_x  int_{|x-y|<r} |V(y)| / |x-y| dy  -> 0   as r -> 0,

and its global Kato norm is the same supremum without the radius cut.  The
numerical sup runs over a candidate lattice covering the support box dilated
by 1, with two local refinement rounds around the running argmax.

The singular integral itself is evaluated in polar coordinates centered at
the candidate point: the volume element cancels the 1/|x-y| kernel exactly,
so the kernel singularity costs nothing.  Radial nodes are Gauss panels in
u = -log s and angular nodes are Gauss panels in v = log tan(theta/2); both
gradings reach logarithmically deep (default e^-300) because potentials at
the edge of the Kato class, like the bundled |x'|^{-2} |log|x'||^{-delta}
example, carry kernel-weighted mass arbitrarily close to their singular set
with only |log|-power decay.  A fixed Cartesian quadrature provably cannot
see that mass; the graded polar rule is what makes the modulus decay rates
measurable.

Mollification V * phi_delta is realized as a finite convex combination of
translates (Gauss nodes over the bump support with numerically normalized
weights), which makes the norm contraction exact at the discrete level, not
just up to quadrature error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, QuadratureFailure, SplitFailure
from .grid import Grid, GridField

Evaluator = Callable[[np.ndarray], np.ndarray]

# Deep-tail clamp for singular evaluators: below this distance from a
# singular set the |log| weight exceeds ~334 and carries no measurable mass,
# while the raw power blows past double range.
RHO_FLOOR = 1e-145


# ---------------------------------------------------------------------------
# potentials
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PotentialSpec:
    """A potential with a vectorized pointwise evaluator and a support box.

    ``evaluator`` maps an (N, 3) array of points to (N,) real values and must
    vanish outside ``support_box`` ((3, 2) array of axis bounds).  The
    optional fields are quadrature hints: a singular-axis direction for the
    polar rule, radii of known discontinuities as seen from a center point,
    a cheaper surrogate for the argmax search, and depth overrides.
    """

    label: str
    evaluator: Evaluator
    support_box: np.ndarray
    descriptor: dict | None = None
    singular_axis: np.ndarray | None = None
    radial_breaks: Callable[[np.ndarray], list[float]] | None = None
    search_surrogate: "PotentialSpec | None" = None
    quad_hints: dict = field(default_factory=dict)
    sup_bound: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "support_box",
                           np.asarray(self.support_box, dtype=float).reshape(3, 2))

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        return np.asarray(self.evaluator(np.asarray(pts, dtype=float)), dtype=float)

    def abs(self, pts: np.ndarray) -> np.ndarray:
        return np.abs(self(pts))

    # v = |V|^{1/2} and w = V/|V|^{1/2} (so that V = v w, |v| = |w| pointwise)
    def v_values(self, pts: np.ndarray) -> np.ndarray:
        return np.sqrt(np.abs(self(pts)))

    def w_values(self, pts: np.ndarray) -> np.ndarray:
        vals = self(pts)
        return np.sign(vals) * np.sqrt(np.abs(vals))

    def sample(self, grid: Grid) -> GridField:
        return grid.sample(lambda p: self(p).astype(complex))

    def v_field(self, grid: Grid) -> GridField:
        return grid.sample(lambda p: self.v_values(p).astype(complex))

    def w_field(self, grid: Grid) -> GridField:
        return grid.sample(lambda p: self.w_values(p).astype(complex))

    def enclosing_radius(self, x: np.ndarray) -> float:
        corners = np.array([[self.support_box[i, j] for i, j in
                             zip(range(3), c)] for c in
                            np.ndindex(2, 2, 2)])
        return float(np.max(np.linalg.norm(corners - x, axis=1)))

    def __add__(self, other: "PotentialSpec") -> "PotentialSpec":
        box = np.column_stack([
            np.minimum(self.support_box[:, 0], other.support_box[:, 0]),
            np.maximum(self.support_box[:, 1], other.support_box[:, 1])])
        f, g = self.evaluator, other.evaluator
        return PotentialSpec(
            label=f"({self.label})+({other.label})",
            evaluator=lambda p: f(p) + g(p),
            support_box=box,
            descriptor={"kind": "sum", "terms": [self.descriptor, other.descriptor]},
            singular_axis=self.singular_axis if self.singular_axis is not None
            else other.singular_axis,
            quad_hints={**other.quad_hints, **self.quad_hints})

    def __mul__(self, a: float) -> "PotentialSpec":
        f = self.evaluator
        return replace(self, label=f"{a}*({self.label})",
                       evaluator=lambda p: a * f(p),
                       descriptor={"kind": "scaled", "factor": a,
                                   "base": self.descriptor},
                       sup_bound=None if self.sup_bound is None
                       else abs(a) * self.sup_bound)

    __rmul__ = __mul__

    def __sub__(self, other: "PotentialSpec") -> "PotentialSpec":
        return self + (-1.0) * other


def zero_potential() -> PotentialSpec:
    return PotentialSpec("zero", lambda p: np.zeros(len(p)),
                         np.array([[0.0, 0.0]] * 3),
                         descriptor={"kind": "zero"}, sup_bound=0.0)


def ball_potential(radius: float = 1.0, amplitude: float = 1.0,
                   center=(0.0, 0.0, 0.0)) -> PotentialSpec:
    """Indicator of a ball; Kato norm 2 pi amplitude radius^2 at the center."""
    c = np.asarray(center, dtype=float)

    def ev(p):
        return amplitude * (np.sum((p - c) ** 2, axis=1) <= radius**2)

    def breaks(x):
        d = float(np.linalg.norm(np.asarray(x, float) - c))
        return [abs(radius - d), radius + d]

    box = np.column_stack([c - radius, c + radius])
    return PotentialSpec(f"ball(r={radius},a={amplitude})", ev, box,
                         descriptor={"kind": "ball", "radius": radius,
                                     "amplitude": amplitude, "center": list(c)},
                         radial_breaks=breaks, sup_bound=abs(amplitude))


def bump_potential(amplitude: float = 10.0, radius: float = 0.5,
                   center=(0.0, 0.0, 0.0)) -> PotentialSpec:
    """Smooth compactly supported bump, value = amplitude at the center."""
    c = np.asarray(center, dtype=float)

    def ev(p):
        q = np.sum((p - c) ** 2, axis=1) / radius**2
        out = np.zeros(len(p))
        inside = q < 1.0
        out[inside] = amplitude * np.exp(1.0 - 1.0 / (1.0 - q[inside]))
        return out

    box = np.column_stack([c - radius, c + radius])
    return PotentialSpec(f"bump(a={amplitude},r={radius})", ev, box,
                         descriptor={"kind": "bump", "amplitude": amplitude,
                                     "radius": radius, "center": list(c)},
                         sup_bound=abs(amplitude))


def _smooth_step(u: np.ndarray) -> np.ndarray:
    """C^inf transition 1 -> 0 on [0, 1]."""
    def s(t):
        out = np.zeros_like(t)
        pos = t > 0
        out[pos] = np.exp(-1.0 / t[pos])
        return out

    a = s(1.0 - u)
    b = s(u)
    return a / (a + b + 1e-300)


def example_potential(delta: float = 3.0) -> PotentialSpec:
    """The log-singular Kato-class fixture |x'|^{-2} |log|x'||^{-delta}.

    Singular along the x1-axis; equals the closed form for |x| <= 1/2 and is
    taken smoothly to zero over 1/2 <= |x| <= 3/4.  Membership in the Kato
    class needs delta > 2: the r-modulus decays like |log(1/r)|^{2-delta}.

    Distances to the axis are clamped at RHO_FLOOR; the neglected mass
    carries weight |log rho|^{1-delta} ~ 334^{1-delta} and is immaterial.
    """
    if delta <= 2.0:
        raise DomainError("example_potential needs delta > 2")

    def ev(p):
        rho = np.hypot(p[:, 1], p[:, 2])
        rho = np.maximum(rho, RHO_FLOOR)
        mag = np.linalg.norm(p, axis=1)
        core = rho ** -2.0 * np.abs(np.log(rho)) ** -delta
        return core * _smooth_step((mag - 0.5) / 0.25)

    def breaks(x):
        d = float(np.linalg.norm(np.asarray(x, float)))
        return [abs(0.5 - d), 0.5 + d, abs(0.75 - d), 0.75 + d]

    box = np.array([[-0.75, 0.75]] * 3)
    return PotentialSpec(
        f"log-singular(delta={delta})", ev, box,
        descriptor={"kind": "log_singular", "delta": delta},
        singular_axis=np.array([1.0, 0.0, 0.0]),
        radial_breaks=breaks,
        quad_hints={"v_max": 300.0, "u_depth": 300.0})


def from_descriptor(desc: dict) -> PotentialSpec:
    """Rebuild a potential from its JSON descriptor."""
    kind = desc.get("kind")
    if kind == "zero":
        return zero_potential()
    if kind == "ball":
        return ball_potential(desc["radius"], desc["amplitude"],
                              tuple(desc.get("center", (0, 0, 0))))
    if kind == "bump":
        return bump_potential(desc["amplitude"], desc["radius"],
                              tuple(desc.get("center", (0, 0, 0))))
    if kind == "log_singular":
        return example_potential(desc["delta"])
    if kind == "scaled":
        return desc["factor"] * from_descriptor(desc["base"])
    if kind == "sum":
        terms = [from_descriptor(t) for t in desc["terms"]]
        out = terms[0]
        for t in terms[1:]:
            out = out + t
        return out
    if kind == "mollified":
        return mollify(from_descriptor(desc["base"]), desc["delta"])
    raise DomainError(f"unknown potential descriptor kind: {kind!r}")


# ---------------------------------------------------------------------------
# the polar singular quadrature
# ---------------------------------------------------------------------------

_GAUSS = {n: np.polynomial.legendre.leggauss(n) for n in (3, 4, 6, 8)}


def _graded_nodes(length: float, n_gauss: int, first: float = 0.5,
                  extra_edges: Sequence[float] = ()) -> tuple[np.ndarray, np.ndarray]:
    """Gauss nodes on [0, length]: geometric panels plus explicit edges."""
    edges = {0.0, float(length)}
    e = first
    while e < length:
        edges.add(e)
        e *= 2.0
    for b in extra_edges:
        if 0.0 < b < length:
            edges.add(float(b))
    edges = np.array(sorted(edges))
    xg, wg = _GAUSS[n_gauss]
    ns, ws = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        ns.append(0.5 * (b - a) * xg + 0.5 * (a + b))
        ws.append(0.5 * (b - a) * wg)
    return np.concatenate(ns), np.concatenate(ws)


@dataclass(frozen=True)
class KatoQuadrature:
    """Settings for the polar quadrature and the argmax search."""

    # final (accurate) polar rule
    u_depth: float = 60.0       # radial grading: s down to radius * e^-u_depth
    v_max: float = 40.0         # angular grading depth in v = log tan(theta/2)
    n_phi: int = 16
    n_gauss_s: int = 8
    n_gauss_v: int = 6
    # candidate search
    search_lattice: int = 7
    refine_rounds: int = 2
    refine_points: int = 3
    top_k: int = 4
    dilation: float = 1.0
    # cheap rule used during the search
    search_scale: float = 0.4   # fraction of the angular/phi node counts
    # stability verification
    verify: bool = True
    tol: float = 5e-3
    r_schedule: tuple | None = None

    def resolve(self, V: PotentialSpec) -> "KatoQuadrature":
        """Merge the potential's depth hints (never shallower than defaults)."""
        h = V.quad_hints
        if not h:
            return self
        return replace(self,
                       u_depth=max(self.u_depth, h.get("u_depth", 0.0)),
                       v_max=max(self.v_max, h.get("v_max", 0.0)))


def _polar_frame(axis: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    a = axis / np.linalg.norm(axis)
    t = np.eye(3)[int(np.argmin(np.abs(a)))]
    e1 = t - (t @ a) * a
    e1 /= np.linalg.norm(e1)
    return a, e1, np.cross(a, e1)


def kato_integral(V: PotentialSpec, x, radius: float,
                  quad: KatoQuadrature, cheap: bool = False) -> float:
    """int_{|y-x| < radius} |V(y)| / |x-y| dy by the graded polar rule."""
    x = np.asarray(x, dtype=float).reshape(3)
    if radius <= 0:
        return 0.0
    axis = V.singular_axis if V.singular_axis is not None else np.array([0., 0., 1.])
    a, e1, e2 = _polar_frame(axis)

    scale = quad.search_scale if cheap else 1.0
    n_v_gauss = 4 if cheap else quad.n_gauss_v
    n_s_gauss = 4 if cheap else quad.n_gauss_s
    n_phi = max(4, int(round(quad.n_phi * scale)))
    v_max = quad.v_max if not cheap else max(20.0, quad.v_max * 0.5)
    u_depth = quad.u_depth if not cheap else max(30.0, quad.u_depth * 0.5)

    # angular nodes: v = log tan(theta/2); sin th = sech v, cos th = -tanh v
    v, vw = _graded_nodes(v_max, n_v_gauss)
    v = np.concatenate([-v[::-1], v])
    vw = np.concatenate([vw[::-1], vw])
    sin_t = 1.0 / np.cosh(v)
    cos_t = -np.tanh(v)
    ang_w = sin_t**2 * vw                      # sin(theta) dtheta = sech^2 v dv
    phi = (np.arange(n_phi) + 0.5) * 2.0 * np.pi / n_phi
    dirs = (sin_t[:, None, None]
            * (np.cos(phi)[None, :, None] * e1 + np.sin(phi)[None, :, None] * e2)
            + cos_t[:, None, None] * a).reshape(-1, 3)
    wang = np.outer(ang_w, np.full(n_phi, 2.0 * np.pi / n_phi)).ravel()

    # radial nodes: u = -log s graded on [u_r, u_r + u_depth], edges at breaks
    breaks = V.radial_breaks(x) if V.radial_breaks is not None else []
    u_r = -math.log(radius)
    extra = [-math.log(b) - u_r for b in breaks if 0.0 < b < radius]
    u_off, uw = _graded_nodes(u_depth, n_s_gauss, extra_edges=extra)
    s = np.exp(-(u_r + u_off))
    sw = uw * s**2                             # int s A(s) ds = int e^{-2u} A du

    pts = x[None, None, :] + s[:, None, None] * dirs[None, :, :]
    vals = V.abs(pts.reshape(-1, 3)).reshape(s.size, -1)
    return float(np.sum(sw * (vals @ wang)))


# ---------------------------------------------------------------------------
# norm, modulus, report
# ---------------------------------------------------------------------------

@dataclass
class KatoReport:
    """Global Kato norm, the radius-modulus table, and the attaining point."""

    norm: float
    modulus: list            # (r, sup-integral) pairs, r descending
    argmax_x: np.ndarray
    candidates_tried: int = 0

    def to_dict(self) -> dict:
        return {"norm": self.norm,
                "modulus": [[float(r), float(m)] for r, m in self.modulus],
                "argmax_x": [float(c) for c in self.argmax_x],
                "candidates_tried": self.candidates_tried}


def _candidate_lattice(box: np.ndarray, dilation: float, n: int) -> np.ndarray:
    lo = box[:, 0] - dilation
    hi = box[:, 1] + dilation
    axes = [np.linspace(lo[i], hi[i], n) for i in range(3)]
    X, Y, Z = np.meshgrid(*axes, indexing="ij")
    return np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)


def kato_norm(V: PotentialSpec, quad: KatoQuadrature = KatoQuadrature()) -> KatoReport:
    """Global Kato norm sup_x int |V(y)|/|x-y| dy with modulus table.

    The sup is searched on a lattice over the support box dilated by
    ``quad.dilation``, refined ``quad.refine_rounds`` times around the
    running argmax with a cheap version of the polar rule; the final value
    and the modulus table are evaluated at the surviving top candidates with
    the full rule.  Raises QuadratureFailure when a stability re-evaluation
    at boosted resolution moves the norm by more than ``quad.tol``.
    """
    quad = quad.resolve(V)
    search_V = V.search_surrogate or V
    R_of = V.enclosing_radius

    cands = _candidate_lattice(V.support_box, quad.dilation, quad.search_lattice)
    vals = np.array([kato_integral(search_V, x, R_of(x), quad, cheap=True)
                     for x in cands])
    tried = len(cands)
    order = np.argsort(vals)[::-1]
    best = [cands[i] for i in order[:quad.top_k]]

    step = float(np.max(V.support_box[:, 1] - V.support_box[:, 0]) + 2 * quad.dilation) \
        / max(quad.search_lattice - 1, 1)
    center = best[0]
    for _ in range(quad.refine_rounds):
        step *= 0.5
        local = _candidate_lattice(
            np.column_stack([center - step, center + step]), 0.0,
            quad.refine_points)
        lv = np.array([kato_integral(search_V, x, R_of(x), quad, cheap=True)
                       for x in local])
        tried += len(local)
        center = local[int(np.argmax(lv))]
    finalists = [center] + best

    # full-accuracy evaluation; modulus table shares the radial panels, so it
    # is monotone in r by construction
    if quad.r_schedule is not None:
        radii = sorted(set(float(r) for r in quad.r_schedule), reverse=True)
    else:
        radii = [2.0 ** (-k) for k in range(0, 9)]
    norm = -np.inf
    argmax = finalists[0]
    table = None
    for x in finalists:
        R = R_of(x)
        full = kato_integral(V, x, R, quad)
        mods = [kato_integral(V, x, min(r, R), quad) for r in radii]
        if full > norm:
            norm, argmax, table = full, x, mods
    if quad.verify:
        boosted = replace(quad, n_phi=quad.n_phi + 8, u_depth=quad.u_depth * 1.3,
                          v_max=quad.v_max * 1.3, verify=False)
        check = kato_integral(V, argmax, R_of(argmax), boosted)
        if abs(check - norm) > quad.tol * max(abs(norm), 1e-300) + 1e-300:
            raise QuadratureFailure(
                f"kato_norm({V.label}): value moved {abs(check - norm):.3e} "
                f"under refinement (norm {norm:.6e})")
    modulus = list(zip(radii, table))
    return KatoReport(norm=float(norm), modulus=modulus,
                      argmax_x=np.asarray(argmax), candidates_tried=tried)


def kato_modulus(V: PotentialSpec, radii: Sequence[float],
                 quad: KatoQuadrature = KatoQuadrature()) -> list:
    """Modulus table for an explicit radius schedule."""
    rep = kato_norm(V, replace(quad, r_schedule=tuple(radii)))
    return rep.modulus


# ---------------------------------------------------------------------------
# mollification
# ---------------------------------------------------------------------------

def _mollifier_nodes(n_gauss: int = 8) -> tuple[np.ndarray, np.ndarray]:
    """Nodes/weights for the unit bump phi(x) ~ exp(-1/(1-|x|^2)), unit mass.

    Tensor Gauss nodes on [-1, 1]^3, with weights phi(node) * w and the node
    set trimmed to the support; the weights are normalized to sum exactly to
    one so the discrete mollifier is a convex combination of translates.
    """
    xg, wg = np.polynomial.legendre.leggauss(n_gauss)
    X, Y, Z = np.meshgrid(xg, xg, xg, indexing="ij")
    W = (wg[:, None, None] * wg[None, :, None] * wg[None, None, :]).ravel()
    pts = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)
    q = np.sum(pts**2, axis=1)
    keep = q < 1.0
    pts, W, q = pts[keep], W[keep], q[keep]
    w = W * np.exp(-1.0 / (1.0 - q))
    return pts, w / w.sum()


def mollify(V: PotentialSpec, delta: float, n_gauss: int = 8) -> PotentialSpec:
    """V * phi_delta with phi_delta = delta^{-3} phi(./delta), unit-mass bump.

    Realized as sum_q w_q V(. - delta z_q) with w_q >= 0, sum w_q = 1; the
    Kato norm of the result is then bounded by the norm of V exactly (each
    translate has the same norm and the weights are convex).
    """
    if delta <= 0:
        raise DomainError("mollify needs delta > 0")
    nodes, wts = _mollifier_nodes(n_gauss)
    shifts = delta * nodes
    f = V.evaluator

    def ev(p):
        out = np.zeros(len(p))
        for z, w in zip(shifts, wts):
            out += w * f(p - z)
        return out

    box = V.support_box + np.array([[-delta, delta]] * 3)
    return PotentialSpec(
        label=f"mollify({V.label},{delta})",
        evaluator=ev,
        support_box=box,
        descriptor={"kind": "mollified", "base": V.descriptor, "delta": delta},
        singular_axis=V.singular_axis,
        search_surrogate=V.search_surrogate or V,
        quad_hints=dict(V.quad_hints),
        sup_bound=V.sup_bound)


# ---------------------------------------------------------------------------
# small + bounded splitting
# ---------------------------------------------------------------------------

def _truncate_above(V: PotentialSpec, level: float) -> PotentialSpec:
    f = V.evaluator

    def ev(p):
        vals = f(p)
        return np.where(np.abs(vals) > level, vals, 0.0)

    return replace(V, label=f"{V.label}|>{level:g}", evaluator=ev,
                   descriptor={"kind": "truncated_above", "level": level,
                               "base": V.descriptor},
                   search_surrogate=None, sup_bound=None)


def _clip_to(V: PotentialSpec, level: float) -> PotentialSpec:
    f = V.evaluator

    def ev(p):
        vals = f(p)
        return np.where(np.abs(vals) > level, 0.0, vals)

    return replace(V, label=f"{V.label}|<={level:g}", evaluator=ev,
                   descriptor={"kind": "clipped", "level": level,
                               "base": V.descriptor},
                   search_surrogate=None, sup_bound=level)


def split_small_bounded(V: PotentialSpec, eps: float,
                        quad: KatoQuadrature = KatoQuadrature(),
                        max_exponent: int = 60) -> tuple[PotentialSpec, PotentialSpec]:
    """Split V = V1 + V2 with ||V1||_Kato < eps and V2 bounded.

    V2 keeps the values with |V| <= M and V1 the overshoot, M the smallest
    power of two that achieves the bound (integer bisection over the
    exponent; the norm of the overshoot is nonincreasing in M).  The
    splitting V1 + V2 = V holds pointwise exactly.
    """
    if eps <= 0:
        raise DomainError("split_small_bounded needs eps > 0")
    quad = replace(quad, verify=False)

    def overshoot_norm(k: int) -> float:
        if V.sup_bound is not None and 2.0**k >= V.sup_bound:
            return 0.0
        return kato_norm(_truncate_above(V, 2.0**k), quad).norm

    lo, hi = -20, max_exponent
    if overshoot_norm(hi) >= eps:
        raise SplitFailure(
            f"no truncation level up to 2^{max_exponent} achieves "
            f"Kato norm < {eps:g}; V is not numerically Kato-class")
    if overshoot_norm(lo) < eps:
        hi = lo
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if overshoot_norm(mid) < eps:
            hi = mid
        else:
            lo = mid
    M = 2.0**hi
    return _truncate_above(V, M), _clip_to(V, M)
