"""O(4)xO(4)-reduced geometry of the cone, the unit ball and the bumped ball.

A point of R^8 = R^4 x R^4 is reduced to ``(u, v) = (|x'|, |x''|)`` in the
closed quadrant. The cone is the diagonal ``u = v``; hypersurfaces invariant
under the symmetry group are generated by planar curves, with 7-dimensional
area ``(2 pi^2)^2 * int u^3 v^3 ds`` and enclosed 8-dimensional volume
``(2 pi^2)^2 * iint u^3 v^3 du dv``.

The deformed domain is a radial graph over the unit sphere,
``rho(theta) = 1 + K * phi(d(theta))`` with ``phi(a) = a^2 chi(a)``, where
``d`` is the Euclidean distance to the cone trace on the sphere and ``chi`` a
C^2 cutoff supported in ``[0, 2*upsilon)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import shapely

from .errors import ConstraintError, InvalidInputError
from .numerics import Bracket, find_root

SPHERE3_AREA = 2 * np.pi ** 2
ORBIT_WEIGHT = SPHERE3_AREA ** 2
DIAGONAL_ANGLE = np.pi / 4
CONE_AREA_UNIT_BALL = np.pi ** 4 / 14

CHI_PROFILES = ("smootherstep",)

# 4-point Gauss-Legendre on [0, 1]; exact through degree 7
_GL_X, _GL_W = np.polynomial.legendre.leggauss(4)
_GL_X = 0.5 * (_GL_X + 1)
_GL_W = 0.5 * _GL_W


@dataclass(frozen=True)
class DomainParams:
    """Bump deformation of the unit ball along the cone trace."""

    K: float = 8.0
    upsilon: float = 0.1
    chi: str = "smootherstep"

    def __post_init__(self):
        if not np.isfinite(self.K):
            raise InvalidInputError("K must be finite")
        if not 0 < self.upsilon <= 0.3:
            raise InvalidInputError("upsilon must lie in (0, 0.3]")
        if self.chi not in CHI_PROFILES:
            raise InvalidInputError(f"unknown cutoff profile {self.chi!r}")


# ---------------------------------------------------------------------------
# Bump profile and boundary curve
# ---------------------------------------------------------------------------

def _smootherstep_down(s):
    return 1 - s ** 3 * (10 - 15 * s + 6 * s ** 2)


def _smootherstep_down_prime(s):
    return -30 * s ** 2 * (1 - s) ** 2


def chi(a, params: DomainParams):
    a = np.asarray(a, dtype=float)
    ups = params.upsilon
    s = np.clip((a - ups) / ups, 0.0, 1.0)
    return np.where(a >= 2 * ups, 0.0, _smootherstep_down(s))


def chi_prime(a, params: DomainParams):
    a = np.asarray(a, dtype=float)
    ups = params.upsilon
    s = np.clip((a - ups) / ups, 0.0, 1.0)
    return _smootherstep_down_prime(s) / ups


def bump(a, params: DomainParams):
    """``phi(a) = a^2 chi(a)``; zero with zero slope at ``a = 0``, zero for ``a >= 2 upsilon``."""
    a = np.asarray(a, dtype=float)
    if np.any(a < 0):
        raise InvalidInputError("bump argument must be nonnegative")
    out = a ** 2 * chi(a, params)
    return float(out) if out.ndim == 0 else out


def bump_prime(a, params: DomainParams):
    a = np.asarray(a, dtype=float)
    out = 2 * a * chi(a, params) + a ** 2 * chi_prime(a, params)
    return float(out) if out.ndim == 0 else out


def bump_crest(params: DomainParams) -> float:
    """Location ``d*`` of the strict maximum of the bump, inside ``(upsilon, 2 upsilon)``."""
    ups = params.upsilon
    return find_root(lambda a: bump_prime(a, params),
                     Bracket(ups, 2 * ups * (1 - 1e-12), 1e-14))


def _check_theta(theta):
    theta = np.asarray(theta, dtype=float)
    if np.any(theta < 0) or np.any(theta > np.pi / 2) or not np.all(np.isfinite(theta)):
        raise InvalidInputError("theta must lie in [0, pi/2]")
    return theta


def cross_section_distance(theta):
    """Chordal distance in R^8 from the sphere point at angle ``theta`` to the cone trace."""
    theta = _check_theta(theta)
    out = 2 * np.abs(np.sin((theta - DIAGONAL_ANGLE) / 2))
    return float(out) if out.ndim == 0 else out


def _distance_prime(theta):
    delta = theta - DIAGONAL_ANGLE
    return np.sign(delta) * np.cos(delta / 2)


def angle_for_distance(d, side: int = +1):
    """Inverse of ``cross_section_distance``; ``side=+1`` picks ``theta < pi/4`` (u > v)."""
    d = np.asarray(d, dtype=float)
    out = DIAGONAL_ANGLE - side * 2 * np.arcsin(d / 2)
    return float(out) if out.ndim == 0 else out


def boundary_radius(theta, params: DomainParams):
    theta = _check_theta(theta)
    out = 1 + params.K * bump(2 * np.abs(np.sin((theta - DIAGONAL_ANGLE) / 2)), params)
    return float(out) if np.ndim(out) == 0 else out


def boundary_radius_prime(theta, params: DomainParams):
    theta = _check_theta(theta)
    d = 2 * np.abs(np.sin((theta - DIAGONAL_ANGLE) / 2))
    out = params.K * bump_prime(d, params) * _distance_prime(theta)
    return float(out) if np.ndim(out) == 0 else out


def boundary_point(theta, params: DomainParams) -> np.ndarray:
    theta = _check_theta(theta)
    rho = boundary_radius(theta, params)
    return np.stack([rho * np.cos(theta), rho * np.sin(theta)], axis=-1)


def boundary_normal(theta, params: DomainParams, *, unit: bool = True) -> np.ndarray:
    """Outward normal of the reduced boundary curve at angle ``theta``.

    With ``unit=False`` the vector has length ``|d(point)/d theta|``, i.e. it
    is the normal times the line element, which is what flux quadratures
    over ``theta`` want.
    """
    theta = _check_theta(theta)
    rho = boundary_radius(theta, params)
    drho = boundary_radius_prime(theta, params)
    c, s = np.cos(theta), np.sin(theta)
    n = np.stack([rho * c + drho * s, rho * s - drho * c], axis=-1)
    if unit:
        n = n / np.linalg.norm(n, axis=-1, keepdims=True)
    return n


def inside_domain(points, params: DomainParams, slack: float = 1e-12) -> np.ndarray:
    """True where a quadrant point lies in the closed reduced domain."""
    p = np.atleast_2d(points)
    r = np.hypot(p[:, 0], p[:, 1])
    theta = np.arctan2(np.clip(p[:, 1], 0, None), np.clip(p[:, 0], 0, None))
    return (p[:, 0] >= -slack) & (p[:, 1] >= -slack) & (
        r <= boundary_radius(theta, params) + slack)


# ---------------------------------------------------------------------------
# Curves and regions
# ---------------------------------------------------------------------------

SIDES = ("below", "above", "diagonal", "mixed")


@dataclass(frozen=True)
class GeneratingCurve:
    """Polyline in the (u, v) quadrant generating an O(4)xO(4)-invariant hypersurface.

    ``side`` records which component of the quadrant minus the diagonal the
    curve lives in: ``"below"`` is ``u > v``, ``"above"`` is ``v > u``.
    """

    vertices: np.ndarray
    side: str = "mixed"
    arclength: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float).reshape(-1, 2)
        if self.side not in SIDES:
            raise InvalidInputError(f"side must be one of {SIDES}")
        if np.any(v < -1e-12):
            raise InvalidInputError("curve leaves the closed quadrant")
        seg = np.hypot(*np.diff(v, axis=0).T)
        if v.shape[0] > 1 and np.any(seg == 0):
            raise InvalidInputError("consecutive vertices coincide")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "arclength",
                           np.concatenate([[0.0], np.cumsum(seg)]))

    @classmethod
    def empty(cls):
        return cls(np.zeros((0, 2)))

    def __len__(self):
        return self.vertices.shape[0]

    @property
    def length(self) -> float:
        return float(self.arclength[-1]) if len(self) else 0.0

    def scaled(self, lam: float) -> "GeneratingCurve":
        return GeneratingCurve(lam * self.vertices, self.side)

    def reflected(self) -> "GeneratingCurve":
        swap = {"below": "above", "above": "below"}
        return GeneratingCurve(self.vertices[:, ::-1], swap.get(self.side, self.side))

    def reversed(self) -> "GeneratingCurve":
        return GeneratingCurve(self.vertices[::-1], self.side)

    def gauss_nodes(self):
        """Gauss points, weights (times segment length) and unit tangents per segment."""
        p = self.vertices
        d = np.diff(p, axis=0)
        seg = np.hypot(d[:, 0], d[:, 1])
        pts = p[:-1, None, :] + _GL_X[None, :, None] * d[:, None, :]
        wts = seg[:, None] * _GL_W[None, :]
        tang = d / seg[:, None]
        return pts, wts, tang


def cone_segment(radius: float = 1.0, n: int = 2) -> GeneratingCurve:
    t = np.linspace(0.0, radius, n)
    return GeneratingCurve(np.stack([t, t], axis=1) / np.sqrt(2), "diagonal")


def weighted_area(curve: GeneratingCurve) -> float:
    """Area of the hypersurface generated by ``curve``; exact for the polyline."""
    if len(curve) < 2:
        return 0.0
    pts, wts, _ = curve.gauss_nodes()
    dens = (pts[..., 0] * pts[..., 1]) ** 3
    return float(ORBIT_WEIGHT * np.sum(dens * wts))


@dataclass(frozen=True)
class ReducedRegion:
    """Closed loop of curve pieces bounding a reduced region, stored counter-clockwise."""

    pieces: Sequence[GeneratingCurve]
    loop: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        parts = [c.vertices for c in self.pieces if len(c)]
        if not parts:
            object.__setattr__(self, "loop", np.zeros((0, 2)))
            return
        pts = [parts[0]]
        for p in parts[1:]:
            if np.allclose(pts[-1][-1], p[0], atol=1e-12, rtol=0):
                p = p[1:]
            pts.append(p)
        loop = np.concatenate(pts)
        if len(loop) > 1 and np.allclose(loop[0], loop[-1], atol=1e-12, rtol=0):
            loop = loop[:-1]
        keep = np.ones(len(loop), bool)
        keep[1:] = np.any(np.diff(loop, axis=0) != 0, axis=1)
        loop = loop[keep]
        if _signed_area(loop) < 0:
            loop = loop[::-1]
        object.__setattr__(self, "loop", loop)

    def scaled(self, lam: float) -> "ReducedRegion":
        return ReducedRegion([GeneratingCurve(lam * self.loop)])

    def is_degenerate(self) -> bool:
        return len(self.loop) < 3 or abs(_signed_area(self.loop)) == 0.0


def _signed_area(loop):
    if len(loop) < 3:
        return 0.0
    x, y = loop[:, 0], loop[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def weighted_volume(region: ReducedRegion) -> float:
    """Volume of the O(4)xO(4)-invariant set generated by ``region``.

    Uses Green's theorem with the potential ``u^4 v^3 / 4``; the per-segment
    Gauss rule is exact for polygons.
    """
    loop = region.loop
    if len(loop) < 3:
        return 0.0
    if not shapely.LinearRing(loop).is_simple:
        raise InvalidInputError("region boundary self-intersects")
    if region.is_degenerate():
        return 0.0
    closed = np.vstack([loop, loop[:1]])
    d = np.diff(closed, axis=0)
    pts = closed[:-1, None, :] + _GL_X[None, :, None] * d[:, None, :]
    integrand = pts[..., 0] ** 4 * pts[..., 1] ** 3 / 4
    vol = np.sum(integrand * _GL_W[None, :] * d[:, 1:2])
    return float(ORBIT_WEIGHT * vol)


ARC_NODES = 2 ** 14


def boundary_arc(params: DomainParams, theta0: float, theta1: float,
                 n_base: int = ARC_NODES) -> GeneratingCurve:
    """Polyline of the reduced boundary from ``theta0`` to ``theta1``.

    Nodes are a fixed uniform grid on ``[0, pi/2]`` plus the two endpoints, so
    arcs sharing a sub-range share their vertices exactly.
    """
    lo, hi = sorted((theta0, theta1))
    grid = np.linspace(0.0, np.pi / 2, n_base + 1)
    th = np.unique(np.concatenate([[lo, hi], grid[(grid > lo) & (grid < hi)]]))
    if theta0 > theta1:
        th = th[::-1]
    return GeneratingCurve(boundary_point(th, params))


def cone_region(params: DomainParams) -> ReducedRegion:
    """Reduced ``N cap Omega`` with ``N = {u > v}``."""
    corner = boundary_point(0.0, params)
    return ReducedRegion([
        GeneratingCurve(np.array([[0.0, 0.0], corner])),
        boundary_arc(params, 0.0, DIAGONAL_ANGLE),
        cone_segment(1.0).reversed(),
    ])


def competitor_region(curve: GeneratingCurve, params: DomainParams) -> ReducedRegion:
    """Region under a competitor running from the origin to the reduced boundary."""
    end = curve.vertices[-1]
    theta_e = float(np.arctan2(end[1], end[0]))
    corner = boundary_point(0.0, params)
    return ReducedRegion([
        GeneratingCurve(np.array([[0.0, 0.0], corner])),
        boundary_arc(params, 0.0, theta_e),
        curve.reversed(),
    ])


# ---------------------------------------------------------------------------
# Competitors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PerturbationSpec:
    """Perturbation of the cone segment.

    ``end_offset`` is the signed distance of the boundary endpoint from the
    cone trace (positive moves it into ``u > v``). ``amplitudes[k-1]`` is the
    coefficient of ``sin(k pi tau)`` in the normal displacement along the
    chord from the origin to the endpoint. With ``volume_match`` a multiple
    of ``sin(pi tau)`` is added so the enclosed volume equals the cone's.
    """

    end_offset: float = 0.0
    amplitudes: tuple = ()
    volume_match: bool = False
    n_vertices: int = 2049


def random_perturbation(seed: int, params: DomainParams, *, n_modes: int = 4,
                        volume_match: bool = True) -> PerturbationSpec:
    """Seeded perturbation well inside the C^0 band around the cone trace."""
    rng = np.random.default_rng(seed)
    ups = params.upsilon
    end = rng.uniform(-ups / 8, ups / 8)
    k = np.arange(1, n_modes + 1)
    amps = rng.normal(0.0, ups / 16, n_modes) / k
    amps[0] = 0.0
    return PerturbationSpec(float(end), tuple(float(a) for a in amps), volume_match)


def _competitor_vertices(spec: PerturbationSpec, params: DomainParams, extra: float):
    theta_e = angle_for_distance(abs(spec.end_offset), np.sign(spec.end_offset) or 1)
    end = boundary_point(theta_e, params)
    normal = np.array([np.sin(theta_e), -np.cos(theta_e)])
    tau = np.linspace(0.0, 1.0, spec.n_vertices)
    w = extra * np.sin(np.pi * tau)
    for k, a in enumerate(spec.amplitudes, start=1):
        w = w + a * np.sin(k * np.pi * tau)
    pts = tau[:, None] * end[None, :] + w[:, None] * normal[None, :]
    return pts, w, tau


def _validate_competitor(pts, w, tau, spec, params):
    ups = params.upsilon
    near = tau >= 0.5
    amp = max(abs(spec.end_offset), float(np.max(np.abs(w[near]))))
    if amp > ups / 2:
        raise ConstraintError(
            f"C0 amplitude {amp:.4g} near the boundary exceeds upsilon/2 = {ups / 2:.4g}")
    if np.any(pts < -1e-14):
        raise ConstraintError("competitor leaves the quadrant")
    if not np.all(inside_domain(pts[:-1], params)):
        raise ConstraintError("competitor leaves the domain")


def make_competitor(spec: PerturbationSpec, params: DomainParams) -> GeneratingCurve:
    """Competitor curve from the origin to the reduced boundary near the cone trace.

    Raises
    ------
    ConstraintError
        If the perturbation is not C^0-close to the cone near the boundary or
        the curve leaves the domain, or if no volume-matching coefficient exists.
    """
    if spec.end_offset == 0 and not any(spec.amplitudes) and not spec.volume_match:
        return cone_segment(1.0, spec.n_vertices)
    extra = 0.0
    if spec.volume_match:
        target = weighted_volume(cone_region(params))

        def excess(c):
            pts, _, _ = _competitor_vertices(spec, params, c)
            curve = GeneratingCurve(np.clip(pts, 0, None))
            return weighted_volume(competitor_region(curve, params)) / target - 1

        lim = params.upsilon / 2
        try:
            extra = find_root(excess, Bracket(-lim, lim, 1e-14))
        except ValueError as exc:
            raise ConstraintError(f"cannot match the cone volume: {exc}") from exc
    pts, w, tau = _competitor_vertices(spec, params, extra)
    _validate_competitor(pts, w, tau, spec, params)
    return GeneratingCurve(np.clip(pts, 0, None))
