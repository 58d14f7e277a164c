"""Calibration of the cone by the foliation of its complement.

Each side of the diagonal is filled by the dilations of one minimal
generating curve (a leaf) that leaves a coordinate axis orthogonally and
approaches the cone from that side. For the weight ``u^3 v^3`` a leaf with
tangent angle ``alpha`` satisfies, in arclength,

    u' = cos(alpha),  v' = sin(alpha),  alpha' = 3 (cos(alpha)/v - sin(alpha)/u).

The unit normals of the leaves form a vector field ``X`` with vanishing
weighted divergence; on the cone it is the normal pointing out of
``N = {u > v}``. Gauss-Green for ``X`` gives the flux identities used to
compare the cone with competitors inside the bumped ball.

The field is evaluated through a second parameterization of the base leaf
by the angular gap ``psi = theta - pi/4`` to the diagonal: with
``s = log r`` and ``beta`` the angle between the tangent and the radial
direction,

    ds/dpsi = cot(beta),
    dbeta/dpsi = -6 sin(beta + 2 psi) / (cos(2 psi) sin(beta)) - 1,

integrated in ``-log(psi)`` down to ``psi ~ 1e-300``. Since dilations only
shift ``s``, every leaf is read off this single table.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .errors import DomainError, InvalidInputError, SimonsConeError
from .geometry import (CONE_AREA_UNIT_BALL, DIAGONAL_ANGLE, ORBIT_WEIGHT,
                       DomainParams, GeneratingCurve, ReducedRegion,
                       boundary_normal, boundary_point, boundary_radius,
                       bump_crest,
                       cone_segment, cross_section_distance, weighted_area)
from .geometry import _GL_W, _GL_X
from .numerics import OdePath, OdeState, integrate_ode, integrate_samples

FIELD_RADIUS = 2.0
AXIS_START = 1e-3
PSI_FLOOR = 1e-300


class IntegrationError(SimonsConeError):
    pass


# ---------------------------------------------------------------------------
# Leaves
# ---------------------------------------------------------------------------

def _leaf_rhs(_, y):
    u, v, a = y
    return np.array([np.cos(a), np.sin(a), 3 * (np.cos(a) / v - np.sin(a) / u)])


def _axis_series_start(v0: float = 1.0):
    """State a short distance from the axis point ``(0, v0)``, from ``v = v0 + 3 u^2 / (8 v0)``."""
    u0 = AXIS_START * v0
    return u0, v0 + 3 * u0 ** 2 / (8 * v0), math.atan(3 * u0 / (4 * v0))


@dataclass(frozen=True)
class Leaf:
    """A leaf of the foliation on one side of the diagonal.

    ``side="above"`` (``v > u``) leaves the ``v``-axis at height ``scale``;
    ``"below"`` is its mirror image. ``path`` is the arclength integration
    in ``(u, v, alpha)`` for the unit-scale leaf, oriented as ``above``.
    """

    curve: GeneratingCurve
    side: str
    scale: float = 1.0
    path: OdePath | None = field(default=None, repr=False, compare=False)

    def scaled(self, lam: float) -> "Leaf":
        return Leaf(self.curve.scaled(lam), self.side, self.scale * lam, self.path)


def integrate_base_leaf(side: str = "above", tol: float = 1e-10,
                        radius: float = FIELD_RADIUS, n_vertices: int = 4001) -> Leaf:
    """Integrate the unit-scale leaf from its axis point out to ``radius``.

    Raises
    ------
    IntegrationError
        If the trajectory reaches the diagonal or the integrator underflows.
    """
    if tol > 1e-8:
        raise InvalidInputError("leaf integration needs tol <= 1e-8")
    if side not in ("above", "below"):
        raise InvalidInputError("side must be 'above' or 'below'")
    u0, v0, a0 = _axis_series_start()

    def stop(_, y):
        return y[0] * y[0] + y[1] * y[1] >= radius * radius or y[1] <= y[0]

    try:
        path = integrate_ode(_leaf_rhs, OdeState(0.0, [u0, v0, a0], 1e-4), stop, tol)
    except SimonsConeError as exc:
        raise IntegrationError(f"leaf integration failed: {exc}") from exc
    if np.any(path.y[:, 1] <= path.y[:, 0]):
        raise IntegrationError("leaf reached the diagonal")
    sigma = np.linspace(0.0, path.t[-1], n_vertices)
    body = path.evaluate(sigma)[:2].T
    u_head = np.linspace(0.0, u0, 9)[:-1]
    head = np.stack([u_head, 1 + 3 * u_head ** 2 / 8], axis=1)
    pts = np.vstack([head, body])
    curve = GeneratingCurve(pts, "above")
    if side == "below":
        curve = curve.reflected()
    return Leaf(curve, side, 1.0, path)


# ---------------------------------------------------------------------------
# The field
# ---------------------------------------------------------------------------

def _gap_rhs(tau, y):
    # independent variable tau = -log(psi); state (s, beta)
    psi = np.exp(-tau)
    beta = y[1]
    sb = np.sin(beta)
    ds = -psi * np.cos(beta) / sb
    dbeta = psi * (6 * np.sin(beta + 2 * psi) / (np.cos(2 * psi) * sb) + 1)
    return np.array([ds, dbeta])


def _gap_table(tol: float) -> tuple[OdePath, float]:
    u0, v0, a0 = _axis_series_start()
    r0 = math.hypot(u0, v0)
    theta0 = math.atan2(v0, u0)
    psi0 = theta0 - DIAGONAL_ANGLE
    tau_end = -math.log(PSI_FLOOR)
    init = OdeState(-math.log(psi0), [math.log(r0), a0 - theta0], 1e-4)
    path = integrate_ode(_gap_rhs, init, lambda t, _: t >= tau_end, tol)
    return path, psi0


@dataclass(frozen=True)
class CalibrationField:
    """Unit normal field of the foliation, oriented away from ``N = {u > v}``.

    Construct with `build_calibration_field`. Instances are immutable and can
    be shared between threads.
    """

    leaves: tuple[Leaf, Leaf]
    table: OdePath = field(repr=False)
    psi_start: float
    radius: float = FIELD_RADIUS

    def _gap_state(self, psi):
        """``(s, beta)`` of the base leaf at angular gap ``psi > 0`` (array)."""
        psi = np.asarray(psi, dtype=float)
        s = np.empty_like(psi)
        beta = np.empty_like(psi)
        near_axis = psi > self.psi_start
        deep = psi < PSI_FLOOR
        mid = ~(near_axis | deep)
        if np.any(mid):
            st = self.table.evaluate(-np.log(psi[mid]))
            s[mid], beta[mid] = st[0], st[1]
        if np.any(near_axis):
            eta = DIAGONAL_ANGLE - psi[near_axis]
            s[near_axis] = 7 * eta ** 2 / 8
            beta[near_axis] = -np.pi / 2 + 7 * eta / 4
        if np.any(deep):
            s_end, _ = self.table.y[-1]
            s[deep] = s_end + (np.log(PSI_FLOOR) - np.log(np.maximum(psi[deep], 1e-320))) / 3
            beta[deep] = -3 * psi[deep]
        return s, beta

    def __call__(self, points) -> np.ndarray:
        return field_X(points, self)


@lru_cache(maxsize=4)
def build_calibration_field(tol: float = 1e-12) -> CalibrationField:
    """Integrate both base leaves and the angular-gap table."""
    above = integrate_base_leaf("above", tol=max(tol, 1e-12))
    below = integrate_base_leaf("below", tol=max(tol, 1e-12))
    table, psi0 = _gap_table(tol)
    return CalibrationField((below, above), table, psi0)


def _polar(points):
    p = np.asarray(points, dtype=float)
    single = p.ndim == 1
    p = np.atleast_2d(p)
    if np.any(p < -1e-12):
        raise DomainError("point outside the closed quadrant")
    r = np.hypot(p[:, 0], p[:, 1])
    theta = np.arctan2(p[:, 1], p[:, 0])
    return p, r, theta, single


def _check_radius(r, radius):
    if np.any(r > radius * (1 + 1e-12)):
        raise DomainError(f"point beyond the field radius {radius}")
    if np.any(r == 0):
        raise DomainError("the field is singular at the vertex")


def leaf_through(point, field: CalibrationField) -> tuple[float, np.ndarray]:
    """Dilation factor ``lam`` of the leaf through ``point`` and the foot point.

    The leaf through ``point`` is ``lam`` times the base leaf on the same
    side; the foot is the image under that dilation of the base-leaf point at
    the same angular gap, so it coincides with ``point`` up to rounding.
    """
    p, r, theta, _ = _polar(point)
    _check_radius(r, field.radius)
    psi = theta[0] - DIAGONAL_ANGLE
    if psi == 0:
        raise DomainError("point on the cone: no leaf passes through it")
    s, _ = field._gap_state(np.array([abs(psi)]))
    lam = float(r[0] * math.exp(-s[0]))
    rho = math.exp(s[0])
    foot = lam * rho * np.array([math.cos(theta[0]), math.sin(theta[0])])
    return lam, foot


def field_X(points, field: CalibrationField) -> np.ndarray:
    """Unit calibrating field at quadrant points (shape ``(2,)`` or ``(n, 2)``).

    On the diagonal the value is the cone normal ``(-1, 1)/sqrt(2)``.
    """
    p, r, theta, single = _polar(points)
    _check_radius(r, field.radius)
    psi = theta - DIAGONAL_ANGLE
    _, beta = field._gap_state(np.abs(psi))
    beta = np.where(psi == 0, 0.0, beta)
    radial = -np.sign(psi) * np.sin(beta)
    angular = np.cos(beta)
    c, s = np.cos(theta), np.sin(theta)
    X = np.stack([radial * c - angular * s, radial * s + angular * c], axis=1)
    return X[0] if single else X


def divergence_residual(points, field: CalibrationField | Callable, h: float) -> np.ndarray:
    """Weighted divergence ``(u^3 v^3)^-1 div(u^3 v^3 X)`` by central differences."""
    p = np.atleast_2d(np.asarray(points, dtype=float))
    fn = field if not isinstance(field, CalibrationField) else (lambda q: field_X(q, field))
    radius = field.radius if isinstance(field, CalibrationField) else np.inf
    if np.any(p < 2 * h) or np.any(np.hypot(p[:, 0], p[:, 1]) + 2 * h > radius):
        raise InvalidInputError("difference stencil leaves the domain")
    eu = np.array([h, 0.0])
    ev = np.array([0.0, h])

    def flux(q, comp):
        return (q[:, 0] * q[:, 1]) ** 3 * fn(q)[:, comp]

    div = (flux(p + eu, 0) - flux(p - eu, 0) + flux(p + ev, 1) - flux(p - ev, 1)) / (2 * h)
    return np.abs(div) / (p[:, 0] * p[:, 1]) ** 3


def interior_sample_grid(n_radii: int = 15, n_angles: int = 21, r_min: float = 0.5,
                         r_max: float = 1.9, theta_margin: float = 0.25) -> np.ndarray:
    """Polar sample grid kept away from the axes, the origin and the diagonal.

    Near the axes the weight ``u^3 v^3`` amplifies the stencil error, so the
    convergence study uses points with ``theta`` at least ``theta_margin``
    from both axes. The diagonal itself is dropped because the field is only
    Lipschitz across it.
    """
    r = np.linspace(r_min, r_max, n_radii)
    th = np.linspace(theta_margin, math.pi / 2 - theta_margin, n_angles)
    th = th[np.abs(th - DIAGONAL_ANGLE) > 1e-9]
    R, T = np.meshgrid(r, th)
    return np.stack([(R * np.cos(T)).ravel(), (R * np.sin(T)).ravel()], axis=1)


# ---------------------------------------------------------------------------
# Flux identities
# ---------------------------------------------------------------------------

def _breakpoints(params: DomainParams, lo: float, hi: float):
    from .geometry import angle_for_distance
    ups = params.upsilon
    cands = [lo, hi, DIAGONAL_ANGLE]
    for d in (ups, 2 * ups):
        for side in (+1, -1):
            cands.append(angle_for_distance(d, side))
    return np.unique([c for c in cands if lo <= c <= hi])


def boundary_flux(params: DomainParams, field: CalibrationField, theta0: float,
                  theta1: float, points_per_piece: int = 2001) -> float:
    """``int X . n dA`` over the boundary arc ``theta0 <= theta <= theta1``.

    Composite Simpson in ``theta`` with the orbit density ``(2 pi^2)^2 u^3 v^3``
    and the unnormalized normal (normal times line element); pieces break where
    the cutoff changes regime.
    """
    if theta1 < theta0:
        return -boundary_flux(params, field, theta1, theta0, points_per_piece)
    if theta1 == theta0:
        return 0.0
    total = 0.0
    knots = _breakpoints(params, theta0, theta1)
    for a, b in zip(knots[:-1], knots[1:]):
        th = np.linspace(a, b, points_per_piece)
        pts = boundary_point(th, params)
        nrm = boundary_normal(th, params, unit=False)
        X = field_X(pts, field)
        dens = (pts[:, 0] * pts[:, 1]) ** 3 * np.sum(X * nrm, axis=1)
        total += integrate_samples(dens, (b - a) / (points_per_piece - 1))
    return ORBIT_WEIGHT * total


@dataclass
class GaussGreenResult:
    surface_area: float
    boundary_flux: float
    discrepancy: float


def gauss_green_check(region: ReducedRegion, field: CalibrationField,
                      params: DomainParams | None = None) -> GaussGreenResult:
    """Compare the cone area in ``region`` with minus the flux of ``X`` through the rest.

    With ``params`` the region must be the reduced ``N cap Omega`` and the
    flux is taken by theta-quadrature over the analytic boundary arc;
    otherwise it is summed over the polygon edges off the diagonal.
    """
    if region.is_degenerate():
        return GaussGreenResult(0.0, 0.0, 0.0)
    loop = np.vstack([region.loop, region.loop[:1]])
    a, b = loop[:-1], loop[1:]
    on_diag = (np.abs(a[:, 0] - a[:, 1]) <= 1e-12) & (np.abs(b[:, 0] - b[:, 1]) <= 1e-12)
    area = sum(weighted_area(GeneratingCurve(np.array([p, q])))
               for p, q in zip(a[on_diag], b[on_diag]))
    if params is not None:
        flux = -boundary_flux(params, field, 0.0, DIAGONAL_ANGLE)
    else:
        d = (b - a)[~on_diag]
        seg = np.hypot(d[:, 0], d[:, 1])
        keep = seg > 0
        d, seg, start = d[keep], seg[keep], a[~on_diag][keep]
        pts = (start[:, None, :] + _GL_X[None, :, None] * d[:, None, :]).reshape(-1, 2)
        wts = (seg[:, None] * _GL_W[None, :]).reshape(-1)
        # counter-clockwise loop: the outward normal is the tangent turned clockwise
        n_out = np.repeat(np.stack([d[:, 1], -d[:, 0]], axis=1) / seg[:, None], 4, axis=0)
        dens = (pts[:, 0] * pts[:, 1]) ** 3
        ok = dens > 0
        Xn = np.zeros(len(pts))
        Xn[ok] = np.sum(field_X(pts[ok], field) * n_out[ok], axis=1)
        flux = -ORBIT_WEIGHT * float(np.sum(dens * Xn * wts))
    disc = abs(area - flux) / area if area else abs(flux)
    return GaussGreenResult(area, flux, disc)


# ---------------------------------------------------------------------------
# Boundary sign conditions
# ---------------------------------------------------------------------------

@dataclass
class SignBandReport:
    d: np.ndarray
    flux_N_side: np.ndarray
    flux_far_side: np.ndarray
    center_value: float
    center_ok: bool
    N_side_ok: bool
    far_side_ok: bool
    d_safe: float
    d_crest: float
    offending: tuple | None = None

    @property
    def passed(self) -> bool:
        return self.center_ok and self.N_side_ok and self.far_side_ok


def _normal_flux_at_distance(d, side, params, field):
    from .geometry import angle_for_distance
    th = angle_for_distance(d, side)
    pts = boundary_point(th, params)
    return np.sum(field_X(pts, field) * boundary_normal(th, params), axis=1)


def sign_band_check(params: DomainParams, field: CalibrationField, n_samples: int = 1000,
                    band: float | None = None, center_tol: float = 1e-6,
                    scan_points: int = 4000) -> SignBandReport:
    """Signs of ``X . n`` on the boundary near the cone trace.

    Samples ``d`` uniformly in ``(0, band]`` (default ``upsilon/2``) on each
    side. ``d_safe`` is the largest scanned distance up to which both strict
    signs hold; ``d_crest`` is the bump maximum.
    """
    if n_samples < 1:
        raise InvalidInputError("n_samples must be positive")
    band = params.upsilon / 2 if band is None else band
    d = band * np.arange(1, n_samples + 1) / n_samples
    fN = _normal_flux_at_distance(d, +1, params, field)
    fF = _normal_flux_at_distance(d, -1, params, field)
    c_pt = boundary_point(DIAGONAL_ANGLE, params)
    center = float(field_X(c_pt, field) @ boundary_normal(DIAGONAL_ANGLE, params))
    offending = None
    n_ok = bool(np.all(fN > 0))
    f_ok = bool(np.all(fF < 0))
    if not n_ok:
        i = int(np.argmax(~(fN > 0)))
        offending = ("N side", float(d[i]), float(fN[i]))
    elif not f_ok:
        i = int(np.argmax(~(fF < 0)))
        offending = ("far side", float(d[i]), float(fF[i]))
    scan = 2 * params.upsilon * np.arange(1, scan_points + 1) / scan_points
    good = (_normal_flux_at_distance(scan, +1, params, field) > 0) & (
        _normal_flux_at_distance(scan, -1, params, field) < 0)
    first_bad = np.flatnonzero(~good)
    if first_bad.size == 0:
        d_safe = float(scan[-1])
    elif first_bad[0] == 0:
        d_safe = 0.0
    else:
        d_safe = float(scan[first_bad[0] - 1])
    return SignBandReport(d, fN, fF, center, abs(center) <= center_tol, n_ok, f_ok,
                          d_safe, bump_crest(params), offending)


# ---------------------------------------------------------------------------
# Minimality
# ---------------------------------------------------------------------------

@dataclass
class MinimalityReport:
    """Terms of ``|M'| >= |M| + flux over (N minus N') - flux over (N' minus N)``."""

    lhs: float
    cone_area: float
    flux_lost: float
    flux_gained: float
    slack: float
    calibration_defect: float
    flux_identity_gap: float
    endpoint_distance: float
    in_regime: bool
    passed: bool | None

    @property
    def rhs(self) -> float:
        return self.cone_area + self.flux_lost - self.flux_gained

    @property
    def area_excess(self) -> float:
        return self.lhs - self.cone_area


def default_safe_distance(params: DomainParams) -> float:
    return 0.6 * bump_crest(params)


def minimality_check(competitor: GeneratingCurve, params: DomainParams,
                     field: CalibrationField, d_safe: float | None = None,
                     rel_tol: float = 1e-6) -> MinimalityReport:
    """Evaluate every term of the calibration inequality for one competitor.

    The competitor runs from the origin to the reduced boundary. Competitors
    whose endpoint lies farther than ``d_safe`` from the cone trace are
    reported as out of regime (``passed is None``).
    """
    if len(competitor) < 2:
        raise InvalidInputError("competitor needs at least two vertices")
    d_safe = default_safe_distance(params) if d_safe is None else d_safe
    end = competitor.vertices[-1]
    theta_e = float(np.arctan2(end[1], end[0]))
    if abs(math.hypot(*end) - boundary_radius(theta_e, params)) > 1e-9:
        raise InvalidInputError("competitor must end on the domain boundary")
    d_e = cross_section_distance(theta_e)
    lhs = weighted_area(competitor)
    cone_area = weighted_area(cone_segment(1.0))
    if theta_e < DIAGONAL_ANGLE:
        lost, gained = boundary_flux(params, field, theta_e, DIAGONAL_ANGLE), 0.0
    else:
        lost, gained = 0.0, boundary_flux(params, field, DIAGONAL_ANGLE, theta_e)
    slack = lhs - (cone_area + lost - gained)

    pts, wts, tang = competitor.gauss_nodes()
    nu = np.stack([-tang[:, 1], tang[:, 0]], axis=1)
    flat = pts.reshape(-1, 2)
    ok = np.hypot(flat[:, 0], flat[:, 1]) > 0
    Xnu = np.ones(len(flat))
    Xnu[ok] = np.sum(field_X(flat[ok], field) * np.repeat(nu, 4, axis=0)[ok], axis=1)
    dens = (flat[:, 0] * flat[:, 1]) ** 3 * wts.reshape(-1)
    calibrated = ORBIT_WEIGHT * float(np.sum(dens * Xnu))
    defect = ORBIT_WEIGHT * float(np.sum(dens * (1 - Xnu)))
    gap = abs(calibrated + boundary_flux(params, field, 0.0, theta_e))
    in_regime = bool(d_e <= d_safe)
    passed = bool(slack >= -rel_tol * lhs) if in_regime else None
    return MinimalityReport(lhs, cone_area, lost, gained, slack, defect, gap,
                            float(d_e), in_regime, passed)


__all__ = [
    "CONE_AREA_UNIT_BALL", "CalibrationField", "GaussGreenResult", "IntegrationError",
    "Leaf", "MinimalityReport", "SignBandReport", "boundary_flux",
    "build_calibration_field", "default_safe_distance", "divergence_residual",
    "field_X", "gauss_green_check", "integrate_base_leaf", "interior_sample_grid",
    "leaf_through", "minimality_check", "sign_band_check",
]
