import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from simonscone.calibration import (build_calibration_field, divergence_residual,
                                    field_X, gauss_green_check, integrate_base_leaf,
                                    interior_sample_grid, leaf_through, minimality_check,
                                    sign_band_check)
from simonscone.errors import DomainError, InvalidInputError
from simonscone.geometry import (CONE_AREA_UNIT_BALL, DIAGONAL_ANGLE, DomainParams,
                                 GeneratingCurve, PerturbationSpec, ReducedRegion,
                                 angle_for_distance, boundary_point, cone_region,
                                 make_competitor, random_perturbation)

P = DomainParams()


@pytest.fixture(scope="module")
def field():
    return build_calibration_field()


@pytest.fixture(scope="module")
def leaf():
    return integrate_base_leaf("above")


def distance_to_path(point, leaf):
    """Distance from ``point`` to the dense-output leaf (not its polyline)."""
    path = leaf.path
    sig = np.linspace(0, path.t[-1], 4001)
    q = path.evaluate(sig)[:2].T
    i = int(np.argmin(np.linalg.norm(q - point, axis=1)))
    lo, hi = sig[max(i - 1, 0)], sig[min(i + 1, len(sig) - 1)]

    def dot(s):
        y = path.evaluate(s)
        return (y[0] - point[0]) * math.cos(y[2]) + (y[1] - point[1]) * math.sin(y[2])

    s = brentq(dot, lo, hi, xtol=1e-15)
    return float(np.linalg.norm(path.evaluate(s)[:2] - point))


# -- leaves -----------------------------------------------------------------

def test_leaf_against_solve_ivp(leaf):
    u0, v0 = leaf.path.y[0, :2]
    a0 = leaf.path.y[0, 2]

    def rhs(_, y):
        u, v, a = y
        return [math.cos(a), math.sin(a), 3 * (math.cos(a) / v - math.sin(a) / u)]

    sig = leaf.path.t
    ref = solve_ivp(rhs, (0, sig[-1]), [u0, v0, a0], method="DOP853", rtol=1e-12,
                    atol=1e-13, t_eval=sig)
    assert np.max(np.abs(ref.y.T - leaf.path.y)) < 1e-8


def test_leaf_reaches_radius_two(leaf):
    u, v = leaf.path.y[:, 0], leaf.path.y[:, 1]
    r = np.hypot(u, v)
    psi = np.arctan2(v, u) - DIAGONAL_ANGLE
    assert r[-1] == pytest.approx(2.0, abs=1e-9)
    assert np.all(np.diff(psi) < 0)
    assert np.all(psi > 0)


def test_leaf_axis_start(leaf):
    assert leaf.curve.vertices[0] == pytest.approx([0.0, 1.0])
    # leaves the axis orthogonally
    d = leaf.curve.vertices[1] - leaf.curve.vertices[0]
    assert abs(d[1] / d[0]) < 1e-3


def test_below_is_mirror(leaf):
    below = integrate_base_leaf("below")
    assert np.allclose(below.curve.vertices, leaf.curve.vertices[:, ::-1])
    assert below.curve.side == "below"


def test_leaf_tolerance_guard():
    with pytest.raises(InvalidInputError):
        integrate_base_leaf(tol=1e-6)


def test_leaf_through_on_leaf(field, leaf):
    p = leaf.curve.vertices[1500]
    lam, foot = leaf_through(p, field)
    assert lam == pytest.approx(1.0, abs=1e-9)
    assert np.allclose(foot, p, atol=1e-12)


def test_leaf_through_homothety(field, leaf):
    p = leaf.curve.vertices[900]
    lam, _ = leaf_through(1.7 * p, field)
    assert lam == pytest.approx(1.7, abs=1e-9)


@pytest.mark.parametrize("point", [[0.3, 0.9], [0.8, 0.2], [0.2, 1.2], [1.1, 0.5]])
def test_leaf_through_foot(field, leaf, point):
    point = np.array(point)
    lam, foot = leaf_through(point, field)
    assert np.linalg.norm(point - foot) <= 1e-9
    # independent route: distance from point/lam to the integrated base leaf
    q = point / lam if point[1] > point[0] else (point / lam)[::-1]
    assert distance_to_path(q, leaf) <= 1e-9


def test_leaf_scale_monotone(field):
    # at fixed radius, the scale grows with the angular gap
    th = DIAGONAL_ANGLE + np.linspace(0.02, 0.7, 40)
    lams = [leaf_through([math.cos(t), math.sin(t)], field)[0] for t in th]
    assert np.all(np.diff(lams) > 0)


def test_leaf_through_errors(field):
    with pytest.raises(DomainError):
        leaf_through([0.5, 0.5], field)
    with pytest.raises(DomainError):
        leaf_through([1.9, 0.9], field)


# -- field ------------------------------------------------------------------

def test_diagonal_value(field):
    X = field_X([0.4, 0.4], field)
    assert np.allclose(X, np.array([-1.0, 1.0]) / math.sqrt(2), atol=1e-15)


def test_unit_length(field):
    rng = np.random.default_rng(1)
    r = rng.uniform(0.01, 2, 5000)
    th = rng.uniform(0, math.pi / 2, 5000)
    pts = np.stack([r * np.cos(th), r * np.sin(th)], axis=1)
    assert np.allclose(np.linalg.norm(field_X(pts, field), axis=1), 1.0, atol=1e-14)


def test_reflection_law(field):
    rng = np.random.default_rng(2)
    pts = rng.uniform(0.05, 1.3, size=(500, 2))
    X = field_X(pts, field)
    Y = field_X(pts[:, ::-1], field)
    assert np.allclose(Y, -X[:, ::-1], atol=1e-13)


def test_normal_to_leaf(field, leaf):
    v = leaf.curve.vertices[20:-20:37]
    tang = leaf.curve.vertices[21:-19:37] - leaf.curve.vertices[19:-21:37]
    tang /= np.linalg.norm(tang, axis=1, keepdims=True)
    X = field_X(v, field)
    assert np.max(np.abs(np.sum(X * tang, axis=1))) < 1e-6


def test_continuous_at_diagonal(field):
    for eps in (1e-4, 1e-8):
        X = field_X([[0.7, 0.7 + eps], [0.7 + eps, 0.7]], field)
        assert np.allclose(X, np.array([-1.0, 1.0]) / math.sqrt(2), atol=10 * eps**0.5)


def test_points_out_of_domain(field):
    with pytest.raises(DomainError):
        field_X([2.0, 0.5], field)
    with pytest.raises(DomainError):
        field_X([-0.1, 0.5], field)


# -- divergence -------------------------------------------------------------

def test_stencil_on_radial_field():
    # away from the axes, where the u^3 v^3 weight does not amplify the stencil error
    pts = interior_sample_grid(5, 7, theta_margin=0.5)
    radial = lambda q: q / np.hypot(q[:, 0], q[:, 1])[:, None]  # noqa: E731
    res = divergence_residual(pts, radial, 1e-3)
    assert np.allclose(res, 7 / np.hypot(pts[:, 0], pts[:, 1]), atol=1e-4)


def test_divergence_free(field):
    pts = interior_sample_grid()
    r1 = divergence_residual(pts, field, 1e-3)
    r2 = divergence_residual(pts, field, 5e-4)
    assert r1.max() <= 1e-3
    assert abs(r1.max() / r2.max() - 4) <= 0.5


def test_stencil_guard(field):
    with pytest.raises(InvalidInputError):
        divergence_residual([[1e-4, 0.5]], field, 1e-3)


# -- flux identities ---------------------------------------------------------

@pytest.mark.parametrize("K", [0.0, 8.0])
def test_gauss_green(field, K):
    params = DomainParams(K=K)
    res = gauss_green_check(cone_region(params), field, params)
    assert res.surface_area == pytest.approx(CONE_AREA_UNIT_BALL, rel=1e-14)
    assert res.discrepancy <= 1e-4


def test_gauss_green_polygon_route(field):
    res = gauss_green_check(cone_region(P), field)
    assert res.discrepancy <= 1e-8


def test_gauss_green_degenerate(field):
    res = gauss_green_check(ReducedRegion([]), field)
    assert (res.surface_area, res.boundary_flux, res.discrepancy) == (0, 0, 0)


def test_sign_band(field):
    rep = sign_band_check(P, field, n_samples=1000)
    assert rep.passed
    assert abs(rep.center_value) <= 1e-6
    assert np.all(rep.flux_N_side > 0) and np.all(rep.flux_far_side < 0)
    assert rep.d_safe >= 0.6 * rep.d_crest
    assert rep.offending is None


def test_sign_band_mirror(field):
    rep = sign_band_check(P, field, n_samples=50)
    assert np.allclose(rep.flux_N_side, -rep.flux_far_side, atol=1e-14)


def test_sign_band_control(field):
    rep = sign_band_check(DomainParams(K=0.0), field, n_samples=1000)
    assert not rep.passed
    assert rep.offending is not None
    # in the round ball the flux has the wrong sign and only vanishes linearly at the trace
    assert np.all(rep.flux_N_side < 0)
    assert abs(rep.flux_N_side[0]) < 1e-3


# -- minimality -------------------------------------------------------------

def test_cone_equality(field):
    rep = minimality_check(make_competitor(PerturbationSpec(), P), P, field)
    assert abs(rep.slack) <= 1e-6 * rep.lhs
    assert abs(rep.calibration_defect) <= 1e-12
    assert rep.passed


@pytest.mark.parametrize("seed", range(0, 20, 4))
def test_seeded_competitors(field, seed):
    rep = minimality_check(make_competitor(random_perturbation(seed, P), P), P, field)
    assert rep.in_regime and rep.passed
    assert rep.slack > 0
    # slack and calibration defect are the same quantity
    assert rep.slack == pytest.approx(rep.calibration_defect, abs=1e-9)
    assert rep.flux_identity_gap <= 1e-8
    assert rep.flux_lost >= 0 and rep.flux_gained <= 0


def test_out_of_regime(field):
    th = angle_for_distance(0.12, +1)
    end = boundary_point(th, P)
    curve = GeneratingCurve(np.linspace(0, 1, 257)[:, None] * end[None, :])
    rep = minimality_check(curve, P, field)
    assert not rep.in_regime
    assert rep.passed is None


def test_endpoint_must_be_on_boundary(field):
    curve = GeneratingCurve(np.array([[0.0, 0.0], [0.5, 0.5]]))
    with pytest.raises(InvalidInputError):
        minimality_check(curve, P, field)


def test_minimality_mirror(field):
    spec = random_perturbation(7, P)
    mirror = PerturbationSpec(-spec.end_offset, tuple(-a for a in spec.amplitudes), True)
    a = minimality_check(make_competitor(spec, P), P, field)
    b = minimality_check(make_competitor(mirror, P), P, field)
    assert a.slack == pytest.approx(b.slack, rel=1e-6)
    assert a.lhs == pytest.approx(b.lhs, rel=1e-12)
