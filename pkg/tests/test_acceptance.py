"""Acceptance suite: one numbered criterion per test, each printing a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -v`` (the lines are collected and
repeated in the terminal summary) or ``python tests/test_acceptance.py``.
"""
import math
import time

import numpy as np
import pytest

from simonscone.calibration import (build_calibration_field, divergence_residual,
                                    gauss_green_check, integrate_base_leaf,
                                    interior_sample_grid, minimality_check, sign_band_check)
from simonscone.geometry import (CONE_AREA_UNIT_BALL, DIAGONAL_ANGLE, DomainParams,
                                 PerturbationSpec, cone_region, make_competitor,
                                 random_perturbation)
from simonscone.spectral import (AngularMode, RadialProblem, angular_eigenvalue,
                                 compact_analog_eigenvalue, delta1_closed,
                                 fd_stability_threshold, principal_eigenvalue,
                                 radial_eigensolve_t, radial_eigensolve_z,
                                 second_variation, stability_threshold, weighted_norm_sq,
                                 zonal_sphere_spectrum)

RESULTS = {}


def c01():
    d = radial_eigensolve_z(RadialProblem(K=1, Z=80, step=0.005)).eigenvalue
    return abs(d) <= 1e-3, f"delta1(K=1, Z=80) = {d:.3e}"


def c02():
    errs = {K: abs(radial_eigensolve_z(RadialProblem(K=K, Z=100, step=0.005)).eigenvalue
                   - delta1_closed(K)) for K in (2, 3, 4, 5, 5.5)}
    worst = max(errs.values())
    return worst <= 1e-3, f"max |delta1_fd - formula| over K=2..5.5 = {worst:.2e}"


def c03():
    ok, parts = True, []
    for K in (6, 8, 20):
        d200 = radial_eigensolve_z(RadialProblem(K=K, Z=200)).eigenvalue
        d400 = radial_eigensolve_z(RadialProblem(K=K, Z=400)).eigenvalue
        ok &= d200 >= 6.25 - 1e-4 and abs(d200 - 6.25) <= 1e-2
        ok &= 6.25 <= d400 < d200
        parts.append(f"K={K}: {d200 - 6.25:.2e} -> {d400 - 6.25:.2e}")
    return ok, "delta1 - 25/4 at Z=200 -> 400: " + "; ".join(parts)


def c04():
    d = radial_eigensolve_z(RadialProblem(K=8, Z=200, boundary="dirichlet")).eigenvalue
    return abs(d - 6.25) <= 1e-2, f"Dirichlet delta1(Z=200) - 25/4 = {d - 6.25:.2e}"


def c05():
    fd = fd_stability_threshold(RadialProblem(K=0, Z=100, step=0.005))
    closed = stability_threshold()
    return abs(fd - 5) <= 0.02 and closed == pytest.approx(5, abs=1e-12), \
        f"FD threshold {fd:.5f}, closed form {closed:.12f}"


def c06():
    mu, res = principal_eigenvalue(8.0, AngularMode(0, 0), RadialProblem(K=8, Z=200))
    q = second_variation(res.grid, res.eigenfunction, AngularMode(), 8.0) / \
        weighted_norm_sq(res.grid, res.eigenfunction)
    return abs(mu - 0.25) <= 1e-3 and abs(q - 0.25) <= 1e-3, \
        f"mu1(K=8) = {mu:.6f}, quotient of its minimizer = {q:.6f}"


def c07():
    gaps = []
    for K in (1.0, 4.0, 8.0):
        p = RadialProblem(K=K, Z=10, step=2.5e-4)
        gaps.append(abs(radial_eigensolve_z(p).eigenvalue - radial_eigensolve_t(p).eigenvalue))
    return max(gaps) <= 1e-6, f"max |t-form - z-form| (Z=10, step=2.5e-4) = {max(gaps):.2e}"


def c08():
    kap = np.array([25.0, 50.0, 100.0, 200.0])
    d = np.array([compact_analog_eigenvalue(k) for k in kap])
    bound_ok = bool(np.all(np.abs(d - math.pi**2 * (1 + 2 / kap)) <= 5 * math.pi**2 / kap**2))
    coef = kap * (d / math.pi**2 - 1)
    fitted = np.polyfit(1 / kap, coef, 1)[1]
    return bound_ok and 1.9 <= fitted <= 2.1, \
        f"O(1/kappa^2) bound {'met' if bound_ok else 'violated'}, fitted coefficient {fitted:.4f}"


def c09():
    vals = zonal_sphere_spectrum(6, grid=2000)
    err = np.max(np.abs(vals - [k * (k + 2) for k in range(6)]))
    lam = angular_eigenvalue(AngularMode(0, 0))
    return err <= 1e-3 and lam == -6, f"zonal error (k<=5) {err:.2e}, lambda(0,0) = {lam:g}"


def c10():
    t0 = time.perf_counter()
    leaf = integrate_base_leaf("above")
    u, v = leaf.path.y[:, 0], leaf.path.y[:, 1]
    r_end = math.hypot(u[-1], v[-1])
    monotone = bool(np.all(np.diff(np.arctan2(v, u)) < 0) and np.all(v > u))
    field = build_calibration_field()
    pts = interior_sample_grid()
    r1 = divergence_residual(pts, field, 1e-3).max()
    r2 = divergence_residual(pts, field, 5e-4).max()
    dt = time.perf_counter() - t0
    ok = abs(r_end - 2) <= 1e-9 and monotone and r1 <= 1e-3 and abs(r1 / r2 - 4) <= 0.5 and dt <= 300
    return ok, (f"leaf radius {r_end:.12f}, monotone {monotone}, max residual {r1:.2e}, "
                f"ratio {r1 / r2:.3f}, {dt:.1f} s")


def c11():
    ball = DomainParams(K=0.0)
    res = gauss_green_check(cone_region(ball), build_calibration_field(), ball)
    ok = res.discrepancy <= 1e-4 and res.surface_area == pytest.approx(CONE_AREA_UNIT_BALL, rel=1e-12)
    return ok, (f"|M cap B| = {res.surface_area:.12f} (pi^4/14 = {CONE_AREA_UNIT_BALL:.12f}), "
                f"flux {res.boundary_flux:.12f}, rel. gap {res.discrepancy:.1e}")


def c12():
    field = build_calibration_field()
    rep = sign_band_check(DomainParams(K=8, upsilon=0.1), field, n_samples=1000)
    ctrl = sign_band_check(DomainParams(K=0, upsilon=0.1), field, n_samples=1000)
    ok = rep.N_side_ok and rep.far_side_ok and abs(rep.center_value) <= 1e-6 and not ctrl.passed
    return ok, (f"K=8: min N-side {rep.flux_N_side.min():.2e}, max far-side "
                f"{rep.flux_far_side.max():.2e}, center {rep.center_value:.1e}; "
                f"K=0 control {'fails' if not ctrl.passed else 'passes'}")


def c13():
    params = DomainParams()
    field = build_calibration_field()
    cone = minimality_check(make_competitor(PerturbationSpec(), params), params, field)
    slacks = []
    for seed in range(20):
        rep = minimality_check(make_competitor(random_perturbation(seed, params), params),
                               params, field)
        slacks.append(rep.slack if rep.in_regime else -math.inf)
    ok = min(slacks) > 0 and abs(cone.slack) <= 1e-6
    return ok, f"min slack over 20 seeds {min(slacks):.2e}, cone slack {cone.slack:.1e}"


CRITERIA = [
    (1, "Neumann case", c01),
    (2, "subcritical formula", c02),
    (3, "saturation", c03),
    (4, "Dirichlet consistency", c04),
    (5, "stability threshold", c05),
    (6, "principal eigenvalue", c06),
    (7, "oracle equivalence", c07),
    (8, "compact analog", c08),
    (9, "angular spectrum", c09),
    (10, "calibration field", c10),
    (11, "Gauss-Green", c11),
    (12, "sign band", c12),
    (13, "minimality", c13),
]


def run_criterion(num, name, fn):
    passed, detail = fn()
    line = f"[{'PASS' if passed else 'FAIL'}] {num:2d} {name}: {detail}"
    RESULTS[num] = line
    print(line)
    return passed, line


@pytest.mark.parametrize("num, name, fn", CRITERIA, ids=[f"{n:02d}-{s.replace(' ', '-')}"
                                                         for n, s, _ in CRITERIA])
def test_criterion(num, name, fn):
    passed, line = run_criterion(num, name, fn)
    assert passed, line


if __name__ == "__main__":
    for row in CRITERIA:
        run_criterion(*row)
