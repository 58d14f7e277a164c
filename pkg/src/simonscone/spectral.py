"""Second variation of the cone inside the bumped ball and its spectrum.

For normal variations ``eta = g(t) Y(omega)`` of the cone (``t`` the distance
to the vertex, ``Y`` an eigenfunction on the link ``S^3(1/sqrt2) x
S^3(1/sqrt2)``), the second variation splits into an angular eigenvalue and a
radial Euler problem on ``(0, 1]``::

    -t^2 g'' - 6 t g' = delta g,      (K - 1)/2 g(1) + g'(1) = 0.

The substitution ``g = t^(-5/2) h``, ``z = log t`` turns it into
``-h'' + 25/4 h = delta h`` on ``(-inf, 0]`` with
``(K - 6)/2 h(0) + h'(0) = 0``. The principal eigenvalue is
``delta_1 = 25/4 - (6 - K)^2/4`` for ``K < 6`` and saturates at the bottom of
the essential spectrum, ``25/4``, for ``K >= 6``; adding the angular value
``-6`` gives ``mu_1``, positive exactly when ``K > 5``.

Both radial forms are discretized here with second-order finite differences
on a truncated interval ``z in [-Z, 0]`` (``t in [e^-Z, 1]``) with a Dirichlet
condition at the truncation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (BracketError, ConsistencyError, InvalidInputError,
                     SimonsConeError)
from .numerics import (Bracket, TridiagonalSystem, find_root,
                       integrate_samples, lowest_eigenpairs, smallest_eigenpair)

ESSENTIAL_BOTTOM = 25.0 / 4.0
ANGULAR_PRINCIPAL = -6.0
MAX_STEP = 0.1
EIGEN_RESULT_TOL = 1e-8


# ---------------------------------------------------------------------------
# Closed forms
# ---------------------------------------------------------------------------

def delta1_closed(K):
    """Principal radial eigenvalue ``25/4 - (6-K)^2/4`` below ``K = 6``, ``25/4`` above."""
    K = np.asarray(K, dtype=float)
    out = np.where(K < 6, ESSENTIAL_BOTTOM - (6 - K) ** 2 / 4, ESSENTIAL_BOTTOM)
    return float(out) if out.ndim == 0 else out


def mu1_closed(K):
    """Principal eigenvalue of the Jacobi operator: ``-6 + delta1_closed(K)``."""
    return ANGULAR_PRINCIPAL + delta1_closed(K)


def stability_threshold(*, validate: bool = False, problem: "RadialProblem | None" = None,
                        max_disagreement: float = 0.05) -> float:
    """Smallest ``K`` with ``mu_1(K) > 0`` from the closed form (equal to 5).

    With ``validate`` the value is cross-checked against a bisection on the
    sign of the finite-difference ``mu_1`` (see `fd_stability_threshold`).
    """
    k_star = find_root(mu1_closed, Bracket(1.0, 6.0 - 1e-9, 1e-14))
    if validate:
        fd = fd_stability_threshold(problem or RadialProblem(K=0.0, Z=100.0, step=0.01))
        if abs(fd - k_star) > max_disagreement:
            raise ConsistencyError(
                f"finite-difference threshold {fd:.4f} disagrees with {k_star:.4f}")
    return k_star


def fd_stability_threshold(problem: "RadialProblem", lo: float = 1.0, hi: float = 6.0,
                           tol: float = 1e-3) -> float:
    """Bisection on the sign of ``-6 + delta_1`` computed by `radial_eigensolve_z`."""
    def mu(K):
        return ANGULAR_PRINCIPAL + radial_eigensolve_z(problem.with_K(K)).eigenvalue

    mlo, mhi = mu(lo), mu(hi)
    if not mlo <= 0 < mhi:
        raise BracketError(f"mu_1 does not change sign on [{lo}, {hi}]: {mlo}, {mhi}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mu(mid) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# Radial finite-difference problems
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RadialProblem:
    """Truncated radial eigenproblem.

    ``boundary="robin"`` imposes the K-dependent condition at ``t = 1``;
    ``"dirichlet"`` replaces it with ``h(0) = 0``.
    """

    K: float = 8.0
    Z: float = 100.0
    step: float = 0.005
    coordinate: str = "z"
    boundary: str = "robin"

    def __post_init__(self):
        if not math.isfinite(self.K):
            raise InvalidInputError("K must be finite")
        if not (self.Z > 0 and self.step > 0):
            raise InvalidInputError("Z and step must be positive")
        if self.step > MAX_STEP:
            raise InvalidInputError(f"step {self.step} is coarser than {MAX_STEP}")
        n = self.Z / self.step
        if abs(n - round(n)) > 1e-9 * n or round(n) < 10:
            raise InvalidInputError("Z/step must be an integer >= 10")
        if self.coordinate not in ("z", "t"):
            raise InvalidInputError("coordinate must be 'z' or 't'")
        if self.boundary not in ("robin", "dirichlet"):
            raise InvalidInputError("boundary must be 'robin' or 'dirichlet'")

    @property
    def n_intervals(self) -> int:
        return int(round(self.Z / self.step))

    @property
    def z_grid(self) -> np.ndarray:
        return np.linspace(-self.Z, 0.0, self.n_intervals + 1)

    def with_K(self, K: float) -> "RadialProblem":
        return RadialProblem(K, self.Z, self.step, self.coordinate, self.boundary)

    def with_coordinate(self, coordinate: str) -> "RadialProblem":
        return RadialProblem(self.K, self.Z, self.step, coordinate, self.boundary)


@dataclass
class EigenResult:
    """Principal eigenpair of a discretized radial problem.

    ``grid`` holds the nodes (``z`` or ``t``) including the truncation node,
    where the eigenfunction vanishes. The eigenfunction is normalized in the
    discrete version of the problem's L^2 norm (plain in ``z``, ``t^4``-weighted
    in ``t``). ``residual`` is ``||A v - delta v|| / ||A||`` for the symmetric
    matrix actually solved.
    """

    eigenvalue: float
    eigenfunction: np.ndarray
    residual: float
    grid: np.ndarray
    problem: RadialProblem = field(repr=False)


def _z_system(problem: RadialProblem):
    s, n = problem.step, problem.n_intervals
    inv = 1.0 / s ** 2
    if problem.boundary == "dirichlet":
        m = n - 1
        diag = np.full(m, 2 * inv + ESSENTIAL_BOTTOM)
        off = np.full(m - 1, -inv)
        mass = np.ones(m)
    else:
        a = (6.0 - problem.K) / 2.0
        diag = np.full(n, 2 * inv + ESSENTIAL_BOTTOM)
        off = np.full(n - 1, -inv)
        # ghost-point Robin row, symmetrized with boundary mass 1/2
        diag[-1] = 2 * (1 - s * a) * inv + ESSENTIAL_BOTTOM
        off[-1] = -math.sqrt(2.0) * inv
        mass = np.ones(n)
        mass[-1] = 0.5
    return TridiagonalSystem(diag, off), mass


def radial_eigensolve_z(problem: RadialProblem) -> EigenResult:
    """Principal eigenpair of ``-h'' + 25/4 h`` on ``[-Z, 0]``.

    Dirichlet at ``-Z``; at ``0`` either the Robin condition
    ``(K - 6)/2 h(0) + h'(0) = 0`` (ghost point, second order) or ``h(0) = 0``.
    """
    if problem.coordinate != "z":
        problem = problem.with_coordinate("z")
    system, mass = _z_system(problem)
    pair = smallest_eigenpair(system)
    h = np.zeros(problem.n_intervals + 1)
    nodes = pair.eigenvector / np.sqrt(mass) / math.sqrt(problem.step)
    h[1:1 + nodes.size] = nodes
    return EigenResult(pair.eigenvalue, h, pair.residual, problem.z_grid, problem)


def _t_system(problem: RadialProblem):
    """Lumped-mass discretization of ``-(t^6 g')' = delta t^4 g`` on the log grid.

    All weights are handled through their logarithms so that deep truncations
    (``t`` down to ``e^-200``) neither underflow nor overflow.
    """
    z = problem.z_grid
    n = problem.n_intervals
    zmid = 0.5 * (z[1:] + z[:-1])  # log of geometric cell midpoints
    # log(t_{j+1} - t_j)
    log_dt = z[1:] + np.log1p(-np.exp(z[:-1] - z[1:]))
    log_flux = 6 * zmid - log_dt
    # dual-cell lengths t_{j+1/2} - t_{j-1/2}; last node gets the half cell
    log_dual = np.empty(n + 1)
    log_dual[1:-1] = zmid[1:] + np.log1p(-np.exp(zmid[:-1] - zmid[1:]))
    log_dual[-1] = math.log(-math.expm1(zmid[-1]))
    log_dual[0] = -np.inf
    log_mass = 4 * z + log_dual

    last = n if problem.boundary == "robin" else n - 1
    idx = np.arange(1, last + 1)
    lm = log_mass[idx]
    diag = np.exp(log_flux[idx - 1] - lm)
    right = idx < n
    diag[right] += np.exp(log_flux[idx[right]] - lm[right])
    if problem.boundary == "robin":
        diag[-1] += 0.5 * (problem.K - 1.0) * math.exp(-log_mass[n])
    off = -np.exp(log_flux[idx[:-1]] - 0.5 * (lm[:-1] + lm[1:]))
    return TridiagonalSystem(diag, off), lm


def radial_eigensolve_t(problem: RadialProblem) -> EigenResult:
    """Principal eigenpair of ``-t^2 g'' - 6 t g'`` on ``[e^-Z, 1]``.

    Self-adjoint form ``-(t^6 g')' = delta t^4 g`` with geometric cell midpoints
    on the log-uniform grid ``t_j = exp(z_j)``; Dirichlet at ``t = e^-Z`` and
    ``(K - 1)/2 g(1) + g'(1) = 0`` (or ``g(1) = 0``).
    """
    if problem.coordinate != "t":
        problem = problem.with_coordinate("t")
    if problem.Z > 250:
        raise InvalidInputError("t-form truncation depth is limited to Z <= 250")
    system, log_mass = _t_system(problem)
    pair = smallest_eigenpair(system)
    g = np.zeros(problem.n_intervals + 1)
    vals = pair.eigenvector * np.exp(-0.5 * log_mass)
    g[1:1 + vals.size] = vals
    return EigenResult(pair.eigenvalue, g, pair.residual, np.exp(problem.z_grid), problem)


def to_z(t, g):
    """``(t, g) -> (z, h)`` with ``z = log t`` and ``h = t^(5/2) g``."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0) or np.any(t > 1):
        raise InvalidInputError("t-grid must lie in (0, 1]")
    z = np.log(t)
    return z, np.exp(2.5 * z) * np.asarray(g, dtype=float)


def to_t(z, h):
    """Inverse of `to_z`."""
    z = np.asarray(z, dtype=float)
    if np.any(z > 0):
        raise InvalidInputError("z-grid must lie in (-inf, 0]")
    return np.exp(z), np.exp(-2.5 * z) * np.asarray(h, dtype=float)


change_of_variables = to_z


def _uniform_step(x):
    d = np.diff(x)
    if d.size < 1 or np.any(d <= 0) or np.ptp(d) > 1e-9 * abs(d.mean()) + 1e-14:
        raise InvalidInputError("samples must lie on an increasing uniform grid")
    return float((x[-1] - x[0]) / (x.size - 1))


def radial_energy(z, h, K: float) -> float:
    """``int (h'^2 + 25/4 h^2) dz + (K - 6)/2 h(0)^2`` for samples on ``[-Z, 0]``.

    Derivatives by second-order differences, integrals by `integrate_samples`.
    """
    z = np.asarray(z, dtype=float)
    h = np.asarray(h, dtype=float)
    s = _uniform_step(z)
    if abs(z[-1]) > 1e-12:
        raise InvalidInputError("z-grid must end at 0")
    if abs(h[0]) > 1e-8 * np.max(np.abs(h)):
        raise InvalidInputError("h must decay at the truncated end")
    dh = np.gradient(h, s, edge_order=2)
    bulk = integrate_samples(dh ** 2 + ESSENTIAL_BOTTOM * h ** 2, s)
    return bulk + 0.5 * (K - 6.0) * h[-1] ** 2


def radial_rayleigh_quotient(z, h, K: float) -> float:
    s = _uniform_step(np.asarray(z, dtype=float))
    return radial_energy(z, h, K) / integrate_samples(np.asarray(h) ** 2, s)


# ---------------------------------------------------------------------------
# Angular spectrum
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AngularMode:
    """Degrees ``(k, l)`` of spherical harmonics on the two ``S^3`` factors."""

    k: int = 0
    l: int = 0

    def __post_init__(self):
        if int(self.k) != self.k or int(self.l) != self.l or self.k < 0 or self.l < 0:
            raise InvalidInputError("mode degrees must be nonnegative integers")


def angular_eigenvalue(mode: AngularMode) -> float:
    """Eigenvalue of ``-Laplacian - 6`` on ``S^3(1/sqrt2) x S^3(1/sqrt2)``."""
    return 2.0 * (mode.k * (mode.k + 2) + mode.l * (mode.l + 2)) - 6.0


def zonal_sphere_spectrum(n_modes: int, grid: int = 2000) -> np.ndarray:
    """Lowest eigenvalues of ``-f'' - 2 cot(psi) f'`` on ``[0, pi]`` (zonal, unit ``S^3``).

    Cell-centred finite volumes for ``-(sin^2 psi f')' = lam sin^2 psi f``;
    the poles need no condition since the flux weight vanishes there.
    Expected values are ``k (k + 2)``.
    """
    if grid < 200:
        raise InvalidInputError("grid must be at least 200")
    if n_modes < 1:
        raise InvalidInputError("n_modes must be positive")
    dpsi = np.pi / grid
    faces = dpsi * np.arange(grid + 1)
    flux = np.sin(faces[1:-1]) ** 2 / dpsi
    mass = dpsi / 2 - (np.sin(2 * faces[1:]) - np.sin(2 * faces[:-1])) / 4
    diag = np.zeros(grid)
    diag[:-1] += flux
    diag[1:] += flux
    diag /= mass
    off = -flux / np.sqrt(mass[:-1] * mass[1:])
    pairs = lowest_eigenpairs(TridiagonalSystem(diag, off), n_modes)
    return np.array([p.eigenvalue for p in pairs])


# ---------------------------------------------------------------------------
# Second variation
# ---------------------------------------------------------------------------

def second_variation(t, g, mode: AngularMode, K: float) -> float:
    """Second variation for ``eta = g(t) Y_mode`` with ``||Y||_{L^2} = 1``.

    ``int t^6 g'^2 dt + lambda_mode int t^4 g^2 dt + (K - 1)/2 g(1)^2`` where
    ``lambda_mode`` is `angular_eigenvalue` (it already carries ``-|B|^2 t^2 = -6``).
    ``t`` must be log-uniform and end at 1; ``g`` must vanish at the inner end.
    """
    t = np.asarray(t, dtype=float)
    g = np.asarray(g, dtype=float)
    if np.any(t <= 0):
        raise InvalidInputError("t-grid must be positive")
    z = np.log(t)
    s = _uniform_step(z)
    if abs(z[-1]) > 1e-12:
        raise InvalidInputError("t-grid must end at 1")
    w = np.exp(2.5 * z)
    if abs(w[0] * g[0]) > 1e-8 * np.max(np.abs(w * g)):
        raise InvalidInputError("g must vanish at the truncation")
    dg = np.gradient(g, s, edge_order=2)
    grad = integrate_samples((w * dg) ** 2, s)
    mass = integrate_samples((w * g) ** 2, s)
    return grad + angular_eigenvalue(mode) * mass + 0.5 * (K - 1.0) * g[-1] ** 2


def weighted_norm_sq(t, g) -> float:
    """``int t^4 g^2 dt`` on a log-uniform grid."""
    z = np.log(np.asarray(t, dtype=float))
    s = _uniform_step(z)
    return integrate_samples((np.exp(2.5 * z) * np.asarray(g)) ** 2, s)


def principal_eigenvalue(K: float, mode: AngularMode = AngularMode(),
                         problem: RadialProblem | None = None) -> tuple[float, EigenResult]:
    """Minimum of the discrete second-variation Rayleigh quotient in a given mode."""
    problem = (problem or RadialProblem()).with_K(K)
    res = radial_eigensolve_t(problem)
    return angular_eigenvalue(mode) + res.eigenvalue, res


# ---------------------------------------------------------------------------
# Compact analog on [0, 1]
# ---------------------------------------------------------------------------

def compact_analog_eigenvalue(kappa: float, scan_points: int = 4096) -> float:
    """Smallest positive root of ``tan(sqrt d) = sqrt(d) / kappa``.

    This is the sine-branch eigenvalue of ``-h''`` on ``[0, 1]`` with
    ``h(0) = 0`` and ``kappa h(1) = h'(1)``; it tends to ``pi^2`` as
    ``|kappa| -> inf`` (``kappa = inf`` gives the Dirichlet value). For
    ``kappa > 1`` the problem additionally has one negative eigenvalue, see
    `compact_analog_negative_eigenvalue`.
    """
    if kappa == 0:
        raise InvalidInputError("kappa must be nonzero")
    if math.isinf(kappa):
        return math.pi ** 2

    # kappa sin x - x cos x has the same positive roots and no poles
    def F(x):
        return kappa * np.sin(x) - x * np.cos(x)

    x = np.linspace(0.0, 2 * np.pi, scan_points + 1)
    x[0] = 1e-9
    vals = F(x)
    flips = np.flatnonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) <= 0)
    if flips.size == 0:
        pattern = "".join("+" if v > 0 else "-" for v in vals[:: scan_points // 16])
        raise BracketError(f"no sign change of kappa sin x - x cos x on (0, 2pi]: {pattern}")
    i = flips[0]
    if vals[i + 1] == 0:
        return float(x[i + 1] ** 2)
    root = find_root(F, Bracket(x[i], x[i + 1], 1e-15))
    return root ** 2


def compact_analog_negative_eigenvalue(kappa: float) -> float | None:
    """Negative (sinh-branch) eigenvalue ``-y^2`` with ``tanh y = y / kappa``, if any."""
    if not kappa > 1:
        return None
    root = find_root(lambda y: kappa * np.tanh(y) - y, Bracket(1e-6, kappa + 1.0, 1e-15))
    return -root ** 2


def compact_analog_fd(kappa: float, n: int = 4000, count: int = 2) -> np.ndarray:
    """Lowest eigenvalues of the compact analog by a ghost-point finite-difference solve."""
    s = 1.0 / n
    inv = 1.0 / s ** 2
    diag = np.full(n, 2 * inv)
    off = np.full(n - 1, -inv)
    diag[-1] = 2 * (1 - s * kappa) * inv
    off[-1] = -math.sqrt(2.0) * inv
    pairs = lowest_eigenpairs(TridiagonalSystem(diag, off), count)
    return np.array([p.eigenvalue for p in pairs])


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

@dataclass
class SweepRow:
    K: float
    delta1_closed: float
    delta1_fd: float
    mu1_closed: float
    mu1_fd: float
    stable: bool
    stable_fd: bool
    discrepancy: float
    residual: float
    error: str | None = None


@dataclass
class SweepReport:
    rows: list[SweepRow]
    Z: float
    step: float
    fd_margin: float

    @property
    def max_discrepancy(self) -> float:
        d = [r.discrepancy for r in self.rows if r.error is None]
        return max(d) if d else float("nan")

    @property
    def max_residual(self) -> float:
        d = [r.residual for r in self.rows if r.error is None]
        return max(d) if d else float("nan")


def stability_sweep(K_values: Sequence[float], problem: RadialProblem | None = None,
                    fd_margin: float = 1e-4) -> SweepReport:
    """Closed-form and finite-difference ``delta_1``, ``mu_1`` per ``K``.

    ``stable`` follows the closed form (``mu_1 > 0``); ``stable_fd`` requires
    the discrete ``mu_1`` to exceed ``fd_margin``. Solver failures are
    recorded in the row instead of raised.
    """
    problem = problem or RadialProblem()
    rows = []
    for K in sorted(float(k) for k in K_values):
        if not math.isfinite(K):
            raise InvalidInputError("K values must be finite")
        d_c = delta1_closed(K)
        try:
            res = radial_eigensolve_z(problem.with_K(K))
        except SimonsConeError as exc:
            rows.append(SweepRow(K, d_c, math.nan, d_c - 6, math.nan, d_c - 6 > 0,
                                 False, math.nan, math.nan, str(exc)))
            continue
        mu_fd = ANGULAR_PRINCIPAL + res.eigenvalue
        rows.append(SweepRow(
            K, d_c, res.eigenvalue, ANGULAR_PRINCIPAL + d_c, mu_fd,
            bool(ANGULAR_PRINCIPAL + d_c > 0), bool(mu_fd > fd_margin),
            abs(res.eigenvalue - d_c), res.residual))
    return SweepReport(rows, problem.Z, problem.step, fd_margin)
