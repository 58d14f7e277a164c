"""Deterministic numerical kernels shared by the spectral and calibration code.

Contents: a symmetric tridiagonal eigensolver (Sturm bisection followed by
inverse iteration), bracketed root finding, an adaptive Dormand-Prince
integrator with a boolean stop predicate, and composite quadrature on
uniform samples.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy import linalg, optimize

from .errors import (BracketError, ConvergenceError, InvalidInputError,
                     SingularityError)

EIGEN_RESIDUAL_TOL = 1e-10
ROOT_TOL = 1e-12
ODE_TOL = 1e-10


# ---------------------------------------------------------------------------
# Symmetric tridiagonal eigenproblems
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TridiagonalSystem:
    """Symmetric tridiagonal matrix stored as its two nonzero diagonals."""

    diagonal: np.ndarray
    off_diagonal: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.diagonal, dtype=float).reshape(-1)
        e = np.asarray(self.off_diagonal, dtype=float).reshape(-1)
        if d.size < 1:
            raise InvalidInputError("tridiagonal system needs n >= 1")
        if e.size != d.size - 1:
            raise InvalidInputError(
                f"off_diagonal has length {e.size}, expected {d.size - 1}")
        if not (np.all(np.isfinite(d)) and np.all(np.isfinite(e))):
            raise InvalidInputError("tridiagonal system has non-finite entries")
        object.__setattr__(self, "diagonal", d)
        object.__setattr__(self, "off_diagonal", e)

    @property
    def size(self) -> int:
        return self.diagonal.size

    def norm(self) -> float:
        """Infinity norm (equal to the 1-norm by symmetry)."""
        a = np.abs(self.diagonal).copy()
        a[:-1] += np.abs(self.off_diagonal)
        a[1:] += np.abs(self.off_diagonal)
        return float(a.max())

    def matvec(self, x: np.ndarray) -> np.ndarray:
        y = self.diagonal * x
        y[:-1] += self.off_diagonal * x[1:]
        y[1:] += self.off_diagonal * x[:-1]
        return y

    def shifted(self, c: float) -> "TridiagonalSystem":
        return TridiagonalSystem(self.diagonal + c, self.off_diagonal)

    def to_dense(self) -> np.ndarray:
        return (np.diag(self.diagonal) + np.diag(self.off_diagonal, 1)
                + np.diag(self.off_diagonal, -1))


class EigenPair(NamedTuple):
    eigenvalue: float
    eigenvector: np.ndarray
    residual: float  # ||A v - lambda v|| / ||A||


def sturm_count(system: TridiagonalSystem, x: float) -> int:
    """Number of eigenvalues strictly below ``x`` (Sylvester inertia of A - x I)."""
    d = system.diagonal
    e2 = system.off_diagonal ** 2
    tiny = np.finfo(float).tiny * max(system.norm(), 1.0)
    count = 0
    q = d[0] - x
    if q < 0:
        count += 1
    for i in range(1, d.size):
        if q == 0.0:
            q = tiny
        q = d[i] - x - e2[i - 1] / q
        if q < 0:
            count += 1
    return count


def _residual(system, value, vector):
    r = system.matvec(vector) - value * vector
    return float(np.linalg.norm(r)) / max(system.norm(), np.finfo(float).tiny)


def _fix_sign(v):
    s = v.sum()
    if s < 0 or (s == 0 and v[np.flatnonzero(v)[0]] < 0):
        return -v
    return v


def _inverse_iteration(system, value, vector, iters=3):
    n = system.size
    ab = np.zeros((3, n))
    ab[0, 1:] = system.off_diagonal
    ab[1] = system.diagonal - value
    ab[2, :-1] = system.off_diagonal
    # nudge the shift off the eigenvalue so the banded solve stays nonsingular
    ab[1] -= 64 * np.finfo(float).eps * system.norm()
    for _ in range(iters):
        vector = linalg.solve_banded((1, 1), ab, vector, check_finite=False)
        vector /= np.linalg.norm(vector)
    return vector


def smallest_eigenpair(system: TridiagonalSystem,
                       tol: float = EIGEN_RESIDUAL_TOL) -> EigenPair:
    """Smallest eigenvalue and unit eigenvector of a symmetric tridiagonal matrix.

    The eigenvalue is isolated by Sturm-sequence bisection and the vector by
    inverse iteration (LAPACK ``stebz``/``stein``); the eigenvalue is then
    replaced by the Rayleigh quotient of the vector.

    Raises
    ------
    ConvergenceError
        If the relative residual ``||Av - lv|| / ||A||`` exceeds ``tol`` after
        two extra rounds of inverse iteration.
    """
    if system.size == 1:
        return EigenPair(float(system.diagonal[0]), np.ones(1), 0.0)
    return lowest_eigenpairs(system, 1, tol=tol)[0]


def lowest_eigenpairs(system: TridiagonalSystem, count: int,
                      tol: float = EIGEN_RESIDUAL_TOL) -> list[EigenPair]:
    """The ``count`` smallest eigenpairs, ascending."""
    if not 1 <= count <= system.size:
        raise InvalidInputError(f"count must lie in [1, {system.size}]")
    if system.size == 1:
        return [EigenPair(float(system.diagonal[0]), np.ones(1), 0.0)]
    try:
        w, v = linalg.eigh_tridiagonal(
            system.diagonal, system.off_diagonal, select="i",
            select_range=(0, count - 1), lapack_driver="stebz",
            check_finite=False)
    except linalg.LinAlgError as exc:
        raise ConvergenceError(f"tridiagonal eigensolver failed: {exc}") from exc
    pairs = []
    for j in range(count):
        vec = v[:, j] / np.linalg.norm(v[:, j])
        val = float(vec @ system.matvec(vec))
        res = _residual(system, val, vec)
        if res > tol:
            vec = _inverse_iteration(system, val, vec)
            val = float(vec @ system.matvec(vec))
            res = _residual(system, val, vec)
            if res > tol:
                raise ConvergenceError(
                    f"eigenpair {j} residual {res:.3e} exceeds {tol:.1e}",
                    residual=res)
        pairs.append(EigenPair(val, _fix_sign(vec), res))
    return pairs


# ---------------------------------------------------------------------------
# Root finding
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Bracket:
    lo: float
    hi: float
    tolerance: float = ROOT_TOL

    def __post_init__(self):
        if not (np.isfinite(self.lo) and np.isfinite(self.hi)) or self.lo >= self.hi:
            raise BracketError(f"invalid bracket [{self.lo}, {self.hi}]")
        if not self.tolerance > 0:
            raise InvalidInputError("bracket tolerance must be positive")


def find_root(f: Callable[[float], float], bracket: Bracket,
              max_iter: int = 200) -> float:
    """Root of ``f`` inside ``bracket`` by Brent's method.

    The returned root lies in ``[lo, hi]`` and is within ``bracket.tolerance``
    (plus a few ulps) of a sign change of ``f``.
    """
    flo, fhi = f(bracket.lo), f(bracket.hi)
    if flo == 0.0:
        return float(bracket.lo)
    if fhi == 0.0:
        return float(bracket.hi)
    if not (np.isfinite(flo) and np.isfinite(fhi)) or np.sign(flo) == np.sign(fhi):
        raise BracketError(
            f"no sign change on [{bracket.lo}, {bracket.hi}]: "
            f"f(lo)={flo!r}, f(hi)={fhi!r}")
    try:
        root, info = optimize.brentq(
            f, bracket.lo, bracket.hi, xtol=bracket.tolerance,
            rtol=4 * np.finfo(float).eps, maxiter=max_iter, full_output=True,
            disp=False)
    except RuntimeError as exc:  # pragma: no cover - disp=False path
        raise ConvergenceError(str(exc)) from exc
    if not info.converged:
        raise ConvergenceError(
            f"root finder stopped after {info.iterations} iterations",
            residual=abs(f(root)))
    return float(root)


# ---------------------------------------------------------------------------
# Adaptive ODE integration (Dormand-Prince 5(4))
# ---------------------------------------------------------------------------

_C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1, 1])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
_B4 = np.array([5179 / 57600, 0, 7571 / 16695, 393 / 640, -92097 / 339200,
                187 / 2100, 1 / 40])


def _dp_step(fun, t, y, h, k0=None):
    """One Dormand-Prince step; ``y`` may carry a trailing batch axis."""
    ks = [fun(t, y) if k0 is None else k0]
    for i in range(1, 7):
        dy = sum(a * k for a, k in zip(_A[i], ks) if a != 0)
        ks.append(fun(t + _C[i] * h, y + h * dy))
    y5 = y + h * sum(b * k for b, k in zip(_B5, ks) if b != 0)
    err = h * sum((b5 - b4) * k for b5, b4, k in zip(_B5, _B4, ks))
    return y5, err, ks[-1]


@dataclass(frozen=True)
class OdeState:
    t: float
    y: np.ndarray
    step: float

    def __post_init__(self):
        y = np.atleast_1d(np.asarray(self.y, dtype=float))
        if not np.all(np.isfinite(y)):
            raise InvalidInputError("ODE state has non-finite entries")
        if not self.step > 0:
            raise InvalidInputError("ODE step size must be positive")
        object.__setattr__(self, "y", y)


@dataclass
class OdePath:
    """Accepted nodes of an adaptive integration.

    ``evaluate`` re-takes one Dormand-Prince step from the nearest node to
    the left of each query, so values between nodes carry the same local
    accuracy as the nodes themselves.
    """

    t: np.ndarray
    y: np.ndarray
    steps: np.ndarray
    fun: Callable = field(repr=False)

    @property
    def final(self) -> OdeState:
        return OdeState(float(self.t[-1]), self.y[-1], float(self.steps[-1]))

    def __len__(self):
        return self.t.size

    def evaluate(self, tq) -> np.ndarray:
        """State at ``tq`` (scalar or 1-D array); shape ``(dim,)`` or ``(dim, nq)``."""
        tq_arr = np.atleast_1d(np.asarray(tq, dtype=float))
        if np.any(tq_arr < self.t[0]) or np.any(tq_arr > self.t[-1]):
            raise InvalidInputError("query outside the integrated interval")
        idx = np.clip(np.searchsorted(self.t, tq_arr, side="right") - 1,
                      0, self.t.size - 1)
        t0 = self.t[idx]
        y0 = self.y[idx].T
        h = tq_arr - t0
        out, _, _ = _dp_step(self.fun, t0, y0, h)
        out = np.where(h == 0, y0, out)
        return out[:, 0] if np.ndim(tq) == 0 else out


def integrate_ode(fun: Callable, initial: OdeState,
                  stop: Callable[[float, np.ndarray], bool],
                  tol: float = ODE_TOL, *, max_steps: int = 200_000,
                  min_step: float = 1e-14, max_step: float = np.inf,
                  event_tol: float = 1e-13) -> OdePath:
    """Integrate ``y' = fun(t, y)`` forward until ``stop(t, y)`` becomes true.

    Parameters
    ----------
    fun
        Right-hand side. Must broadcast over a trailing batch axis of ``y``
        if ``OdePath.evaluate`` is used with array queries.
    initial
        Starting state; ``initial.step`` is the first trial step.
    stop
        Boolean predicate. The step on which it first turns true is cut back
        by bisection so the final node sits within ``event_tol`` of the switch.
    tol
        Local error bound per step, mixed absolute/relative.

    Raises
    ------
    SingularityError
        If the step size falls below ``min_step`` (relative to ``|t|``) or the
        right-hand side stays non-finite.
    """
    t, y, h = initial.t, initial.y.copy(), min(initial.step, max_step)
    ts, ys, hs = [t], [y.copy()], [h]
    if stop(t, y):
        return OdePath(np.array(ts), np.array(ys), np.array(hs), fun)
    k0 = fun(t, y)
    for _ in range(max_steps):
        if h < min_step * max(1.0, abs(t)):
            raise SingularityError(
                f"step size underflow at t={t!r}",
                last_state=OdeState(t, y, max(h, np.finfo(float).tiny)))
        y_new, err, k_last = _dp_step(fun, t, y, h, k0)
        if not (np.all(np.isfinite(y_new)) and np.all(np.isfinite(err))):
            h *= 0.25
            continue
        scale = tol * (1.0 + np.maximum(np.abs(y), np.abs(y_new)))
        err_norm = float(np.max(np.abs(err) / scale))
        if err_norm > 1.0:
            h *= max(0.2, 0.9 * err_norm ** -0.2)
            continue
        if stop(t + h, y_new):
            lo, hi = 0.0, 1.0
            while (hi - lo) * h > event_tol * max(1.0, abs(t)):
                mid = 0.5 * (lo + hi)
                y_mid, _, _ = _dp_step(fun, t, y, mid * h, k0)
                if stop(t + mid * h, y_mid):
                    hi = mid
                else:
                    lo = mid
            y_new, _, _ = _dp_step(fun, t, y, hi * h, k0)
            ts.append(t + hi * h)
            ys.append(y_new)
            hs.append(hi * h)
            return OdePath(np.array(ts), np.array(ys), np.array(hs), fun)
        t, y, k0 = t + h, y_new, k_last
        ts.append(t)
        ys.append(y.copy())
        hs.append(h)
        growth = 5.0 if err_norm == 0 else min(5.0, 0.9 * err_norm ** -0.2)
        h = min(h * growth, max_step)
    raise ConvergenceError(f"stop predicate not reached in {max_steps} steps")


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------

def integrate_samples(values, step: float) -> float:
    """Composite quadrature of uniformly spaced samples.

    Odd sample counts use Simpson's rule; even counts of at least four close
    the last three intervals with the 3/8 rule (both exact for cubics); two
    samples fall back to the trapezoid rule.
    """
    f = np.asarray(values, dtype=float)
    n = f.size
    if n < 2:
        raise InvalidInputError("need at least two samples")
    if n == 2:
        return float(0.5 * step * (f[0] + f[1]))
    if n % 2 == 1:
        return float(step / 3 * (f[0] + f[-1] + 4 * f[1:-1:2].sum()
                                 + 2 * f[2:-1:2].sum()))
    head = f[:-3]
    total = 0.0
    if head.size > 1:
        total = integrate_samples(head, step)
    tail = f[-4:]
    total += 3 * step / 8 * (tail[0] + 3 * tail[1] + 3 * tail[2] + tail[3])
    return float(total)
