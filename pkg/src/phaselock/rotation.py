"""Rotation numbers of lifted circle maps and torus flows, rational detection, periodic orbits.

Rotation numbers are normalized per 2pi: a rigid rotation by angle ``2 pi a``
has rotation number ``a``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .flow import DEFAULT_TOL, TWO_PI, LiftedMap, TorusODE, integrate_points

DEFAULT_NMAX = 2048
DEFAULT_PERIODS = 256


@dataclass(frozen=True)
class RotationEstimate:
    """Rotation number ``value`` with a rigorous enclosure half-width ``error_bound``."""

    value: float
    error_bound: float
    iterations: int

    @property
    def lower(self) -> float:
        return self.value - self.error_bound

    @property
    def upper(self) -> float:
        return self.value + self.error_bound


@dataclass(frozen=True)
class PeriodicOrbit:
    """Point ``x0`` with ``H^q(x0) = x0 + 2 pi p`` and multiplier ``(H^q)'(x0)``."""

    p: int
    q: int
    x0: float
    multiplier: float

    @property
    def hyperbolicity(self) -> float:
        return abs(self.multiplier - 1.0)


class DegenerateOrbitError(RuntimeError):
    """Every point is (numerically) periodic, e.g. a rigid rotation."""


def _birkhoff_weights(n: int) -> np.ndarray:
    # exp(-1/(s(1-s))) bump: weighted ergodic averages converge super-polynomially
    # for smooth quasi-periodic sequences
    s = (np.arange(n) + 0.5) / n
    w = np.exp(-1.0 / (s * (1.0 - s)))
    return w / w.sum()


def _enclose(value: float, lo: float, hi: float, iterations: int, slack: float):
    value = min(max(value, lo), hi)
    bound = max(value - lo, hi - value) + slack
    return RotationEstimate(float(value), float(bound), int(iterations))


def rotation_number_map(g: LiftedMap, nmax: int = DEFAULT_NMAX,
                        tol: Optional[float] = None) -> RotationEstimate:
    """Rotation number of a lifted map by orbit iteration of every grid point.

    After ``j`` iterations, ``min_i`` and ``max_i`` of ``(H^j(x_i) - x_i) / (2 pi j)``
    enclose the rotation number; the running intersection is kept. The value
    is a weighted Birkhoff average of the one-step displacements, clipped to
    the enclosure. Stops early once the enclosure is narrower than ``tol``.
    """
    if nmax < 8:
        raise ValueError("nmax must be >= 8")
    x = g.grid
    y = g.values.copy()
    lo, hi = -np.inf, np.inf
    steps = np.empty(nmax)
    prev = x
    used = nmax
    for j in range(1, nmax + 1):
        if j > 1:
            y = g(y)
        d = y - x
        lo = max(lo, d.min() / (TWO_PI * j))
        hi = min(hi, d.max() / (TWO_PI * j))
        steps[j - 1] = np.mean(y - prev)
        prev = y
        if tol is not None and hi - lo < tol:
            used = j
            break
    if lo > hi:  # interpolation round-off on exact rotations
        lo = hi = 0.5 * (lo + hi)
    steps = steps[:used] / TWO_PI
    value = float(np.dot(_birkhoff_weights(used), steps)) if used >= 8 else 0.5 * (lo + hi)
    return _enclose(value, lo, hi, used, 1e-12 + 1e-15 * abs(value))


def rotation_number_ode(ode: TorusODE, periods: int = DEFAULT_PERIODS,
                        tol: float = DEFAULT_TOL, x0: float = 0.0) -> RotationEstimate:
    """Rotation number of the flow of ``ode`` from one lifted trajectory.

    For every period count ``j`` the lift satisfies
    ``|x(2 pi j) - x0 - 2 pi j rho| < 2 pi``; the intersection of these
    enclosures gives the bound (at most ``1/periods`` half-width). The value is
    a weighted Birkhoff average of per-period advances.
    """
    if periods < 1:
        raise ValueError("periods must be >= 1")
    j = np.arange(1, periods + 1)
    X, _ = integrate_points(ode, [x0], 0.0, TWO_PI * j, tol)
    path = np.concatenate([[x0], X[0]])
    disp = (path[1:] - x0) / TWO_PI
    lo = float(np.max((disp - 1.0) / j))
    hi = float(np.min((disp + 1.0) / j))
    adv = np.diff(path) / TWO_PI
    if periods >= 8:
        value = float(np.dot(_birkhoff_weights(periods), adv))
    else:
        value = float(disp[-1] / periods)
    return _enclose(value, lo, hi, periods, periods * tol + 1e-12)


def detect_rational(est: RotationEstimate, qmax: int) -> Optional[tuple[int, int]]:
    """The unique ``p/q`` with ``q <= qmax`` inside the estimate's enclosure, if any."""
    if qmax < 1:
        raise ValueError("qmax must be >= 1")
    best = Fraction(est.value).limit_denominator(qmax)
    if abs(est.value - float(best)) > est.error_bound:
        return None
    # uniqueness over all denominators up to qmax
    found = set()
    for q in range(1, qmax + 1):
        for p in range(math.floor(est.lower * q), math.ceil(est.upper * q) + 1):
            if abs(est.value - p / q) <= est.error_bound:
                found.add(Fraction(p, q))
    if found != {best}:
        return None
    return best.numerator, best.denominator


def _iterate(g: LiftedMap, x, q: int, exact: bool):
    y = np.atleast_1d(np.asarray(x, dtype=float))
    der = np.ones_like(y)
    for _ in range(q):
        if exact:
            y, d = g.evaluate_exact(y)
        else:
            y, d = g.eval_with_derivative(y)
        der = der * d
    return y, der


def find_periodic_orbit(g: LiftedMap, p: int, q: int, tol: float = 1e-12,
                        exact: Optional[bool] = None) -> Optional[PeriodicOrbit]:
    """Locate a point with ``H^q(x0) = x0 + 2 pi p`` and its multiplier.

    Scans ``D(x) = H^q(x) - x - 2 pi p`` on the grid for sign changes and
    refines each with Brent's method to ``tol`` in ``x``. Among the roots the
    most hyperbolic orbit (largest ``|log multiplier|``) is returned. Returns
    None when ``D`` has no sign change and no near-zero point.

    Raises
    ------
    DegenerateOrbitError
        When ``|D| < tol`` on the whole grid (all points periodic).
    """
    if q < 1 or math.gcd(p, q) != 1:
        raise ValueError("need q >= 1 and gcd(p, q) = 1")
    if exact is None:
        exact = g.exact is not None
    x = g.grid
    Hq, _ = _iterate(g, x, q, exact)
    D = Hq - x - TWO_PI * p
    noise = max(tol, 1e-9)
    if np.all(np.abs(D) < noise):
        raise DegenerateOrbitError(f"all points are {p}/{q}-periodic (|D| < {noise:g})")

    def Dfun(s):
        return float(_iterate(g, s, q, exact)[0][0] - s - TWO_PI * p)

    roots = []
    n = g.n
    Dn = np.append(D, D[0])
    xn = np.append(x, TWO_PI)
    for i in range(n):
        a, b = Dn[i], Dn[i + 1]
        if a == 0.0:
            roots.append(xn[i])
        elif a * b < 0:
            roots.append(brentq(Dfun, xn[i], xn[i + 1], xtol=tol, rtol=4 * np.finfo(float).eps))
    if not roots:
        i = int(np.argmin(np.abs(D)))
        if abs(D[i]) < noise:
            roots.append(x[i])
        else:
            return None
    roots = np.array(roots) % TWO_PI
    _, mult = _iterate(g, roots, q, exact)
    best = int(np.argmax(np.abs(np.log(mult))))
    return PeriodicOrbit(int(p), int(q), float(roots[best]), float(mult[best]))
