"""Integration of x' = v(x) + A + B f(t) on the lifted line and period-2pi flow maps."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicSpline

from . import _backend
from .fields import TrigPoly, ZERO

TWO_PI = 2.0 * np.pi

DEFAULT_N = 1024
DEFAULT_TOL = 1e-10


class IntegrationError(RuntimeError):
    """The adaptive integrator could not reach the requested time."""


class NonMonotoneError(RuntimeError):
    """A lifted map lost strict monotonicity (usually: tolerance too loose)."""


@dataclass(frozen=True, eq=False)
class SampledForcing:
    """Periodic forcing given by samples on the uniform grid ``2 pi i / n``.

    Between nodes the forcing is the periodic cubic spline through the samples.
    """

    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 1 or vals.shape[0] < 4:
            raise ValueError("need at least 4 samples")
        object.__setattr__(self, "values", vals)

    @cached_property
    def spline(self) -> CubicSpline:
        n = self.values.shape[0]
        x = TWO_PI * np.arange(n + 1) / n
        y = np.append(self.values, self.values[0])
        return CubicSpline(x, y, bc_type="periodic")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = self.spline(np.mod(t, TWO_PI))
        return float(out) if out.ndim == 0 else out

    def kernel_spec(self):
        c = np.ascontiguousarray(self.spline.c.T)  # (n, 4), highest power first
        return _backend.F_SPLINE, c.ravel(), np.zeros(1), self.values.shape[0], 0.0

    def breakpoints(self, t0, t1):
        return np.empty(0)


def _forcing_spec(f):
    if f is None or (isinstance(f, TrigPoly) and f == ZERO):
        return _backend.F_NONE, np.zeros(1), np.zeros(1), 0, 0.0
    if isinstance(f, TrigPoly):
        a, b = f.dense
        return _backend.F_TRIG, a, b, f.degree, 0.0
    return f.kernel_spec()


def forcing_degree(f) -> int:
    return f.degree if isinstance(f, TrigPoly) else 0


@dataclass(frozen=True, eq=False)
class TorusODE:
    """One member ``x' = v(x) + A + B f(t)`` of the two-parameter family."""

    v: TrigPoly
    A: float = 0.0
    B: float = 0.0
    f: object = None

    def rhs(self, x, t):
        f = self.f
        ft = 0.0 if f is None else f(t)
        return self.v(x) + self.A + self.B * ft

    def with_params(self, A=None, B=None) -> "TorusODE":
        return TorusODE(self.v, self.A if A is None else A, self.B if B is None else B, self.f)

    @cached_property
    def _spec(self):
        va, vb = self.v.dense
        kind, fa, fb, fn, fdelta = _forcing_spec(self.f)
        if self.B == 0.0:
            kind = _backend.F_NONE
        deg = forcing_degree(self.f) if kind == _backend.F_TRIG else 0
        hmax = min(0.5, 1.0 / max(1, deg))
        return (np.ascontiguousarray(va), np.ascontiguousarray(vb), float(self.A), float(self.B),
                int(kind), np.ascontiguousarray(fa, dtype=float),
                np.ascontiguousarray(fb, dtype=float), int(fn), float(fdelta), hmax)

    def breakpoints(self, t0, t1):
        if self.f is None or self.B == 0.0 or not hasattr(self.f, "breakpoints"):
            return np.empty(0)
        return np.asarray(self.f.breakpoints(t0, t1), dtype=float)


def integrate_points(ode: TorusODE, x0, t0: float, stops, tol: float = DEFAULT_TOL,
                     with_log: bool = False, workers: int = 1, kernel=None):
    """Integrate lifted trajectories from ``x0`` at ``t0`` to each time in ``stops``.

    Returns ``(X, L)`` with shapes ``(len(x0), len(stops))``: positions and
    log-derivatives ``log dx(t)/dx0``. Forcing breakpoints are inserted as
    extra integrator stops. Chunks run on threads when ``workers > 1``; each
    trajectory is integrated independently so the result does not depend on
    the chunking.
    """
    x0 = np.ascontiguousarray(np.atleast_1d(np.asarray(x0, dtype=float)))
    stops = np.atleast_1d(np.asarray(stops, dtype=float))
    if tol <= 0:
        raise ValueError("tol must be positive")
    if stops.size and (np.any(np.diff(stops) < 0) or stops[0] < t0):
        raise ValueError("stops must be nondecreasing and not before t0")
    if stops.size == 0:
        return np.empty((x0.size, 0)), np.empty((x0.size, 0))
    extra = ode.breakpoints(t0, stops[-1])
    if extra.size:
        allstops = np.union1d(stops, extra[(extra > t0) & (extra < stops[-1])])
    else:
        allstops = np.unique(stops)
    allstops = np.ascontiguousarray(allstops)
    cols = np.searchsorted(allstops, stops)

    va, vb, A, B, kind, fa, fb, fn, fdelta, hmax = ode._spec
    kern = kernel or _backend

    def run(chunk):
        return kern.integrate(va, vb, A, B, kind, fa, fb, fn, fdelta,
                              np.ascontiguousarray(chunk), float(t0), allstops, float(tol),
                              bool(with_log), hmax)

    if workers > 1 and x0.size > 1:
        chunks = np.array_split(x0, workers)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, chunks))
        X = np.vstack([p[0] for p in parts])
        L = np.vstack([p[1] for p in parts])
        status = np.concatenate([p[2] for p in parts])
    else:
        X, L, status, _ = run(x0)
    if np.any(status != 0):
        bad = int(np.argmax(status != 0))
        why = "step-size underflow" if status[bad] == 1 else "step budget exhausted"
        raise IntegrationError(f"{why} for start point x0={x0[bad]!r}")
    return X[:, cols], L[:, cols]


def integrate_lift(ode: TorusODE, t0: float, t1: float, x0, tol: float = DEFAULT_TOL):
    """Lifted solution value x(t1) for x(t0) = x0 (scalar or array)."""
    if t1 < t0:
        raise ValueError("t1 must be >= t0")
    X, _ = integrate_points(ode, x0, t0, [t1], tol)
    out = X[:, 0]
    return float(out[0]) if np.ndim(x0) == 0 else out


def flow_map_with_derivative(ode: TorusODE, x0, tol: float = DEFAULT_TOL, periods: int = 1):
    """Time-2pi*periods flow value and its spatial derivative at ``x0``."""
    X, L = integrate_points(ode, x0, 0.0, [TWO_PI * periods], tol, with_log=True)
    val, der = X[:, 0], np.exp(L[:, 0])
    if np.ndim(x0) == 0:
        return float(val[0]), float(der[0])
    return val, der


# lifted maps ------------------------------------------------------------------

def grid(n: int) -> np.ndarray:
    return TWO_PI * np.arange(n) / n


@dataclass(frozen=True, eq=False)
class LiftedMap:
    """Degree-one circle map sampled on the uniform grid ``x_i = 2 pi i / n``.

    ``values[i] = H(x_i)`` on the lifted line and ``slopes[i] = H'(x_i)``.
    Off-grid evaluation uses cubic Hermite interpolation with Fritsch-Carlson
    slope limiting, extended by ``H(x + 2 pi) = H(x) + 2 pi``. ``exact``, when
    present, evaluates the underlying map and its derivative directly.
    """

    values: np.ndarray
    slopes: np.ndarray
    exact: Optional[Callable] = field(default=None, repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        s = np.asarray(self.slopes, dtype=float)
        if v.ndim != 1 or v.shape != s.shape:
            raise ValueError("values and slopes must be 1-d arrays of equal length")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "slopes", s)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def grid(self) -> np.ndarray:
        return grid(self.n)

    @property
    def displacement(self) -> np.ndarray:
        return self.values - self.grid

    def is_monotone(self) -> bool:
        v = self.values
        return bool(np.all(np.diff(v) > 0) and v[-1] < v[0] + TWO_PI and np.all(self.slopes > 0))

    def check_monotone(self) -> "LiftedMap":
        if not self.is_monotone():
            raise NonMonotoneError("lifted map is not strictly increasing")
        return self

    @cached_property
    def _hermite(self):
        n = self.n
        h = TWO_PI / n
        y0 = self.values
        y1 = np.append(self.values[1:], self.values[0] + TWO_PI)
        m0 = self.slopes.copy()
        m1 = np.append(self.slopes[1:], self.slopes[0])
        delta = (y1 - y0) / h
        with np.errstate(divide="ignore", invalid="ignore"):
            a = m0 / delta
            b = m1 / delta
            r = a * a + b * b
            scale = np.where(r > 9.0, 3.0 / np.sqrt(r), 1.0)
        scale = np.where(np.isfinite(scale), scale, 1.0)
        return h, y0, y1, m0 * scale, m1 * scale

    def eval_with_derivative(self, x):
        x = np.asarray(x, dtype=float)
        h, y0, y1, m0, m1 = self._hermite
        turns = np.floor(x / TWO_PI)
        y = x - TWO_PI * turns
        i = np.minimum((y / h).astype(np.int64), self.n - 1)
        s = (y - i * h) / h
        s2 = s * s
        s3 = s2 * s
        h00 = 2 * s3 - 3 * s2 + 1
        h10 = s3 - 2 * s2 + s
        h01 = -2 * s3 + 3 * s2
        h11 = s3 - s2
        val = h00 * y0[i] + h10 * h * m0[i] + h01 * y1[i] + h11 * h * m1[i]
        d00 = (6 * s2 - 6 * s) / h
        d10 = 3 * s2 - 4 * s + 1
        d01 = (-6 * s2 + 6 * s) / h
        d11 = 3 * s2 - 2 * s
        der = d00 * y0[i] + d10 * m0[i] + d01 * y1[i] + d11 * m1[i]
        return val + TWO_PI * turns, der

    def __call__(self, x):
        val = self.eval_with_derivative(x)[0]
        return float(val) if np.ndim(x) == 0 else val

    def evaluate_exact(self, x):
        """Underlying map and derivative at ``x``; falls back to the interpolant."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if self.exact is not None:
            return self.exact(x)
        return self.eval_with_derivative(x)

    def resample(self, n: int) -> "LiftedMap":
        if n == self.n:
            return self
        val, der = self.eval_with_derivative(grid(n))
        return LiftedMap(val, der, self.exact)

    def to_csv(self) -> str:
        rows = ["x,H"] + [f"{x!r},{h!r}" for x, h in zip(self.grid, self.values)]
        return "\n".join(rows) + "\n"

    # constructors -------------------------------------------------------------
    @classmethod
    def translation(cls, a: float, n: int = DEFAULT_N) -> "LiftedMap":
        def exact(x):
            x = np.asarray(x, dtype=float)
            return x + a, np.ones_like(x)
        return cls(grid(n) + a, np.ones(n), exact)

    @classmethod
    def identity(cls, n: int = DEFAULT_N) -> "LiftedMap":
        return cls.translation(0.0, n)

    @classmethod
    def from_function(cls, H: Callable, dH: Callable, n: int = DEFAULT_N) -> "LiftedMap":
        """Sample a lift ``H`` (with derivative ``dH``) on the grid."""
        def exact(x):
            x = np.asarray(x, dtype=float)
            return np.asarray(H(x), dtype=float), np.asarray(dH(x), dtype=float)
        x = grid(n)
        return cls(np.asarray(H(x), float), np.asarray(dH(x), float), exact).check_monotone()


def flow_map(ode: TorusODE, n: int = DEFAULT_N, tol: float = DEFAULT_TOL,
             workers: int = 1) -> LiftedMap:
    """Period-2pi flow map of ``ode`` sampled on an ``n``-point grid."""
    if n < 16:
        raise ValueError("grid size must be at least 16")
    X, L = integrate_points(ode, grid(n), 0.0, [TWO_PI], tol, with_log=True, workers=workers)

    def exact(x):
        Xe, Le = integrate_points(ode, x, 0.0, [TWO_PI], tol, with_log=True)
        return Xe[:, 0], np.exp(Le[:, 0])

    g = LiftedMap(X[:, 0], np.exp(L[:, 0]), exact)
    if not g.is_monotone():
        raise NonMonotoneError("flow map is not monotone; tighten tol")
    return g


def autonomous_flow(v: TrigPoly, time: float, n: int = DEFAULT_N,
                    tol: float = DEFAULT_TOL) -> LiftedMap:
    """Time-``time`` flow of the autonomous field ``v`` (negative times allowed)."""
    w = v if time >= 0 else -v
    ode = TorusODE(w)
    T = abs(time)

    def exact(x):
        X, L = integrate_points(ode, x, 0.0, [T], tol, with_log=True)
        return X[:, 0], np.exp(L[:, 0])

    val, der = exact(grid(n))
    return LiftedMap(val, der, exact).check_monotone()


def compose(g1: LiftedMap, g2: LiftedMap) -> LiftedMap:
    """``g1 o g2`` on the finer of the two grids."""
    n = max(g1.n, g2.n)
    a, b = g1.resample(n), g2.resample(n)
    val, der = a.eval_with_derivative(b.values)
    exact = None
    if g1.exact is not None and g2.exact is not None:
        e1, e2 = g1.exact, g2.exact

        def exact(x):
            y, dy = e2(x)
            z, dz = e1(y)
            return z, dz * dy

    g = LiftedMap(val, der * b.slopes, exact)
    if not g.is_monotone():
        raise NonMonotoneError("composition is not monotone")
    return g


def _grid_derivatives(g: LiftedMap, k: int):
    h = TWO_PI / g.n
    H = g.values
    right = np.append(H[1:], H[0] + TWO_PI)
    left = np.insert(H[:-1], 0, H[-1] - TWO_PI)
    out = [H]
    if k >= 1:
        out.append((right - left) / (2 * h))
    if k >= 2:
        out.append((right - 2 * H + left) / (h * h))
    return out


def ck_distance(g1: LiftedMap, g2: LiftedMap, k: int = 0) -> float:
    """Max over the grid of ``|D^j g1 - D^j g2|`` for ``j <= k`` (centered differences)."""
    if k not in (0, 1, 2):
        raise ValueError("k must be 0, 1 or 2")
    if g1.n != g2.n:
        raise ValueError("maps live on different grids")
    d1 = _grid_derivatives(g1, k)
    d2 = _grid_derivatives(g2, k)
    return float(max(np.max(np.abs(a - b)) for a, b in zip(d1, d2)))


