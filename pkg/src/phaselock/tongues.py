"""Phase-lock areas in the (A, B) plane.

For a rational ``p/q`` let ``D_A(x) = H_A^q(x) - x - 2 pi p`` where ``H_A`` is the
lifted period map. Since ``D_A`` increases with ``A``:

* ``max D_A < 0``  certifies ``rho(A) < p/q``,
* ``min D_A > 0``  certifies ``rho(A) > p/q``,
* otherwise ``D_A`` has a zero, a ``q``-periodic orbit, and ``rho(A) = p/q``.

The left edge of the level set is where ``max D`` changes sign and the right
edge where ``min D`` does; both are located by dyadic bisection in ``A``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .fields import TrigPoly, is_special_form
from .flow import DEFAULT_TOL, TWO_PI, TorusODE, flow_map, grid, integrate_points
from .rotation import (DegenerateOrbitError, PeriodicOrbit, find_periodic_orbit,
                       rotation_number_ode)

DEFAULT_TOL_A = 1e-6
DEFAULT_WIDTH_FLOOR = 1e-3
PROBE_GRID = 64


class BracketError(ValueError):
    """The A-bracket does not straddle the requested rotation number."""


def as_rational(rho) -> tuple[int, int]:
    """Normalize ``Fraction``, ``(p, q)``, int or ``"p/q"`` to a reduced ``(p, q)``."""
    if isinstance(rho, tuple):
        fr = Fraction(int(rho[0]), int(rho[1]))
    elif isinstance(rho, str):
        fr = Fraction(rho.strip())
    else:
        fr = Fraction(rho)
    return fr.numerator, fr.denominator


@dataclass
class TongueSlice:
    p: int
    q: int
    B: float
    A_left: float
    A_right: float
    status: str = "ok"
    witness: Optional[PeriodicOrbit] = None

    @property
    def width(self) -> float:
        return max(0.0, self.A_right - self.A_left)

    @property
    def rho(self) -> Fraction:
        return Fraction(self.p, self.q)

    @property
    def multiplier(self) -> float:
        return self.witness.multiplier if self.witness is not None else float("nan")


@dataclass
class TongueDiagram:
    v: TrigPoly
    f: object
    A_range: tuple
    B_values: tuple
    slices: list = field(default_factory=list)

    def at(self, B: float) -> list:
        return [s for s in self.slices if s.B == B]


class LockProbe:
    """Classifies parameters of a monotone family against one rational ``p/q``.

    ``dfun(param, x)`` must return ``D_param(x) = H^q(x) - x - 2 pi p`` for the
    family member at ``param``, nondecreasing in ``param``. Grid values are
    cached per parameter; extrema are only refined (bounded Brent around the
    best grid points) when the grid alone cannot certify a sign.
    """

    def __init__(self, dfun, q, n=PROBE_GRID, noise=1e-8):
        self.D = dfun
        self.q = int(q)
        self.n = n
        self.x = grid(n)
        self.noise = noise
        self._grid = {}
        self._ext = {}

    @classmethod
    def for_family(cls, v, f, B, p, q, n=PROBE_GRID, tol=DEFAULT_TOL):
        """Probe over ``A`` for ``x' = v(x) + A + B f(t)``."""
        B = float(B)

        def dfun(A, x):
            ode = TorusODE(v, float(A), B, f)
            X, _ = integrate_points(ode, x, 0.0, [TWO_PI * q], tol)
            return X[:, 0] - np.asarray(x) - TWO_PI * p

        return cls(dfun, q, n, 100.0 * q * tol)

    def grid_values(self, A):
        if A not in self._grid:
            self._grid[A] = self.D(A, self.x)
        return self._grid[A]

    def extreme(self, A, sign):
        """Refined ``max D_A`` (sign=+1) or ``min D_A`` (sign=-1)."""
        key = (A, sign)
        if key in self._ext:
            return self._ext[key]
        Dg = sign * self.grid_values(A)
        h = TWO_PI / self.n
        left, right = np.roll(Dg, 1), np.roll(Dg, -1)
        peaks = np.nonzero((Dg >= left) & (Dg >= right))[0]
        peaks = peaks[np.argsort(-Dg[peaks])][:2]
        best = float(Dg.max())
        for i in peaks:
            res = minimize_scalar(lambda s: -sign * self.D(A, [s])[0],
                                  bounds=(self.x[i] - h, self.x[i] + h), method="bounded",
                                  options={"xatol": 1e-10})
            best = max(best, -float(res.fun))
        self._ext[key] = sign * best
        return sign * best

    def max_nonneg(self, A) -> bool:
        """True when ``max D_A >= 0``, i.e. ``rho(A) >= p/q``."""
        if self.grid_values(A).max() >= 0:
            return True
        return self.extreme(A, +1) >= 0

    def min_nonpos(self, A) -> bool:
        """True when ``min D_A <= 0``, i.e. ``rho(A) <= p/q``."""
        if self.grid_values(A).min() <= 0:
            return True
        return self.extreme(A, -1) <= 0

    def locked(self, A) -> bool:
        return self.max_nonneg(A) and self.min_nonpos(A)

    def uncertain(self, A, sign) -> bool:
        return abs(self.extreme(A, sign)) < self.noise


def _bisect(pred, a, b, tol_A, max_iter):
    """Shrink ``[a, b]`` with ``pred(a)`` False and ``pred(b)`` True to width ``tol_A``."""
    it = 0
    while b - a > tol_A and it < max_iter:
        mid = 0.5 * (a + b)
        if pred(mid):
            b = mid
        else:
            a = mid
        it += 1
    return a, b, b - a <= tol_A


def boundary_slice(v: TrigPoly, f, rho, B: float, A_bracket: tuple,
                   tol_A: float = DEFAULT_TOL_A, n: int = PROBE_GRID, tol: float = DEFAULT_TOL,
                   witness: bool = True, max_iter: int = 200,
                   probe: Optional[LockProbe] = None) -> TongueSlice:
    """Intersection of the ``rho``-level set with the line ``B = const``.

    The returned edges are the unlocked ends of the final bisection brackets,
    so the slice contains the true level set and refining ``tol_A`` only
    shrinks it. ``status`` is ``"ok"``, ``"point"`` (width within
    ``2 tol_A``), ``"clipped"`` (level set reaches a bracket end) or
    ``"inconclusive"`` (an edge could not be separated from integration noise).
    """
    p, q = as_rational(rho)
    lo, hi = map(float, A_bracket)
    if not lo <= hi:
        raise BracketError(f"empty bracket [{lo}, {hi}]")
    pr = probe or LockProbe.for_family(v, f, B, p, q, n, tol)
    if not pr.min_nonpos(lo):
        raise BracketError(f"rho(A={lo}) > {p}/{q}")
    if not pr.max_nonneg(hi):
        raise BracketError(f"rho(A={hi}) < {p}/{q}")

    status = "ok"
    if pr.max_nonneg(lo):
        A_left = lo
        status = "clipped"
    else:
        A_left, _, ok = _bisect(pr.max_nonneg, lo, hi, tol_A, max_iter)
        if not ok or pr.uncertain(A_left, +1):
            status = "inconclusive"
    if pr.min_nonpos(hi):
        A_right = hi
        status = "clipped"
    else:
        _, A_right, ok = _bisect(lambda A: not pr.min_nonpos(A), lo, hi, tol_A, max_iter)
        if not ok or pr.uncertain(A_right, -1):
            status = "inconclusive"

    sl = TongueSlice(p, q, float(B), A_left, A_right, status)
    if status == "ok" and sl.width <= 2 * tol_A:
        sl.status = "point"
    if witness and sl.width > 2 * tol_A:
        sl.witness = interior_witness(v, f, (p, q), 0.5 * (A_left + A_right), B, 0.0, n, tol)
    return sl


def bracket_locked(v, f, rho, B, A0, step=0.05, max_steps=40, n=PROBE_GRID, tol=DEFAULT_TOL):
    """Expand outward from a locked ``A0`` until both sides are unlocked.

    Returns an ``A``-bracket suitable for :func:`boundary_slice`.
    """
    p, q = as_rational(rho)
    pr = LockProbe.for_family(v, f, B, p, q, n, tol)
    if not pr.locked(A0):
        raise BracketError(f"rho(A={A0}) != {p}/{q}")
    lo, hi, s = A0, A0, step
    for _ in range(max_steps):
        lo = A0 - s
        if not pr.max_nonneg(lo):
            break
        s *= 2
    else:
        raise BracketError("no unlocked parameter found to the left")
    s = step
    for _ in range(max_steps):
        hi = A0 + s
        if not pr.min_nonpos(hi):
            break
        s *= 2
    else:
        raise BracketError("no unlocked parameter found to the right")
    return lo, hi


def rationals_between(lo: float, hi: float, qmax: int) -> list[Fraction]:
    out = set()
    for q in range(1, qmax + 1):
        for p in range(math.ceil(lo * q), math.floor(hi * q) + 1):
            out.add(Fraction(p, q))
    return sorted(out)


def scan_diagram(v: TrigPoly, f, A_range, B_values: Sequence[float], qmax: int,
                 tol_A: float = DEFAULT_TOL_A, n: int = PROBE_GRID, tol: float = DEFAULT_TOL,
                 include_points: bool = False, witness: bool = True) -> TongueDiagram:
    """Slices of every phase-lock level set ``p/q`` (``q <= qmax``) on each line ``B``.

    The rotation-number range on each line is estimated at the ends of
    ``A_range``; rationals outside it are skipped. Slices narrower than
    ``2 tol_A`` are kept only with ``include_points``. Failures are recorded
    per slice with their status instead of aborting the scan. Output order is
    by ``B`` then ``p/q``.
    """
    diagram = TongueDiagram(v, f, tuple(A_range) if A_range else (), tuple(B_values))
    if not A_range or A_range[1] < A_range[0]:
        return diagram
    A_lo, A_hi = map(float, A_range)
    for B in B_values:
        r_lo = rotation_number_ode(TorusODE(v, A_lo, B, f), 64, tol)
        r_hi = rotation_number_ode(TorusODE(v, A_hi, B, f), 64, tol)
        for r in rationals_between(r_lo.lower, r_hi.upper, qmax):
            probe = LockProbe.for_family(v, f, B, r.numerator, r.denominator, n, tol)
            try:
                sl = boundary_slice(v, f, r, B, (A_lo, A_hi), tol_A, n, tol, witness,
                                    probe=probe)
            except BracketError:
                continue
            except Exception as exc:  # numerical failure: record, keep scanning
                sl = TongueSlice(r.numerator, r.denominator, float(B), float("nan"),
                                 float("nan"), f"failed: {exc}")
                diagram.slices.append(sl)
                continue
            if sl.width > 2 * tol_A or include_points or sl.status == "inconclusive":
                diagram.slices.append(sl)
    return diagram


@dataclass
class QuantizationReport:
    applicable: bool
    m: Optional[int]
    passed: bool
    width_floor: float
    slices: list = field(default_factory=list)
    violations: list = field(default_factory=list)
    reason: str = ""

    @property
    def verdict(self) -> str:
        if not self.applicable:
            return "N/A"
        return "PASS" if self.passed else "FAIL"


def quantization_check(v: TrigPoly, f, A_range, B_values, qmax: int,
                       tol_A: float = DEFAULT_TOL_A, width_floor: float = DEFAULT_WIDTH_FLOOR,
                       n: int = PROBE_GRID, tol: float = DEFAULT_TOL) -> QuantizationReport:
    """Check that every slice wider than ``width_floor`` sits at a multiple of ``1/m``.

    Only meaningful for ``v = a sin(mx) + b cos(mx) + c``; for other fields the
    report is marked not applicable. A constant field admits no phase-lock
    areas at all, so any wide slice is a violation.
    """
    sf = is_special_form(v)
    if not sf.special:
        return QuantizationReport(False, None, False, width_floor,
                                  reason="field has two or more harmonic degrees")
    diagram = scan_diagram(v, f, A_range, B_values, qmax, tol_A, n, tol, witness=False)
    wide = [s for s in diagram.slices if s.width > width_floor]
    if sf.m is None:
        bad = list(wide)
    else:
        bad = [s for s in wide if (s.rho * sf.m).denominator != 1]
    return QuantizationReport(True, sf.m, not bad, width_floor, diagram.slices, bad)


def interior_witness(v: TrigPoly, f, rho, A0: float, B0: float, tol: float = 1e-4,
                     n: int = PROBE_GRID, ode_tol: float = DEFAULT_TOL) -> Optional[PeriodicOrbit]:
    """A ``p/q``-periodic orbit at ``(A0, B0)`` with ``|multiplier - 1| > tol``, if one exists."""
    p, q = as_rational(rho)
    g = flow_map(TorusODE(v, float(A0), float(B0), f), max(n, 16), ode_tol)
    try:
        orbit = find_periodic_orbit(g, p, q)
    except DegenerateOrbitError:
        return None
    if orbit is None or orbit.hyperbolicity <= tol:
        return None
    return orbit
