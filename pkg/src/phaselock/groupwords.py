"""Products of flows of d/dx and a field v, and search for hyperbolic words.

A word ``(t_1..t_k, tau_1..tau_k)`` denotes

    g = S(t_1) o F_v(tau_1) o ... o S(t_k) o F_v(tau_k)

where ``S(t)`` is the rigid shift ``x -> x + t`` and ``F_v(tau)`` the time-``tau``
flow of ``v``. Maps compose right to left: ``F_v(tau_k)`` acts first.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.optimize import brentq, minimize

from .fields import TrigPoly
from .flow import (DEFAULT_N, DEFAULT_TOL, TWO_PI, LiftedMap, TorusODE, grid,
                   integrate_points)
from .rotation import PeriodicOrbit

TAU_MIN = 0.05
HYPERBOLICITY = 1e-2
DEFAULT_BUDGET = 400


@dataclass(frozen=True)
class GroupWord:
    t: tuple
    tau: tuple

    def __post_init__(self):
        t = tuple(float(x) for x in self.t)
        tau = tuple(float(x) for x in self.tau)
        if len(t) != len(tau) or not t:
            raise ValueError("t and tau must be non-empty and of equal length")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "tau", tau)

    @property
    def k(self) -> int:
        return len(self.t)

    def level(self) -> float:
        """``sum(tau) / 2pi``: the word lies in G^s for this s."""
        return math.fsum(self.tau) / TWO_PI

    def in_G(self, s: int, atol: float = 1e-12) -> bool:
        return abs(math.fsum(self.tau) - TWO_PI * s) <= atol

    def in_G1_plus(self, atol: float = 1e-12) -> bool:
        return self.in_G(1, atol) and all(x > 0 for x in self.tau)

    def __add__(self, other: "GroupWord") -> "GroupWord":
        """Concatenation: ``(w1 + w2)`` evaluates to ``g_{w1} o g_{w2}``."""
        return GroupWord(self.t + other.t, self.tau + other.tau)

    def power(self, n: int) -> "GroupWord":
        return GroupWord(self.t * n, self.tau * n)

    def with_t1(self, T: float) -> "GroupWord":
        return replace(self, t=(float(T),) + self.t[1:])


def parse_word(text: str, source: str = "<string>") -> GroupWord:
    """Parse ``k <int>`` followed by ``k`` lines ``t_j tau_j``."""
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    try:
        head = lines[0].split()
        if head[0] != "k" or len(head) != 2:
            raise ValueError("first line must be 'k <int>'")
        k = int(head[1])
        rows = [tuple(map(float, ln.split())) for ln in lines[1:]]
        if len(rows) != k or any(len(r) != 2 for r in rows):
            raise ValueError(f"expected {k} lines of 't tau'")
    except (IndexError, ValueError) as exc:
        raise ValueError(f"{source}: {exc}") from None
    return GroupWord(tuple(r[0] for r in rows), tuple(r[1] for r in rows))


def format_word(w: GroupWord) -> str:
    return f"k {w.k}\n" + "".join(f"{t!r} {tau!r}\n" for t, tau in zip(w.t, w.tau))


class _FlowCache:
    """Autonomous flows of ``v`` and ``-v`` keyed by sign, reused across calls."""

    def __init__(self, v: TrigPoly):
        self.fwd = TorusODE(v)
        self.bwd = TorusODE(-v)

    def flow(self, tau, x, tol):
        if tau == 0.0:
            return x, np.zeros_like(x)
        ode = self.fwd if tau > 0 else self.bwd
        X, L = integrate_points(ode, x, 0.0, [abs(tau)], tol, with_log=True)
        return X[:, 0], L[:, 0]


def word_points(w: GroupWord, v: TrigPoly, x, tol: float = DEFAULT_TOL, _cache=None):
    """Evaluate the word and its derivative at the points ``x``."""
    cache = _cache or _FlowCache(v)
    y = np.atleast_1d(np.asarray(x, dtype=float)).copy()
    logd = np.zeros_like(y)
    for t, tau in zip(reversed(w.t), reversed(w.tau)):
        y, l = cache.flow(tau, y, tol)
        logd += l
        y = y + t
    return y, np.exp(logd)


def eval_word(w: GroupWord, v: TrigPoly, n: int = DEFAULT_N, tol: float = DEFAULT_TOL) -> LiftedMap:
    """Lifted map of the word sampled on an ``n``-point grid."""
    cache = _FlowCache(v)

    def exact(x):
        return word_points(w, v, x, tol, cache)

    val, der = exact(grid(n))
    return LiftedMap(val, der, exact).check_monotone()


def commutator_word(t: float, N: int) -> GroupWord:
    """``(S(1/N) o F(t/N) o S(-1/N) o F(-t/N))^(N^2)`` as a word."""
    if N < 1:
        raise ValueError("N must be >= 1")
    return GroupWord((1.0 / N, -1.0 / N), (t / N, -t / N)).power(N * N)


def commutator_flow_approx(v: TrigPoly, t: float, N: int, n: int = DEFAULT_N,
                           tol: float = DEFAULT_TOL) -> LiftedMap:
    """Commutator of the shift and ``v``-flows raised to ``N^2``.

    With right-to-left composition this tends to the time ``-t`` flow of
    ``v' = [d/dx, v]`` as ``N`` grows; see :func:`commutator_limit`.
    """
    if t == 0.0:
        return LiftedMap.identity(n)
    return eval_word(commutator_word(t, N), v, n, tol)


def commutator_limit(v: TrigPoly, t: float, n: int = DEFAULT_N,
                     tol: float = DEFAULT_TOL) -> LiftedMap:
    """Direct flow that :func:`commutator_flow_approx` converges to."""
    from .fields import derivative
    from .flow import autonomous_flow
    return autonomous_flow(derivative(v), -t, n, tol)


class NoBracketError(RuntimeError):
    """The pinning displacement has no sign change in the search interval."""


def _pin_displacement(rest: GroupWord, v, x0, p, q, tol, cache):
    def delta(T):
        y = np.array([x0])
        for _ in range(q):
            y, _ = word_points(rest, v, y, tol, cache)
            y = y + T
        return float(y[0] - x0 - TWO_PI * p)
    return delta


def pin_word_parameter(w: GroupWord, v: TrigPoly, x0: float, p: int, q: int,
                       bracket: Optional[tuple] = None, widen: int = 0,
                       tol: float = DEFAULT_TOL, _cache=None) -> GroupWord:
    """Replace ``t_1`` by the root ``T`` of ``g_T^q(x0) - x0 - 2 pi p``.

    The displacement is strictly increasing in ``T`` (a final shift composed
    through ``q`` iterates of an increasing map). The default bracket is
    ``t_1 -/+ pi``; with ``widen > 0`` the bracket is extended by up to that
    many ``2 pi`` steps on the side that lacks a sign change.
    """
    cache = _cache or _FlowCache(v)
    rest = w.with_t1(0.0)
    delta = _pin_displacement(rest, v, x0, p, q, tol, cache)
    lo, hi = bracket if bracket is not None else (w.t[0] - math.pi, w.t[0] + math.pi)
    dlo, dhi = delta(lo), delta(hi)
    for _ in range(widen):
        if dlo > 0:
            lo -= TWO_PI
            dlo = delta(lo)
        elif dhi < 0:
            hi += TWO_PI
            dhi = delta(hi)
        else:
            break
    if dlo > 0 or dhi < 0:
        raise NoBracketError(f"no sign change on [{lo}, {hi}] (values {dlo:.3g}, {dhi:.3g})")
    if dlo == 0.0:
        return w.with_t1(lo)
    if dhi == 0.0:
        return w.with_t1(hi)
    T = brentq(delta, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=200)
    return w.with_t1(T)


def orbit_multiplier(w: GroupWord, v: TrigPoly, x0: float, q: int,
                     tol: float = DEFAULT_TOL, _cache=None) -> tuple[float, float]:
    """``(g^q(x0), (g^q)'(x0))``."""
    cache = _cache or _FlowCache(v)
    y = np.array([x0], dtype=float)
    der = 1.0
    for _ in range(q):
        y, d = word_points(w, v, y, tol, cache)
        der *= float(d[0])
    return float(y[0]), der


def simplex_taus(z, k: int, tau_min: float = TAU_MIN) -> tuple:
    """Map ``k-1`` logits to ``tau_j >= tau_min`` with ``sum tau_j = 2 pi``."""
    logits = np.concatenate([[0.0], np.asarray(z, dtype=float)])
    logits -= logits.max()
    w = np.exp(logits)
    w /= w.sum()
    taus = tau_min + (TWO_PI - k * tau_min) * w
    taus[-1] = TWO_PI - math.fsum(taus[:-1])
    return tuple(taus)


@dataclass
class SearchResult:
    word: GroupWord
    orbit: PeriodicOrbit
    restart: int
    evaluations: int


class _Found(Exception):
    def __init__(self, word, orbit):
        self.word, self.orbit = word, orbit


def search_hyperbolic_word(v: TrigPoly, p: int, q: int, k: int = 2,
                           budget: int = DEFAULT_BUDGET, seed: int = 0,
                           tau_min: float = TAU_MIN, threshold: float = HYPERBOLICITY,
                           n_x0: int = 8, tol: float = 1e-9) -> Optional[SearchResult]:
    """Search ``G^1_+`` words with rotation number ``p/q`` and a hyperbolic orbit.

    Free parameters are ``t_2..t_k`` and simplex logits for ``tau``. For each
    candidate, ``t_1`` is pinned so that one of ``n_x0`` scanned points is
    ``q``-periodic, and the objective is the largest ``|log multiplier|``.
    Nelder-Mead with seeded random restarts; the first candidate with
    ``|multiplier - 1| > threshold`` that survives re-evaluation at ``tol/10``
    is returned. Returns None once ``budget`` objective evaluations are spent.
    """
    if k < 2:
        raise ValueError("word length k must be >= 2")
    if math.gcd(p, q) != 1 or q < 1:
        raise ValueError("need q >= 1 and gcd(p, q) = 1")
    if k * tau_min >= TWO_PI:
        raise ValueError("tau_min too large for k")
    rng = np.random.default_rng(seed)
    cache = _FlowCache(v)
    xs = TWO_PI * np.arange(n_x0) / n_x0
    evals = 0
    log_thr = min(math.log1p(threshold), -math.log1p(-threshold))

    def build(params):
        taus = simplex_taus(params[: k - 1], k, tau_min)
        ts = (0.0,) + tuple(params[k - 1:])
        return GroupWord(ts, taus)

    def score(params):
        nonlocal evals
        evals += 1
        base = build(params)
        best, best_word, best_orbit = -1.0, None, None
        guess = TWO_PI * p / q
        for x0 in xs:
            try:
                w = pin_word_parameter(base.with_t1(guess), v, x0, p, q, widen=2 * q + 2,
                                       tol=tol, _cache=cache)
            except NoBracketError:
                continue
            _, mult = orbit_multiplier(w, v, x0, q, tol, cache)
            s = abs(math.log(mult))
            if s > best:
                best, best_word = s, w
                best_orbit = PeriodicOrbit(p, q, float(x0 % TWO_PI), mult)
        return best, best_word, best_orbit

    def verify(word, orbit):
        try:
            w2 = pin_word_parameter(word, v, orbit.x0, p, q, widen=2, tol=tol / 10)
        except NoBracketError:
            return None
        _, mult = orbit_multiplier(w2, v, orbit.x0, q, tol / 10)
        if abs(mult - 1.0) <= threshold or abs(mult - orbit.multiplier) > 0.1 * abs(orbit.multiplier):
            return None
        return w2, PeriodicOrbit(p, q, orbit.x0, mult)

    def objective(params):
        if evals >= budget:
            raise StopIteration
        s, word, orbit = score(params)
        if word is not None and s > log_thr:
            checked = verify(word, orbit)
            if checked is not None:
                raise _Found(*checked)
        return -s

    dim = 2 * k - 2
    restart = 0
    while evals < budget:
        x_init = np.concatenate([rng.normal(0.0, 1.0, k - 1), rng.uniform(-math.pi, math.pi, k - 1)])
        try:
            minimize(objective, x_init, method="Nelder-Mead",
                     options={"maxfev": max(dim + 1, min(budget - evals, 60 * dim)),
                              "initial_simplex": None, "xatol": 1e-4, "fatol": 1e-6})
        except _Found as hit:
            return SearchResult(hit.word, hit.orbit, restart, evals)
        except StopIteration:
            break
        restart += 1
    return None
