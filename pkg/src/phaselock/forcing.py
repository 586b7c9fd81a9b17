"""Periodic step forcings that realize group words, and trigonometric forcing synthesis.

A word ``g = S(t_1) o F(tau_1) o ... o S(t_k) o F(tau_k)`` with positive
``tau`` summing to ``2 pi`` is realized by the equation ``x' = v(x) + phi(t)``
where ``phi`` vanishes while ``F(tau_s)`` should act and carries a short tall
plateau of mass ``~ t_s`` where the shift ``S(t_s)`` should act. As the plateau
width ``delta`` shrinks, the period map tends to ``g``.

Time runs forward through the segments ``[T_s, T_{s-1}]`` for
``s = k, ..., 1`` (``T_s = 2 pi - tau_1 - ... - tau_s``), so the rightmost
factor of the word acts first. Each segment splits into an idle part ``I``,
a rise ``J`` of width ``delta^2``, a plateau ``R`` and a fall ``V`` of width
``delta^2`` ending at ``T_{s-1}``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from . import _backend
from .fields import (TrigPoly, harmonic_gcd, is_special_form, quotient_field,
                     truncate_fourier)
from .flow import (DEFAULT_TOL, TWO_PI, IntegrationError, NonMonotoneError, TorusODE,
                   ck_distance, flow_map, integrate_points)
from .groupwords import (DEFAULT_BUDGET, HYPERBOLICITY, TAU_MIN, GroupWord, _FlowCache,
                         eval_word, search_hyperbolic_word, word_points)
from .rotation import PeriodicOrbit, rotation_number_map
from .tongues import PROBE_GRID, LockProbe, _bisect, as_rational, interior_witness

MAP_GRID = 256


def bump_psi(u):
    """Flat ``C^inf`` transition: 0 on ``[0, 1/3]``, 1 on ``[2/3, 1]``, ``1/2`` at ``1/2``.

    Built from ``h(s) = exp(-1/s)`` as ``h(3u-1) / (h(3u-1) + h(2-3u))``.
    Accepts scalars or arrays.
    """
    u = np.asarray(u, dtype=float)
    a = 3.0 * u - 1.0
    b = 2.0 - 3.0 * u
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        ha = np.where(a > 0, np.exp(-1.0 / np.where(a > 0, a, 1.0)), 0.0)
        hb = np.where(b > 0, np.exp(-1.0 / np.where(b > 0, b, 1.0)), 0.0)
        out = ha / (ha + hb)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class StepForcing:
    """The plateau forcing ``phi_delta`` of a word in ``G^1_+``.

    Parameters
    ----------
    word : GroupWord
        Needs every ``tau_j > 0`` and ``sum(tau) = 2 pi``.
    delta : float
        Plateau width; segments stay disjoint only if ``delta + delta^2 < min(tau)``.
    """

    word: GroupWord
    delta: float

    def __post_init__(self):
        w, d = self.word, float(self.delta)
        if not w.in_G1_plus(atol=1e-9):
            raise ValueError("word must have tau_j > 0 summing to 2 pi")
        if not d > 0:
            raise ValueError("delta must be positive")
        if d + d * d >= min(w.tau):
            raise ValueError(f"delta={d} too large: need delta + delta^2 < min tau = {min(w.tau)}")
        object.__setattr__(self, "delta", d)

    @property
    def k(self) -> int:
        return self.word.k

    @property
    def T(self) -> np.ndarray:
        """Segment ends ``T_0 = 2 pi > T_1 > ... > T_k = 0``."""
        T = TWO_PI - np.array([math.fsum(self.word.tau[:s]) for s in range(self.k + 1)])
        T[0], T[-1] = TWO_PI, 0.0
        return T

    @property
    def heights(self) -> np.ndarray:
        return np.asarray(self.word.t) / self.delta

    def segments(self, s: int) -> dict:
        """``{"I": (lo, hi), "J": ..., "R": ..., "V": ...}`` for segment ``s`` (1-based)."""
        T, d = self.T, self.delta
        e = T[s - 1]
        return {"I": (T[s], e - d - d * d), "J": (e - d - d * d, e - d),
                "R": (e - d, e - d * d), "V": (e - d * d, e)}

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        u = np.mod(t, TWO_PI)
        d, d2 = self.delta, self.delta ** 2
        T = self.T
        out = np.zeros(u.shape)
        for s in range(1, self.k + 1):
            h = self.word.t[s - 1] / d
            e = T[s - 1]
            rise = (u >= e - d - d2) & (u < e - d)
            plateau = (u >= e - d) & (u < e - d2)
            fall = (u >= e - d2) & (u < e)
            out = np.where(rise, h * bump_psi((u - e + d + d2) / d2), out)
            out = np.where(plateau, h, out)
            out = np.where(fall, h * bump_psi((e - u) / d2), out)
        return float(out) if out.ndim == 0 else out

    def mass(self) -> float:
        """``integral_0^{2pi} phi dt = sum(t)``.

        The plateau carries ``t_s (1 - delta)``; since ``psi(u) + psi(1 - u) = 1``
        the rise and fall each add ``t_s delta / 2``.
        """
        return math.fsum(self.word.t)

    def kernel_spec(self):
        return (_backend.F_STEP, np.ascontiguousarray(self.T), np.ascontiguousarray(self.heights),
                self.k, self.delta)

    def breakpoints(self, t0: float, t1: float) -> np.ndarray:
        d, d2 = self.delta, self.delta ** 2
        e = self.T[:-1]
        base = np.concatenate([self.T, e - d - d2, e - d, e - d2])
        first, last = math.floor(t0 / TWO_PI), math.ceil(t1 / TWO_PI)
        pts = np.concatenate([base + TWO_PI * j for j in range(first, last + 1)])
        return np.unique(pts[(pts >= t0) & (pts <= t1)])

    def with_word(self, word: GroupWord) -> "StepForcing":
        return StepForcing(word, self.delta)


def build_step_forcing(w: GroupWord, delta: float) -> StepForcing:
    return StepForcing(w, delta)


def step_ode(v: TrigPoly, sf: StepForcing) -> TorusODE:
    """``x' = v(x) + phi(t)``, the ``A = 0, B = 1`` member."""
    return TorusODE(v, 0.0, 1.0, sf)


# delta limit ----------------------------------------------------------------

@dataclass
class DeltaLadder:
    deltas: list
    c0: list
    c1: list
    failures: dict = field(default_factory=dict)

    def decreasing(self, which: str = "c0", slack: float = 1.0) -> bool:
        """Strictly decreasing ladder; ``slack > 1`` tolerates one step up by that factor."""
        vals = [x for x in getattr(self, which) if np.isfinite(x)]
        ups = 0
        for a, b in zip(vals, vals[1:]):
            if b >= a:
                if b > slack * a or slack == 1.0:
                    return False
                ups += 1
        return ups <= 1


def verify_delta_limit(w: GroupWord, v: TrigPoly, deltas: Sequence[float], n: int = MAP_GRID,
                       tol: float = DEFAULT_TOL) -> DeltaLadder:
    """Distances between the period map of the step-forced equation and the word's map."""
    target = eval_word(w, v, n, tol)
    ladder = DeltaLadder(list(map(float, deltas)), [], [])
    for d in ladder.deltas:
        try:
            g = flow_map(step_ode(v, StepForcing(w, d)), n, tol)
            ladder.c0.append(ck_distance(g, target, 0))
            ladder.c1.append(ck_distance(g, target, 1))
        except (IntegrationError, NonMonotoneError) as exc:
            ladder.failures[d] = str(exc)
            ladder.c0.append(float("nan"))
            ladder.c1.append(float("nan"))
    return ladder


# rotation correction --------------------------------------------------------

class CorrectionError(RuntimeError):
    """No shift ``sigma`` within the allowed range achieves the target."""


def _step_probe(v, sf: StepForcing, base_t1: float, p: int, q: int, n: int, tol: float):
    def dfun(sigma, x):
        ode = step_ode(v, sf.with_word(sf.word.with_t1(base_t1 + sigma)))
        X, _ = integrate_points(ode, x, 0.0, [TWO_PI * q], tol)
        return X[:, 0] - np.asarray(x) - TWO_PI * p
    return LockProbe(dfun, q, n, 100.0 * q * tol)


def correct_rotation(w: GroupWord, v: TrigPoly, alpha, delta: float,
                     sigma_max: float = math.pi, n: int = PROBE_GRID, tol: float = DEFAULT_TOL,
                     detector_tol: float = 1e-6, tol_sigma: float = 1e-9) -> StepForcing:
    """Shift ``t_1`` by ``2 pi n + sigma`` so the step-forced equation has rotation ``alpha``.

    ``alpha`` is a rational (``Fraction``, ``(p, q)`` or ``"p/q"``); it must
    differ from the word's rotation number by an integer ``n``. The plateau
    heights make the rotation number nondecreasing in ``sigma``, so ``sigma``
    is found by bisection on the lock classification and set to the middle of
    the locked ``sigma``-interval; ``sigma = 0`` if already locked.

    Raises
    ------
    ValueError
        ``alpha - rho(word)`` is not an integer.
    CorrectionError
        Lock is not reached for ``|sigma| <= sigma_max``.
    """
    p, q = as_rational(alpha)
    est = rotation_number_map(eval_word(w, v, MAP_GRID, tol), tol=detector_tol)
    shift = p / q - est.value
    n_int = round(shift)
    if abs(shift - n_int) > est.error_bound + detector_tol:
        raise ValueError(f"alpha - rho(word) = {shift:.9g} is not an integer")
    base = w.with_t1(w.t[0] + TWO_PI * n_int)
    sf = StepForcing(base, delta)
    t1 = base.t[0]
    pr = _step_probe(v, sf, t1, p, q, n, tol)
    if pr.locked(0.0):
        return sf
    if not pr.max_nonneg(0.0):  # rotation too small: push sigma up
        if not pr.max_nonneg(sigma_max):
            raise CorrectionError(f"rho stays below {p}/{q} for sigma <= {sigma_max}")
        _, left, _ = _bisect(pr.max_nonneg, 0.0, sigma_max, tol_sigma, 200)
        if pr.min_nonpos(sigma_max):
            right = sigma_max
        else:
            right, _, _ = _bisect(lambda s: not pr.min_nonpos(s), left, sigma_max, tol_sigma, 200)
    else:
        if not pr.min_nonpos(-sigma_max):
            raise CorrectionError(f"rho stays above {p}/{q} for sigma >= {-sigma_max}")
        right, _, _ = _bisect(lambda s: not pr.min_nonpos(s), -sigma_max, 0.0, tol_sigma, 200)
        if pr.max_nonneg(-sigma_max):
            left = -sigma_max
        else:
            _, left, _ = _bisect(pr.max_nonneg, -sigma_max, right, tol_sigma, 200)
    sigma = 0.5 * (left + right)
    return sf.with_word(base.with_t1(t1 + sigma))


# synthesis ------------------------------------------------------------------

@dataclass
class SynthesisOptions:
    seed: int = 0
    budget: int = DEFAULT_BUDGET
    word_lengths: Optional[tuple] = None
    tau_min: float = TAU_MIN
    threshold: float = HYPERBOLICITY
    n: int = MAP_GRID
    probe_n: int = PROBE_GRID
    tol: float = DEFAULT_TOL
    search_tol: float = 1e-9
    sigma_max: float = math.pi
    max_halvings: int = 6
    N_max: int = 512
    certify_tol: float = HYPERBOLICITY


@dataclass
class SynthesisReport:
    """Outcome of :func:`synthesize_forcing`; ``stage`` is the last stage reached."""

    p: int
    q: int
    stage: str = "start"
    ok: bool = False
    m: int = 1
    rho: Optional[Fraction] = None
    word: Optional[GroupWord] = None
    word_multiplier: float = float("nan")
    lock_margin: float = float("nan")
    delta: float = float("nan")
    c0_distance: float = float("nan")
    sigma: float = float("nan")
    step_multiplier: float = float("nan")
    N: int = 0
    truncation_multiplier: float = float("nan")
    witness: Optional[PeriodicOrbit] = None
    evaluations: int = 0
    diagnostics: list = field(default_factory=list)

    @property
    def multiplier(self) -> float:
        return self.witness.multiplier if self.witness is not None else float("nan")

    def to_text(self) -> str:
        w = self.witness
        rows = [
            ("stage", self.stage), ("ok", self.ok), ("p", self.p), ("q", self.q),
            ("m", self.m), ("rho", self.rho), ("N", self.N), ("delta", self.delta),
            ("sigma", self.sigma), ("multiplier", self.multiplier),
            ("witness_x0", w.x0 if w else float("nan")),
            ("word_multiplier", self.word_multiplier), ("step_multiplier", self.step_multiplier),
            ("truncation_multiplier", self.truncation_multiplier),
            ("lock_margin", self.lock_margin), ("c0_distance", self.c0_distance),
            ("evaluations", self.evaluations),
            ("word_t", " ".join(repr(x) for x in self.word.t) if self.word else ""),
            ("word_tau", " ".join(repr(x) for x in self.word.tau) if self.word else ""),
        ]
        lines = [f"{k} = {v!r}" if isinstance(v, float) else f"{k} = {v}" for k, v in rows]
        lines += [f"diagnostic = {d}" for d in self.diagnostics]
        return "\n".join(lines) + "\n"


def word_lock_margin(w: GroupWord, v: TrigPoly, p: int, q: int, n: int = PROBE_GRID,
                     tol: float = DEFAULT_TOL, limit: float = math.pi) -> float:
    """Largest ``eps`` such that ``S(s) o g`` stays ``p/q``-locked for ``|s| <= eps``.

    Any lifted map within ``C^0`` distance ``eps`` of ``g`` is squeezed between
    ``S(-eps) o g`` and ``S(eps) o g`` and therefore has rotation ``p/q``.
    Zero when ``g`` itself is not locked.
    """
    cache = _FlowCache(v)
    rest = w.with_t1(0.0)

    def dfun(s, x):
        y = np.asarray(x, dtype=float)
        for _ in range(q):
            y = word_points(rest, v, y, tol, cache)[0] + w.t[0] + s
        return y - np.asarray(x) - TWO_PI * p

    pr = LockProbe(dfun, q, n, 100.0 * q * tol)
    if not pr.locked(0.0):
        return 0.0
    left = -limit if pr.max_nonneg(-limit) else _bisect(pr.max_nonneg, -limit, 0.0, 1e-9, 200)[1]
    right = limit if pr.min_nonpos(limit) else _bisect(
        lambda s: not pr.min_nonpos(s), 0.0, limit, 1e-9, 200)[0]
    return float(min(-left, right))


def _fourier_samples(sf: StepForcing, N: int) -> np.ndarray:
    # resolve the delta^2 ramps with >= 16 samples each and satisfy n >= 4N + 4
    need = max(4 * N + 4, int(16 * 3 * TWO_PI / sf.delta ** 2))
    ns = 1 << max(10, math.ceil(math.log2(need)))
    return sf(TWO_PI * np.arange(ns) / ns)


def _log_close(mu, ref, frac=0.5) -> bool:
    # compare hyperbolicity strength |log mu|: the attracting and repelling
    # orbits of one lock are equally valid witnesses
    if not (mu > 0 and ref > 0):
        return False
    a, b = abs(math.log(mu)), abs(math.log(ref))
    return abs(a - b) <= frac * b


def synthesize_forcing(v: TrigPoly, p: int, q: int,
                       options: Optional[SynthesisOptions] = None):
    """Trigonometric forcing ``f`` whose family has a ``p/q`` phase-lock area through ``(0, 1)``.

    Stages: special-form gate, quotient normalization by ``m = harmonic_gcd(v)``,
    hyperbolic word search, plateau width selection, rotation correction,
    Fourier truncation and certification by an interior witness in the
    original coordinates. ``p/q`` is the target in quotient coordinates;
    the certified rotation number of ``x' = v(x) + A + B f(t)`` is
    ``p / (q m)`` (see ``report.rho``).

    Returns
    -------
    (f, report)
        ``f`` is None when a stage fails; the report names the stage reached.
    """
    o = options or SynthesisOptions()
    fr = Fraction(p, q)
    p, q = fr.numerator, fr.denominator
    rep = SynthesisReport(p, q)

    rep.stage = "special-form"
    sform = is_special_form(v)
    if sform.special:
        rep.m = sform.m or 1
        rep.diagnostics.append(
            "field is a single harmonic (or constant): wide phase-lock areas only at "
            "multiples of 1/m, no hyperbolic words exist off that lattice")
        return None, rep

    rep.stage = "normalize"
    m = harmonic_gcd(v)
    rep.m = m
    w_field = v if m == 1 else quotient_field(v, m) * float(m)
    rep.rho = Fraction(p, q * m)

    rep.stage = "word-search"
    lengths = o.word_lengths or ((2, 3, 4) if q == 1 else (3, 4))
    found = None
    for k in lengths:
        found = search_hyperbolic_word(w_field, p, q, k, o.budget, o.seed,
                                       o.tau_min, o.threshold, tol=o.search_tol)
        if found is not None:
            rep.evaluations += found.evaluations
            break
        rep.evaluations += o.budget
        rep.diagnostics.append(f"no hyperbolic word of length {k} within budget {o.budget}")
    if found is None:
        return None, rep
    word = found.word
    rep.word, rep.word_multiplier = word, found.orbit.multiplier

    rep.stage = "delta"
    rep.lock_margin = word_lock_margin(word, w_field, p, q, o.probe_n, o.tol)
    g_word = eval_word(word, w_field, o.n, o.tol)
    delta = min(word.tau) / 8.0
    sf = step_orbit = None
    for _ in range(o.max_halvings + 1):
        rep.delta = delta
        try:
            g = flow_map(step_ode(w_field, StepForcing(word, delta)), o.n, o.tol)
            rep.c0_distance = ck_distance(g, g_word, 0)
            cand = correct_rotation(word, w_field, (p, q), delta, o.sigma_max, o.probe_n, o.tol)
        except (IntegrationError, NonMonotoneError, CorrectionError) as exc:
            rep.diagnostics.append(f"delta={delta:g}: {exc}")
            delta *= 0.5
            continue
        except ValueError as exc:  # word rotation off target: not fixable by delta
            rep.stage = "correct-rotation"
            rep.diagnostics.append(str(exc))
            return None, rep
        orbit = interior_witness(w_field, cand, (p, q), 0.0, 1.0, o.threshold, o.probe_n, o.tol)
        if orbit is not None and _log_close(orbit.multiplier, rep.word_multiplier):
            sf, step_orbit = cand, orbit
            break
        got = "none" if orbit is None else f"{orbit.multiplier:.4g}"
        rep.diagnostics.append(f"delta={delta:g}: step multiplier {got} vs word "
                               f"{rep.word_multiplier:.4g}")
        delta *= 0.5
    if sf is None:
        return None, rep
    rep.stage = "correct-rotation"
    rep.sigma = sf.word.t[0] - word.t[0]
    rep.step_multiplier = step_orbit.multiplier

    rep.stage = "truncate"
    N = math.ceil(8.0 / delta)
    F = None
    while N <= o.N_max:
        cand = truncate_fourier(_fourier_samples(sf, N), N)
        orbit = interior_witness(w_field, cand, (p, q), 0.0, 1.0, o.threshold, o.probe_n, o.tol)
        if orbit is not None and _log_close(orbit.multiplier, step_orbit.multiplier):
            F = cand
            rep.truncation_multiplier = orbit.multiplier
            break
        N *= 2
    rep.N = N
    if F is None:
        rep.diagnostics.append(f"no truncation degree <= {o.N_max} keeps the lock")
        return None, rep

    rep.stage = "certify"
    f = F * (1.0 / m)
    rep.witness = interior_witness(v, f, rep.rho, 0.0, 1.0, o.certify_tol, o.probe_n, o.tol)
    if rep.witness is None:
        rep.diagnostics.append("no hyperbolic witness at (A, B) = (0, 1)")
        return None, rep
    rep.stage = "done"
    rep.ok = True
    return f, rep
