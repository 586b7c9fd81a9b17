"""Trigonometric polynomials on the circle: vector fields v(x) and forcings f(t).

A :class:`TrigPoly` stores ``p(x) = c + sum_k (a_k cos kx + b_k sin kx)`` with
real cosine/sine pairs keyed by positive degree.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, reduce
from typing import Iterable, Mapping, NamedTuple

import numpy as np

#: coefficient pairs with max(|a|, |b|) below this are dropped
CANONICAL_EPS = 1e-14


@dataclass(frozen=True)
class TrigPoly:
    """Finite Fourier series on the circle, kept in canonical form.

    Parameters
    ----------
    constant : float
        Mean value.
    harmonics : mapping or iterable
        ``{k: (a_k, b_k)}`` or ``[(k, a_k, b_k), ...]`` with positive integer ``k``.
        Pairs below :data:`CANONICAL_EPS` are dropped and the rest stored
        sorted by degree.
    """

    constant: float = 0.0
    harmonics: tuple = field(default=())

    def __post_init__(self):
        items = self.harmonics
        if isinstance(items, Mapping):
            items = [(k, ab[0], ab[1]) for k, ab in items.items()]
        seen = {}
        for k, a, b in items:
            if int(k) != k or k < 1:
                raise ValueError(f"harmonic degree must be a positive integer, got {k!r}")
            k = int(k)
            if k in seen:
                raise ValueError(f"duplicate harmonic degree {k}")
            seen[k] = (float(a), float(b))
        canon = tuple(
            (k, a, b) for k, (a, b) in sorted(seen.items())
            if max(abs(a), abs(b)) >= CANONICAL_EPS
        )
        object.__setattr__(self, "constant", float(self.constant))
        object.__setattr__(self, "harmonics", canon)

    # construction helpers -------------------------------------------------
    @classmethod
    def sin(cls, k: int = 1, amp: float = 1.0) -> "TrigPoly":
        return cls(0.0, {k: (0.0, amp)})

    @classmethod
    def cos(cls, k: int = 1, amp: float = 1.0) -> "TrigPoly":
        return cls(0.0, {k: (amp, 0.0)})

    @classmethod
    def from_dense(cls, a, b) -> "TrigPoly":
        """Build from dense arrays where ``a[0]`` is the constant and ``b[0]`` is ignored."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        return cls(a[0], [(k, a[k], b[k]) for k in range(1, len(a))])

    # queries ----------------------------------------------------------------
    @property
    def degrees(self) -> tuple[int, ...]:
        return tuple(k for k, _, _ in self.harmonics)

    @property
    def degree(self) -> int:
        return self.harmonics[-1][0] if self.harmonics else 0

    def coefficients(self, k: int) -> tuple[float, float]:
        for kk, a, b in self.harmonics:
            if kk == k:
                return a, b
        return 0.0, 0.0

    @cached_property
    def dense(self) -> tuple[np.ndarray, np.ndarray]:
        """Dense coefficient arrays ``(a, b)`` of length ``degree + 1``; ``a[0]`` is the constant."""
        a = np.zeros(self.degree + 1)
        b = np.zeros(self.degree + 1)
        a[0] = self.constant
        for k, ak, bk in self.harmonics:
            a[k] = ak
            b[k] = bk
        return a, b

    def __call__(self, x):
        return evaluate(self, x)

    # arithmetic -------------------------------------------------------------
    def __add__(self, other):
        if isinstance(other, (int, float)):
            return TrigPoly(self.constant + other, self.harmonics)
        if not isinstance(other, TrigPoly):
            return NotImplemented
        acc = {k: (a, b) for k, a, b in self.harmonics}
        for k, a, b in other.harmonics:
            a0, b0 = acc.get(k, (0.0, 0.0))
            acc[k] = (a0 + a, b0 + b)
        return TrigPoly(self.constant + other.constant, acc)

    __radd__ = __add__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, s):
        if not isinstance(s, (int, float)):
            return NotImplemented
        return TrigPoly(self.constant * s, [(k, a * s, b * s) for k, a, b in self.harmonics])

    __rmul__ = __mul__

    def __str__(self):
        terms = [f"{self.constant:g}"] if self.constant or not self.harmonics else []
        for k, a, b in self.harmonics:
            if a:
                terms.append(f"{a:g}*cos({k}x)")
            if b:
                terms.append(f"{b:g}*sin({k}x)")
        return " + ".join(terms)


ZERO = TrigPoly()


def evaluate(p: TrigPoly, x):
    """Evaluate ``p`` at ``x`` (scalar or array) by direct summation."""
    xa = np.asarray(x, dtype=float)
    out = np.full(xa.shape, p.constant)
    for k, a, b in p.harmonics:
        out = out + a * np.cos(k * xa) + b * np.sin(k * xa)
    if np.ndim(x) == 0:
        return float(out)
    return out


def derivative(p: TrigPoly) -> TrigPoly:
    """Return p'. Each pair maps ``(a_k, b_k) -> (k b_k, -k a_k)``."""
    return TrigPoly(0.0, [(k, k * b, -k * a) for k, a, b in p.harmonics])


def harmonic_gcd(p: TrigPoly) -> int | None:
    """Greatest common divisor of the degrees with nonzero pairs; None for constants."""
    if not p.harmonics:
        return None
    return reduce(math.gcd, p.degrees)


class SpecialForm(NamedTuple):
    special: bool
    m: int | None


def is_special_form(p: TrigPoly) -> SpecialForm:
    """Check whether ``p = a sin(mx) + b cos(mx) + c``.

    Constants count as special with ``m = None``; two or more harmonic
    degrees make the field non-special.
    """
    degs = p.degrees
    if len(degs) == 0:
        return SpecialForm(True, None)
    if len(degs) == 1:
        return SpecialForm(True, degs[0])
    return SpecialForm(False, None)


def quotient_field(p: TrigPoly, m: int) -> TrigPoly:
    """Divide every harmonic degree by ``m`` (the quotient by rotations of order m)."""
    if m < 1 or int(m) != m:
        raise ValueError(f"m must be a positive integer, got {m!r}")
    bad = [k for k in p.degrees if k % m]
    if bad:
        raise ValueError(f"m={m} does not divide harmonic degrees {bad}")
    return TrigPoly(p.constant, [(k // m, a, b) for k, a, b in p.harmonics])


def truncate_fourier(samples, N: int) -> TrigPoly:
    """Degree-``N`` trigonometric polynomial from uniform samples on ``[0, 2pi)``.

    Coefficients are the trapezoid-rule Fourier integrals of the samples,
    computed with a real FFT.
    """
    samples = np.asarray(samples, dtype=float)
    n = samples.shape[0]
    if N < 0:
        raise ValueError("N must be non-negative")
    if n < 4 * N + 4:
        raise ValueError(f"undersampled: need n >= 4N+4 = {4 * N + 4}, got {n}")
    c = np.fft.rfft(samples) / n
    return TrigPoly(c[0].real, [(k, 2.0 * c[k].real, -2.0 * c[k].imag) for k in range(1, N + 1)])


def sample(p, n: int) -> np.ndarray:
    """Values of a callable on the uniform grid ``2 pi i / n``."""
    return np.asarray(p(2.0 * np.pi * np.arange(n) / n), dtype=float)


# text format --------------------------------------------------------------

class FormatError(ValueError):
    pass


def parse_trigpoly(text: str, source: str = "<string>") -> TrigPoly:
    """Parse the ``constant <c>`` / ``harm <k> <a> <b>`` line format.

    Blank lines and ``#`` comments are ignored; fields may be separated by
    any whitespace.
    """
    constant = None
    harms = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == "constant" and len(parts) == 2:
                if constant is not None:
                    raise FormatError("repeated constant line")
                constant = float(parts[1])
            elif parts[0] == "harm" and len(parts) == 4:
                harms.append((int(parts[1]), float(parts[2]), float(parts[3])))
            else:
                raise FormatError(f"unrecognized line {raw.strip()!r}")
        except (ValueError, FormatError) as exc:
            raise FormatError(f"{source}:{lineno}: {exc}") from None
    if constant is None:
        raise FormatError(f"{source}: missing 'constant' line")
    try:
        return TrigPoly(constant, harms)
    except ValueError as exc:
        raise FormatError(f"{source}: {exc}") from None


def format_trigpoly(p: TrigPoly) -> str:
    lines = [f"constant {p.constant!r}"]
    lines += [f"harm {k} {a!r} {b!r}" for k, a, b in p.harmonics]
    return "\n".join(lines) + "\n"


def read_trigpoly(path) -> TrigPoly:
    with open(path) as fh:
        return parse_trigpoly(fh.read(), str(path))


def parse_harmonics(items: Iterable[str]) -> TrigPoly:
    """Shorthand used by tests and the CLI: ``["c=0.5", "s1=1", "c2=0.5"]``."""
    const = 0.0
    acc: dict[int, list[float]] = {}
    for item in items:
        key, val = item.split("=")
        if key == "c":
            const = float(val)
            continue
        kind, k = key[0], int(key[1:])
        pair = acc.setdefault(k, [0.0, 0.0])
        pair[0 if kind == "c" else 1] = float(val)
    return TrigPoly(const, {k: tuple(v) for k, v in acc.items()})
