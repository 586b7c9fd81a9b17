import math
from fractions import Fraction

import numpy as np
import pytest

from phaselock.fields import TrigPoly, ZERO, parse_harmonics
from phaselock.flow import TorusODE
from phaselock.rotation import rotation_number_ode
from phaselock.tongues import (BracketError, LockProbe, as_rational, boundary_slice,
                               bracket_locked, interior_witness, quantization_check,
                               rationals_between, scan_diagram)


def test_as_rational():
    assert as_rational("2/4") == (1, 2)
    assert as_rational((3, 6)) == (1, 2)
    assert as_rational(Fraction(-2, 3)) == (-2, 3)
    assert as_rational(2) == (2, 1)


def test_translation_slice_is_point():
    sl = boundary_slice(ZERO, ZERO, (1, 3), 0.7, (0.0, 1.0), tol_A=1e-7)
    assert sl.status == "point"
    assert abs(sl.A_left - 1 / 3) < 1e-7 and abs(sl.A_right - 1 / 3) < 1e-7


def test_sin_zero_level_set(sin1):
    sl = boundary_slice(sin1, ZERO, 0, 0.0, (-2.0, 2.0), tol_A=1e-6)
    assert sl.status == "ok"
    assert abs(sl.A_left + 1) < 2e-6 and abs(sl.A_right - 1) < 2e-6
    # outer approximation: the true edges lie inside
    assert sl.A_left <= -1 and sl.A_right >= 1


def test_rsj_integer_slice_refines(sin1, cos1):
    coarse = boundary_slice(sin1, cos1, 1, 1.0, (0.5, 2.0), tol_A=1e-5, witness=False)
    fine = boundary_slice(sin1, cos1, 1, 1.0, (0.5, 2.0), tol_A=1e-6, witness=False)
    assert coarse.width > 0.5
    # nested refinement and agreement within the coarse tolerance
    assert coarse.A_left <= fine.A_left and fine.A_right <= coarse.A_right
    assert abs(coarse.A_left - fine.A_left) <= 1e-5
    # pinned regression value
    assert fine.A_right == pytest.approx(1.6537156, abs=2e-6)


def test_bracket_errors(sin1):
    with pytest.raises(BracketError):
        boundary_slice(sin1, ZERO, 0, 0.0, (1.5, 2.0))
    with pytest.raises(BracketError):
        boundary_slice(sin1, ZERO, 0, 0.0, (-2.0, -1.5))
    with pytest.raises(BracketError):
        boundary_slice(sin1, ZERO, 0, 0.0, (1.0, -1.0))


def test_clipped(sin1):
    sl = boundary_slice(sin1, ZERO, 0, 0.0, (-0.5, 0.5), witness=False)
    assert sl.status == "clipped" and sl.A_left == -0.5 and sl.A_right == 0.5


def test_bracket_locked(sin1, cos1):
    lo, hi = bracket_locked(sin1, cos1, 0, 1.0, 0.0)
    sl = boundary_slice(sin1, cos1, 0, 1.0, (lo, hi))
    assert sl.A_left == pytest.approx(-sl.A_right, abs=2e-6)  # odd field: mirror symmetric
    assert sl.witness is not None and sl.witness.hyperbolicity > 1e-2
    with pytest.raises(BracketError):
        bracket_locked(sin1, cos1, 0, 1.0, 1.2)


def test_mirror_symmetry(sin1, cos1):
    left = boundary_slice(sin1, cos1, -1, 1.0, (-2.0, -0.5), witness=False)
    right = boundary_slice(sin1, cos1, 1, 1.0, (0.5, 2.0), witness=False)
    assert left.A_left == pytest.approx(-right.A_right, abs=2e-6)
    assert left.A_right == pytest.approx(-right.A_left, abs=2e-6)


def test_rationals_between():
    assert rationals_between(-0.1, 1.0, 2) == [Fraction(0), Fraction(1, 2), Fraction(1)]


def test_scan_translation_family_all_points(cos1):
    d = scan_diagram(ZERO, cos1, (-1.1, 1.1), [0.5], 2, include_points=True, witness=False)
    assert d.slices and all(s.width <= 2e-6 for s in d.slices)
    assert [s.rho for s in d.slices] == rationals_between(-1.1, 1.1, 2)


def test_scan_empty_range(sin1, cos1):
    assert scan_diagram(sin1, cos1, (), [1.0], 3).slices == []
    assert scan_diagram(sin1, cos1, (1.0, -1.0), [1.0], 3).slices == []


def test_scan_integer_tongues(sin1, cos1):
    d = scan_diagram(sin1, cos1, (-2.0, 2.0), [0.5, 1.0], 1, witness=False)
    for B in (0.5, 1.0):
        rhos = {s.p for s in d.at(B)}
        assert {-1, 0, 1} <= rhos
        assert all(s.width > 1e-2 for s in d.at(B))
    # disjoint interiors at each B
    for B in (0.5, 1.0):
        sl = sorted(d.at(B), key=lambda s: s.A_left)
        assert all(a.A_right <= b.A_left + 2e-6 for a, b in zip(sl, sl[1:]))


def test_interior_witness_examples(sin1, cos1):
    orbit = interior_witness(sin1, cos1, 0, 0.0, 1.0)
    assert orbit is not None and abs(orbit.multiplier - 1) > 1e-4
    assert interior_witness(ZERO, ZERO, 0, 0.0, 0.0) is None
    assert interior_witness(sin1, cos1, (1, 2), 0.0, 1.0) is None


def test_quantization_not_applicable(mixed, cos1):
    rep = quantization_check(mixed, cos1, (-1, 1), [1.0], 2)
    assert rep.verdict == "N/A" and not rep.applicable


def test_quantization_constant_field(cos1):
    rep = quantization_check(TrigPoly(0.3), cos1, (-1, 1), [1.0], 2)
    assert rep.verdict == "PASS"  # constant fields: only point slices
    assert rep.m is None


def test_lock_probe_generic():
    # D(s, x) = s + 0.1 sin x: locked for |s| <= 0.1
    pr = LockProbe(lambda s, x: s + 0.1 * np.sin(np.asarray(x)), 1, 32)
    assert pr.locked(0.0) and pr.locked(0.1) and not pr.locked(0.1001)
    assert pr.max_nonneg(0.5) and not pr.min_nonpos(0.5)
    assert pr.extreme(0.0, +1) == pytest.approx(0.1, abs=1e-12)


def test_monotonicity_rsj_slices(sin1, cos1):
    # rho at the midpoint of a slice equals its rational
    sl = boundary_slice(sin1, cos1, 1, 1.0, (0.5, 2.0), witness=False)
    est = rotation_number_ode(TorusODE(sin1, 0.5 * (sl.A_left + sl.A_right), 1.0, cos1), 256)
    assert abs(est.value - 1) <= est.error_bound
