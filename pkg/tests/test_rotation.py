import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from phaselock.fields import TrigPoly, ZERO, parse_harmonics
from phaselock.flow import LiftedMap, TorusODE, flow_map
from phaselock.rotation import (DegenerateOrbitError, RotationEstimate, detect_rational,
                                find_periodic_orbit, rotation_number_map, rotation_number_ode)

TWO_PI = 2 * math.pi


def quad_rho(A):
    """Rotation number of x' = A + sin x for A > 1, from the period of one turn."""
    T = quad(lambda x: 1.0 / (A + math.sin(x)), 0, TWO_PI, epsabs=1e-13, epsrel=1e-13)[0]
    return TWO_PI / T


@given(st.floats(-3, 3))
def test_translation(alpha):
    est = rotation_number_map(LiftedMap.translation(TWO_PI * alpha, 64), nmax=16)
    assert abs(est.value - alpha) < 1e-12
    assert est.error_bound > 0


def test_fixed_point_flow(sin1):
    est = rotation_number_map(flow_map(TorusODE(sin1), 256))
    assert abs(est.value) <= est.error_bound
    assert est.error_bound < 1e-3


@pytest.mark.parametrize("A", [1.5, 2.0])
def test_autonomous_against_quadrature(A, sin1):
    ref = quad_rho(A)
    assert ref == pytest.approx(math.sqrt(A * A - 1), abs=1e-12)
    m = rotation_number_map(flow_map(TorusODE(sin1, A), 1024))
    assert abs(m.value - ref) < 1e-6 and m.lower <= ref <= m.upper
    o = rotation_number_ode(TorusODE(sin1, A))
    assert abs(o.value - ref) < 1e-6 and o.lower <= ref <= o.upper


def test_ode_translation():
    est = rotation_number_ode(TorusODE(ZERO, 0.25), 64)
    assert abs(est.value - 0.25) < 1e-9


def test_map_and_ode_agree(sin1, cos1):
    ode = TorusODE(sin1, 0.0, 1.0, cos1)
    o = rotation_number_ode(ode)
    m = rotation_number_map(flow_map(ode, 256))
    assert abs(o.value) <= o.error_bound
    # same lift convention: no integer offset between the two estimates
    assert abs(o.value - m.value) <= o.error_bound + m.error_bound


@given(st.floats(-1, 1), st.floats(0, 1.5), st.floats(-2, 2))
def test_map_ode_consistency_random(a, B, A):
    ode = TorusODE(parse_harmonics([f"s1={a}", "c2=0.3"]), A, B, TrigPoly.cos())
    o = rotation_number_ode(ode, 128)
    m = rotation_number_map(flow_map(ode, 128), 512)
    assert abs(o.value - m.value) <= o.error_bound + m.error_bound + 1e-9


def test_conjugacy_invariance(mixed):
    g = flow_map(TorusODE(mixed, 0.8, 0.5, TrigPoly.cos()), 512)
    r = 1.234
    conj = LiftedMap.from_function(lambda x: g.evaluate_exact(np.asarray(x) - r)[0] + r,
                                   lambda x: g.evaluate_exact(np.asarray(x) - r)[1], 512)
    a, b = rotation_number_map(g), rotation_number_map(conj)
    assert abs(a.value - b.value) <= 2 * max(a.error_bound, b.error_bound)


def test_early_exit():
    est = rotation_number_map(LiftedMap.translation(1.0, 32), nmax=1000, tol=1e-6)
    assert est.iterations == 1
    with pytest.raises(ValueError):
        rotation_number_map(LiftedMap.translation(1.0, 32), nmax=4)
    with pytest.raises(ValueError):
        rotation_number_ode(TorusODE(ZERO), periods=0)


def test_detect_examples():
    assert detect_rational(RotationEstimate(0.5000001, 1e-5, 1), 10) == (1, 2)
    assert detect_rational(RotationEstimate(0.381966, 1e-7, 1), 10) is None
    # two candidates inside the enclosure: ambiguous
    assert detect_rational(RotationEstimate(0.5, 0.2, 1), 3) is None
    with pytest.raises(ValueError):
        detect_rational(RotationEstimate(0.5, 0.1, 1), 0)


@given(st.integers(-20, 20), st.integers(1, 12), st.floats(-1, 1))
def test_detect_recovers_random(p, q, noise):
    fr = Fraction(p, q)
    eb = 1e-6
    est = RotationEstimate(float(fr) + 0.9 * noise * eb, eb, 1)
    assert detect_rational(est, 12) == (fr.numerator, fr.denominator)


def test_periodic_orbit_degenerate():
    with pytest.raises(DegenerateOrbitError):
        find_periodic_orbit(LiftedMap.translation(math.pi, 64), 1, 2)


def test_periodic_orbit_sin_equilibria(sin1):
    orbit = find_periodic_orbit(flow_map(TorusODE(sin1), 256), 0, 1)
    assert min(abs(orbit.x0), abs(orbit.x0 - math.pi), abs(orbit.x0 - TWO_PI)) < 1e-9
    target = math.exp(TWO_PI) if abs(orbit.x0) < 1 or orbit.x0 > 6 else math.exp(-TWO_PI)
    assert orbit.multiplier == pytest.approx(target, rel=1e-5)


def test_designed_two_cycle():
    eps = -0.2
    g = LiftedMap.from_function(lambda x: x + math.pi + eps * np.sin(2 * x),
                                lambda x: 1 + 2 * eps * np.cos(2 * x), 128)
    orbit = find_periodic_orbit(g, 1, 2)
    # attracting cycle {0, pi}: multiplier (1 + 2 eps)^2
    assert min(abs(orbit.x0), abs(orbit.x0 - math.pi), abs(orbit.x0 - TWO_PI)) < 1e-10
    assert orbit.multiplier == pytest.approx((1 + 2 * eps) ** 2, rel=1e-10)
    assert orbit.multiplier < 1


def test_no_orbit_returns_none(sin1):
    assert find_periodic_orbit(flow_map(TorusODE(sin1, 1.5), 128), 0, 1) is None
    with pytest.raises(ValueError):
        find_periodic_orbit(LiftedMap.translation(1.0, 32), 2, 4)


def test_orbit_implies_detection(sin1, cos1):
    g = flow_map(TorusODE(sin1, 0.0, 1.0, cos1), 256)
    orbit = find_periodic_orbit(g, 0, 1)
    assert orbit.hyperbolicity > 1e-2
    assert detect_rational(rotation_number_map(g), 8) == (0, 1)


def test_monotone_in_A(mixed, cos1):
    vals = [rotation_number_ode(TorusODE(mixed, A, 0.7, cos1), 128) for A in np.linspace(-2, 2, 9)]
    for a, b in zip(vals, vals[1:]):
        assert a.value <= b.value + a.error_bound + b.error_bound
