import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from phaselock.fields import TrigPoly, ZERO, derivative
from phaselock.flow import LiftedMap, autonomous_flow, ck_distance, compose, grid
from phaselock.groupwords import (GroupWord, NoBracketError, TAU_MIN, commutator_flow_approx,
                                  commutator_limit, commutator_word, eval_word, format_word,
                                  orbit_multiplier, parse_word, pin_word_parameter,
                                  search_hyperbolic_word, simplex_taus, word_points)
from phaselock.rotation import detect_rational, find_periodic_orbit, rotation_number_map

TWO_PI = 2 * math.pi

# seeded search results (seed 0, default budget), pinned on first verified run
FIXTURE_01 = GroupWord((0.4587941352916669, -1.4464727375963786),
                       (2.9474949651013356, 3.3356903420782507))
FIXTURE_12 = GroupWord((9.147930486057831, -2.8841484100105235, -3.03774645687452),
                       (2.0874505824461544, 2.360420477631756, 1.8353142471016763))


def test_membership():
    w = GroupWord((1.0, 2.0), (math.pi, math.pi))
    assert w.k == 2 and w.in_G(1) and w.in_G1_plus() and w.level() == pytest.approx(1.0)
    assert not GroupWord((0.0, 0.0), (TWO_PI + 1.0, -1.0)).in_G1_plus()
    assert GroupWord((0.0, 0.0), (TWO_PI + 1.0, -1.0)).in_G(1)
    with pytest.raises(ValueError):
        GroupWord((1.0,), (1.0, 2.0))


def test_word_file_roundtrip():
    w = GroupWord((0.1, -2.5), (1.0, TWO_PI - 1.0))
    assert parse_word("# w\n" + format_word(w)) == w
    with pytest.raises(ValueError):
        parse_word("k 2\n0 1\n")
    with pytest.raises(ValueError):
        parse_word("n 1\n0 1\n")


def test_translation_word(sin1):
    g = eval_word(GroupWord((0.7,), (0.0,)), sin1, 64)
    assert np.allclose(g.values, grid(64) + 0.7, atol=1e-15)


def test_flow_word(sin1):
    g = eval_word(GroupWord((0.0,), (1.3,)), sin1, 128)
    assert ck_distance(g, autonomous_flow(sin1, 1.3, 128), 0) < 1e-12
    orbit = find_periodic_orbit(g, 0, 1)
    assert min(abs(orbit.x0), abs(orbit.x0 - math.pi), abs(orbit.x0 - TWO_PI)) < 1e-9


def test_associativity(mixed):
    w1 = GroupWord((0.3, -0.2), (0.5, 0.4))
    w2 = GroupWord((0.1,), (-0.3,))
    lhs = eval_word(w1 + w2, mixed, 1024)
    rhs = compose(eval_word(w1, mixed, 1024), eval_word(w2, mixed, 1024))
    assert ck_distance(lhs, rhs, 0) < 1e-8


def test_trivial_factor(mixed):
    w = GroupWord((0.3, -0.2), (2.0, TWO_PI - 2.0))
    padded = w + GroupWord((0.0,), (0.0,))
    assert ck_distance(eval_word(w, mixed, 256), eval_word(padded, mixed, 256), 0) < 1e-12


def test_commutator_examples(sin1):
    assert np.array_equal(commutator_flow_approx(sin1, 0.0, 5, 64).values, grid(64))
    g = commutator_flow_approx(TrigPoly(0.7), 1.0, 3, 64)
    assert ck_distance(g, LiftedMap.identity(64), 0) < 1e-12
    w = commutator_word(1.0, 4)
    assert w.k == 2 * 16 and w.in_G(0)
    with pytest.raises(ValueError):
        commutator_word(1.0, 0)


def test_commutator_converges(sin1):
    ref = commutator_limit(sin1, 1.0, 256)
    assert ck_distance(ref, autonomous_flow(derivative(sin1), -1.0, 256), 0) == 0.0
    d = [ck_distance(commutator_flow_approx(sin1, 1.0, N, 256), ref, 0) for N in (5, 10, 20)]
    assert d[0] > d[1] > d[2]


def test_pin_translation_family(sin1):
    w = GroupWord((0.0,), (0.0,))
    pinned = pin_word_parameter(w, sin1, 0.0, 1, 2)
    assert pinned.t[0] == pytest.approx(math.pi, abs=1e-13)


def test_pin_residual(mixed):
    w = GroupWord((0.5, -0.4, 0.9), (2.0, 2.5, TWO_PI - 4.5))
    pinned = pin_word_parameter(w, mixed, 1.0, 0, 1, widen=4)
    y, _ = orbit_multiplier(pinned, mixed, 1.0, 1)
    assert abs(y - 1.0) < 1e-10


def test_pin_no_bracket(mixed):
    w = GroupWord((0.0, 0.0), (3.0, TWO_PI - 3.0))
    with pytest.raises(NoBracketError):
        pin_word_parameter(w, mixed, 0.0, 5, 1, widen=0)


@given(st.floats(-3, 3), st.floats(0.01, 1.0))
def test_pin_displacement_monotone(T, dT):
    v = TrigPoly(0.0, {1: (0.0, 1.0), 2: (0.5, 0.0)})
    w = GroupWord((T, 0.4), (2.0, TWO_PI - 2.0))
    y0, _ = word_points(w, v, [0.5])
    y1, _ = word_points(w.with_t1(T + dT), v, [0.5])
    assert y1[0] - y0[0] == pytest.approx(dT, abs=1e-9)


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=4))
def test_simplex_taus(z):
    k = len(z) + 1
    taus = simplex_taus(z, k)
    assert math.fsum(taus) == pytest.approx(TWO_PI, abs=1e-12)
    assert min(taus) >= TAU_MIN - 1e-12


def _check_found(res, v, p, q):
    w = res.word
    assert w.in_G1_plus() and abs(math.fsum(w.tau) - TWO_PI) < 1e-12
    assert min(w.tau) >= TAU_MIN - 1e-12
    assert abs(res.orbit.multiplier - 1) > 1e-2
    g = eval_word(w, v, 512)
    assert detect_rational(rotation_number_map(g), 8) == (p, q)
    _, mu = orbit_multiplier(w, v, res.orbit.x0, q, tol=1e-11)
    assert abs(mu - res.orbit.multiplier) < 0.1 * abs(res.orbit.multiplier)


def test_search_zero(mixed):
    res = search_hyperbolic_word(mixed, 0, 1, k=2, seed=0)
    assert res is not None
    _check_found(res, mixed, 0, 1)
    assert res.word.t == pytest.approx(FIXTURE_01.t, abs=1e-9)
    assert res.word.tau == pytest.approx(FIXTURE_01.tau, abs=1e-12)


def test_search_half(mixed):
    res = search_hyperbolic_word(mixed, 1, 2, k=3, seed=0)
    assert res is not None
    _check_found(res, mixed, 1, 2)
    assert res.word.t == pytest.approx(FIXTURE_12.t, abs=1e-9)


def test_search_validation(mixed):
    with pytest.raises(ValueError):
        search_hyperbolic_word(mixed, 0, 1, k=1)
    with pytest.raises(ValueError):
        search_hyperbolic_word(mixed, 2, 4, k=2)


def test_search_budget_exhaustion(sin1):
    assert search_hyperbolic_word(sin1, 1, 2, k=2, budget=5) is None
