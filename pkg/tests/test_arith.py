import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from divlab.arith import (FactorTable, PrimeWindow, build_factor_table, mertens_partial,
                          omega_segment, primes_in_range, sieve_primes, small_primes)
from divlab.errors import ParameterError


def naive_big_omega(n):
    c, d = 0, 2
    while d * d <= n:
        while n % d == 0:
            n //= d
            c += 1
        d += 1
    return c + (n > 1)


def trial_primes(lo, hi):
    return [n for n in range(max(lo, 2), hi + 1) if all(n % d for d in range(2, math.isqrt(n) + 1))]


def test_small_window():
    assert sieve_primes(10, 20).primes == (11, 13, 17, 19)
    assert sieve_primes(2, 5).mertens == Fraction(31, 30)


def test_mertens_frozen():
    pw = sieve_primes(11, 101)
    assert len(pw.primes) == 22
    # exact sum from an independent trial-division prime list
    assert pw.mertens == Fraction(705825469927109105454019237053389176,
                                  1108868401707130290000301508954796967)
    assert pw.mertens == sum(Fraction(1, p) for p in trial_primes(11, 101))


def test_bad_ranges():
    with pytest.raises(ParameterError):
        sieve_primes(20, 10)
    with pytest.raises(ParameterError):
        sieve_primes(1, 10)
    with pytest.raises(ParameterError):
        PrimeWindow.from_primes([11, 15])
    with pytest.raises(ParameterError):
        PrimeWindow.from_primes([11, 11])


def test_sublist_constructor():
    pw = PrimeWindow.from_primes([13, 7, 11])
    assert pw.primes == (7, 11, 13) and not pw.complete
    assert pw.mertens == Fraction(1, 7) + Fraction(1, 11) + Fraction(1, 13)


def test_mertens_partial():
    pw = sieve_primes(2, 10)
    assert mertens_partial(pw, 3, 7) == Fraction(71, 105)
    assert mertens_partial(pw, 11, 20) == 0
    assert mertens_partial(pw, 2, 10) == pw.mertens


def test_factor_table_examples():
    t = build_factor_table(0, 100, sieve_primes(10, 20))
    assert t.big_omega[t.index(12)] == 3 and t.liouville[t.index(12)] == -1
    assert t.divisors(77) == [11] and t.omega_p[t.index(77)] == 1


def test_omega_p_mean():
    pw = sieve_primes(11, 101)
    t = build_factor_table(10**6, 10**4, pw)
    assert abs(t.omega_p.mean() - pw.L) <= 0.05


def test_table_roundtrip(tmp_path):
    pw = sieve_primes(3, 30)
    t = build_factor_table(5000, 777, pw)
    t.save(tmp_path / "t.bin")
    assert FactorTable.load(tmp_path / "t.bin") == t
    with pytest.raises(ParameterError):
        FactorTable.from_bytes(b"junk" * 20)


@given(st.integers(1, 10**6), st.integers(1, 300))
def test_omega_segment_matches_trial_division(lo, n):
    om = omega_segment(lo, lo + n)
    assert [int(v) for v in om] == [naive_big_omega(m) for m in range(lo, lo + n)]


@given(st.integers(0, 10**7), st.integers(1, 400), st.integers(2, 60), st.integers(0, 60))
def test_table_invariants(start, length, h0, span):
    pw = sieve_primes(h0, h0 + span)
    t = build_factor_table(start, length, pw)
    ns = t.n_values()
    assert np.array_equal(t.liouville, np.where(t.big_omega % 2 == 0, 1, -1))
    for i in range(0, length, max(1, length // 25)):
        n = int(ns[i])
        divs = t.divisors(n)
        assert divs == [p for p in pw.primes if n % p == 0]
        if pw.primes:
            assert len(divs) <= math.log(2 * n) / math.log(pw.h0) + 1e-9


@given(st.integers(2, 3000), st.integers(0, 3000))
def test_primes_in_range(lo, span):
    assert list(primes_in_range(lo, lo + span)) == trial_primes(lo, lo + span)
    assert list(small_primes(lo)) == trial_primes(2, lo)
