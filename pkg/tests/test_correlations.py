import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from divlab.arith import PrimeWindow, sieve_primes
from divlab.correlations import (Arith, abs_s_integrals, chowla_log_average, omega_pair_double_sum,
                                 dyadic_primes, fourth_moment_exact, log_sum, pi_k_counts,
                                 prefix_sums_at, prime_phase_diagnostics, z_integral_residual,
                                 scale_average_abs, short_interval_lambda, z_series)
from divlab.errors import ParameterError


def big_omega(n: int) -> int:
    c, d = 0, 2
    while d * d <= n:
        while n % d == 0:
            n //= d
            c += 1
        d += 1
    return c + (n > 1)


def lam(n):
    return -1 if big_omega(n) % 2 else 1


def g_brute(n):
    return lam(n) * lam(n + 1)


def test_arith_kinds():
    om = np.array([0, 1, 2, 3])
    assert Arith().values(om).tolist() == [1, -1, 1, -1]
    assert Arith("omega-indicator", (1, 2)).values(om).tolist() == [0, 1, 1, 0]
    with pytest.raises(ParameterError):
        Arith("omega-indicator")
    with pytest.raises(ParameterError):
        Arith("mobius")


@given(st.integers(1, 3000), st.lists(st.integers(0, 400), min_size=1, max_size=6))
def test_prefix_sums_brute(base, offs):
    pts = [base + o for o in offs]
    got = prefix_sums_at(pts, "liouville", "liouville", base)
    for m in pts:
        assert got[m] == sum(g_brute(n) for n in range(base + 1, m + 1))


def test_log_sum_brute():
    x, w = 5000, 50.0
    want = sum(g_brute(n) / n for n in range(math.floor(x / w) + 1, x + 1))
    assert log_sum(x, w, "liouville", "liouville") == pytest.approx(want, abs=1e-10)
    want0 = sum(1 / n for n in range(101, x + 1))
    assert log_sum(x, w, "liouville", "liouville", shift_one=False) == pytest.approx(want0, abs=1e-10)


def test_constant_log_average_near_one():
    r = chowla_log_average(10**6, 10**4, "constant", "constant")
    assert 0.9 <= r.value <= 1.1


def test_omega_indicator_average():
    x, w = 20000, 100.0
    r = chowla_log_average(x, w, "omega-indicator", "omega-indicator", I1=(2, 3), I2=(1, 2))
    want = sum(1 / n for n in range(201, x + 1)
               if 2 <= big_omega(n) <= 3 and 1 <= big_omega(n + 1) <= 2)
    assert r.value == pytest.approx(want / math.log(w), abs=1e-12)


def test_z_series_brute_and_constant():
    pw = sieve_primes(11, 31)
    zs = z_series(20000, 100, 8, pw)
    L = float(pw.mertens)
    for T, v in zip(zs.T, zs.values):
        want = sum(sum(g_brute(n) for n in range(math.floor(T / p) + 1, math.floor(2 * T / p) + 1)) / T
                   for p in pw.primes) / L
        assert v == pytest.approx(want, abs=1e-12)
    zc = z_series(10**6, 10**3, 16, pw, f1="constant", f2="constant")
    assert np.all(np.abs(zc.values - 1) <= 0.05)


def test_zcirc_single_prime_is_abs_s():
    pw = PrimeWindow.from_primes([13])
    za = z_series(10**5, 100, 8, pw, absolute=True)
    zs = z_series(10**5, 100, 8, pw)
    assert np.allclose(za.values, np.abs(zs.values))


def test_z_integral_constant_case():
    pw = sieve_primes(11, 101)
    r = z_integral_residual(10**5, 100, pw, "constant", "constant")
    assert r.ok and r.residual < 0.05 * r.log_sum


def test_z_integral_matches_quadrature():
    pw = sieve_primes(11, 17)
    x, w = 3000, 20.0
    r = z_integral_residual(x, w, pw)
    L = float(pw.mertens)

    def Z(t):
        return sum(sum(g_brute(n) for n in range(math.floor(t / p) + 1, math.floor(2 * t / p) + 1)) / t
                   for p in pw.primes) / L

    # Z is smooth between the points t = n p / 2
    cuts = sorted({n * p / 2 for p in pw.primes for n in range(1, 2 * x) if x / w < n * p / 2 < x})
    edges = [x / w] + cuts + [x]
    total = sum(integrate.quad(lambda t: Z(t) / t, a, b)[0] for a, b in zip(edges, edges[1:]) if b > a)
    assert r.z_integral == pytest.approx(total, abs=1e-9)


def test_abs_integral_matches_quadrature():
    ends = [7.3, 40.0, 123.5, 300.0]
    F = abs_s_integrals(ends, "liouville", "liouville")

    def S(t):
        return sum(g_brute(n) for n in range(math.floor(t) + 1, math.floor(2 * t) + 1)) / t

    for e in ends[1:]:
        cuts = [j / 2 for j in range(15, int(2 * e) + 1) if 7.3 < j / 2 < e]
        edges = [7.3] + cuts + [e]
        want = sum(integrate.quad(lambda t: abs(S(t)) / t, a, b)[0] for a, b in zip(edges, edges[1:]))
        assert F[e] == pytest.approx(want, abs=1e-10)
    assert F[7.3] == 0


def test_abs_integral_streams_across_blocks(monkeypatch):
    import divlab.correlations as c
    ends = [10.0, 777.7, 5000.0]
    ref = abs_s_integrals(ends, "liouville", "liouville")
    monkeypatch.setattr(c, "STREAM_BLOCK", 97)
    orig = c.iter_g_blocks
    monkeypatch.setattr(c, "iter_g_blocks", lambda lo, hi, f1, f2, block=97: orig(lo, hi, f1, f2, block))
    small = c.abs_s_integrals(ends, "liouville", "liouville")
    for e in ends:
        assert small[e] == pytest.approx(ref[e], abs=1e-12)


def test_scale_average_zcirc_identity():
    pw = sieve_primes(11, 29)
    r = scale_average_abs(10**5, 100, pw)
    assert r.extra["slack"] <= 10 * r.extra["log_H"]
    pw1 = PrimeWindow.from_primes([11])
    r1 = scale_average_abs(10**5, 100, pw1)
    assert r1.extra["zcirc"] >= 0


def test_pi_k_small_window():
    assert pi_k_counts(10, 10) == {0: 0, 1: 4, 2: 2, 3: 3, 4: 1}


def test_pi_k_partition_large():
    c = pi_k_counts(10**6, 10**6)
    assert sum(c.values()) == 10**6
    assert c[0] == 0 and c[1] == 70435  # primes in (1e6, 2e6]


def test_com_brute_and_tail():
    pw = sieve_primes(11, 31)
    r = omega_pair_double_sum(1000, 2000, pw, 2, 3)
    lhs = sum(Fraction(sum(1 for n in range(1001, 3001) if big_omega(n) == 2 and big_omega(n + p) == 3), p)
              for p in pw.primes)
    assert r.lhs == lhs
    pk = sum(1 for n in range(1001, 3001) if big_omega(n) == 2)
    pl = sum(1 for n in range(1001, 3001) if big_omega(n) == 3)
    assert r.main_term == pw.mertens * pk * pl / 2000
    tail = omega_pair_double_sum(1000, 2000, pw, 40, 2)
    assert tail.lhs == tail.main_term == 0 and tail.ratio == 1.0


def test_phase_sum_at_zero():
    d = prime_phase_diagnostics(200)
    assert d.Q_values[0].real == pytest.approx(d.Qsum, rel=1e-12)
    assert abs(d.Q_values[0].imag) < 1e-12
    assert d.fourth_moment == pytest.approx(d.fourth_moment_grid, rel=1e-9)


@settings(max_examples=20)
@given(st.integers(8, 300))
def test_fourth_moment_brute(H):
    ps = dyadic_primes(H).primes
    if not ps:
        return
    r = {}
    for p in ps:
        for q in ps:
            r[q - p] = r.get(q - p, 0) + Fraction(1, p * q)
    want = sum(v * v for v in r.values())
    assert fourth_moment_exact(ps) == pytest.approx(float(want), rel=1e-12)


def test_phase_errors():
    with pytest.raises(ParameterError):
        prime_phase_diagnostics(100, grid=10)
    with pytest.raises(ParameterError):
        prime_phase_diagnostics(100, pw=PrimeWindow.from_primes([11]))


def test_short_intervals():
    s = short_interval_lambda(10**5, 100, 20, kind="constant")
    assert np.all(s.values == 1)
    s = short_interval_lambda(10**5, 10**5 // 4, 3, seed=2)
    assert s.h == 25000 and np.all(s.values <= 1)
    with pytest.raises(ParameterError):
        short_interval_lambda(10**5, 10**5 // 4 + 1, 3)


def test_short_interval_brute():
    s = short_interval_lambda(5000, 30, 5, seed=4)
    rng = np.random.default_rng(4)
    ts = rng.integers(5000, 2 * 5000 - 60 + 1, size=5)
    for v, t in zip(s.values, ts):
        assert v == pytest.approx(abs(sum(lam(m) for m in range(t + 1, t + 61))) / 60)
