"""Chowla-type averages, scale averages, Omega-restricted counts and prime phase sums.

Throughout g(n) = f1(n) f2(n+1), S(t) = (1/t) sum_{t < n <= 2t} g(n) and

    Z(T)  = (1/L) sum_p (1/p) S(T/p),     Z°(T) = (1/L) sum_p (1/p) |S(T/p)|,

with L the Mertens sum of the prime window.  All n-sums are streamed in
blocks of STREAM_BLOCK integers; nothing is tabulated over the full range.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

from .arith import PrimeWindow, omega_segment, primes_in_range, reciprocal_sum, small_primes
from .errors import CapacityError, ParameterError

STREAM_BLOCK = 1 << 22
KINDS = ("liouville", "constant", "omega-indicator")


@dataclass(frozen=True)
class Arith:
    """f(n) from Omega(n): Liouville, constant 1, or the indicator of Omega(n) in I."""

    kind: str = "liouville"
    interval: tuple[int, int] | None = None  # inclusive range for omega-indicator

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown function kind {self.kind!r}")
        if self.kind == "omega-indicator" and self.interval is None:
            raise ParameterError("omega-indicator needs an interval")

    def values(self, om: np.ndarray) -> np.ndarray:
        if self.kind == "liouville":
            return (1 - 2 * (om.astype(np.int64) & 1)).astype(np.int64)
        if self.kind == "constant":
            return np.ones(om.size, dtype=np.int64)
        lo, hi = self.interval
        return ((om >= lo) & (om <= hi)).astype(np.int64)


def _as_arith(f) -> Arith:
    if isinstance(f, Arith):
        return f
    return Arith(f)


def iter_g_blocks(lo: int, hi: int, f1, f2, block: int = STREAM_BLOCK) -> Iterator[tuple[int, np.ndarray]]:
    """Yield (start, g) with g[i] = f1(n) f2(n+1) for n = start + i, covering lo <= n < hi.

    Each block sieves one extra integer so that f2(n+1) is available at its
    right edge.
    """
    f1, f2 = _as_arith(f1), _as_arith(f2)
    if lo < 1 or hi < lo:
        raise ParameterError("need 1 <= lo <= hi")
    base = small_primes(math.isqrt(hi + 1))
    const1 = f1.kind == "constant"
    const2 = f2.kind == "constant"
    for start in range(lo, hi, block):
        stop = min(start + block, hi)
        if const1 and const2:
            yield start, np.ones(stop - start, dtype=np.int64)
            continue
        om = omega_segment(start, stop + 1, base)
        yield start, f1.values(om[:-1]) * f2.values(om[1:])


def prefix_sums_at(points: Sequence[int], f1, f2, base: int = 0) -> dict:
    """G(m) - G(base) for each m in points (all >= base), G(m) = sum_{n <= m} g(n)."""
    pts = np.unique(np.asarray(points, dtype=np.int64))
    out = {}
    if pts.size == 0:
        return out
    if pts[0] < base:
        raise ParameterError("query below the base point")
    acc = 0
    j = 0
    while j < pts.size and pts[j] == base:
        out[int(base)] = 0
        j += 1
    for start, g in iter_g_blocks(base + 1, int(pts[-1]) + 1, f1, f2):
        cs = np.cumsum(g)
        stop = start + g.size
        k = np.searchsorted(pts, stop, side="left")
        sel = pts[j:k]
        if sel.size:
            vals = acc + cs[sel - start]
            out.update(zip(sel.tolist(), vals.tolist()))
        j = k
        acc += int(cs[-1])
    return out


# --- logarithmic averages ---------------------------------------------------

@dataclass
class ScaleAverage:
    x: int
    w: float
    value: float
    kind: str
    lo: int  # summation over lo < n <= hi (or integration over [lo, hi])
    hi: int
    extra: dict = field(default_factory=dict)

    def row(self):
        return (self.kind, self.x, self.w, self.value)


def log_sum(x: int, w: float, f1, f2, shift_one: bool = True) -> float:
    """sum_{x/w < n <= x} f1(n) f2(n+1) / n (f2(n) when shift_one is False)."""
    lo = math.floor(x / w)
    total = 0.0
    if shift_one:
        for start, g in iter_g_blocks(lo + 1, x + 1, f1, f2):
            total += float(np.sum(g / np.arange(start, start + g.size, dtype=np.float64)))
        return total
    f1, f2 = _as_arith(f1), _as_arith(f2)
    base = small_primes(math.isqrt(x))
    for start in range(lo + 1, x + 1, STREAM_BLOCK):
        stop = min(start + STREAM_BLOCK, x + 1)
        om = omega_segment(start, stop, base)
        g = f1.values(om) * f2.values(om)
        total += float(np.sum(g / np.arange(start, stop, dtype=np.float64)))
    return total


def chowla_log_average(x: int, w: float, f1="liouville", f2="liouville",
                       I1: tuple[int, int] | None = None, I2: tuple[int, int] | None = None,
                       shift_one: bool = True) -> ScaleAverage:
    """(1/log w) sum_{x/w < n <= x} f1(n) f2(n+1) / n."""
    if not (math.e < w <= x):
        raise ParameterError("need e < w <= x")
    a1 = Arith(f1, I1) if isinstance(f1, str) else f1
    a2 = Arith(f2, I2) if isinstance(f2, str) else f2
    s = log_sum(x, w, a1, a2, shift_one)
    return ScaleAverage(x, w, s / math.log(w), f"log-average {a1.kind}*{a2.kind}",
                        math.floor(x / w), x, {"sum": s})


# --- Z(T), Z°(T) and the identities relating them to log averages ----------

@dataclass
class CorrelationSeries:
    T: np.ndarray
    values: np.ndarray
    absolute: bool
    primes: tuple[int, ...]
    n_terms: np.ndarray  # integers summed per grid point

    def rows(self):
        return [(float(t), float(v), int(c)) for t, v, c in zip(self.T, self.values, self.n_terms)]


def z_series(x: int, w: float, grid_points: int, pw: PrimeWindow, absolute: bool = False,
             f1="liouville", f2="liouville") -> CorrelationSeries:
    """Z(T) or Z°(T) on a geometric grid of [x/w, x], with exact inner sums."""
    if grid_points < 8:
        raise ParameterError("need at least 8 grid points")
    if not pw.primes:
        raise ParameterError("empty prime window")
    T = np.geomspace(x / w, x, grid_points)
    P = np.asarray(pw.primes, dtype=np.int64)
    lo = np.floor(T[:, None] / P[None, :]).astype(np.int64)
    hi = np.floor(2 * T[:, None] / P[None, :]).astype(np.int64)
    base = int(lo.min())
    G = prefix_sums_at(np.concatenate([lo.ravel(), hi.ravel()]), f1, f2, base)
    cnt = np.vectorize(G.get)(hi) - np.vectorize(G.get)(lo)
    terms = cnt / T[:, None]  # (1/p) S(T/p)
    if absolute:
        terms = np.abs(terms)
    L = float(pw.mertens)
    return CorrelationSeries(T, terms.sum(axis=1) / L, absolute, tuple(pw.primes),
                             (hi - lo).sum(axis=1))


def _zint_exact(x: int, w: float, pw: PrimeWindow, f1, f2) -> float:
    """int_{x/w}^x Z(t) dt/t in closed form.

    n lies in (t/p, 2t/p] exactly for t in [np/2, np), so each n contributes
    g(n) (1/a - 1/b) with a = max(np/2, x/w), b = min(np, x).
    """
    lo_x = x / w
    P = np.asarray(pw.primes, dtype=np.float64)
    nmin = max(1, math.floor(lo_x / P.max()))
    nmax = math.floor(2 * x / P.min())
    total = 0.0
    for start, g in iter_g_blocks(nmin, nmax + 1, f1, f2):
        n = np.arange(start, start + g.size, dtype=np.float64)
        nz = g != 0
        n, gv = n[nz], g[nz].astype(np.float64)
        for p in P:
            a = np.maximum(n * p / 2, lo_x)
            b = np.minimum(n * p, x)
            ok = a < b
            total += float(np.sum(gv[ok] * (1 / a[ok] - 1 / b[ok])))
    return total / float(pw.mertens)


@dataclass
class ZIntegralResult:
    log_sum: float
    z_integral: float
    residual: float
    bound: float

    @property
    def ok(self) -> bool:
        return self.residual <= self.bound


def z_integral_residual(x: int, w: float, pw: PrimeWindow, f1="liouville", f2="liouville",
                    c_resid: float = 10.0) -> ZIntegralResult:
    """|sum_{x/w<n<=x} g(n)/n - int_{x/w}^x Z(t) dt/t| against c_resid log H / L."""
    if not (1 < w <= x):
        raise ParameterError("need 1 < w <= x")
    s = log_sum(x, w, f1, f2)
    zi = _zint_exact(x, w, pw, f1, f2)
    bound = c_resid * math.log(max(pw.primes)) / float(pw.mertens)
    return ZIntegralResult(s, zi, abs(s - zi), bound)


def abs_s_integrals(endpoints: Sequence[float], f1, f2) -> dict:
    """F(e) = int_{e0}^{e} |S(t)| dt/t for each endpoint e, e0 the smallest one.

    On [j/2, (j+1)/2) one has S(t) = C_j / t with C_j = G(j) - G(floor(j/2)),
    so each piece integrates to |C_j| (1/a - 1/b) exactly.  G(j) and
    G(floor(j/2)) come from two streams advancing in step.
    """
    es = sorted(set(float(e) for e in endpoints))
    if es[0] < 1:
        raise ParameterError("endpoints must be >= 1")
    e0, e1 = es[0], es[-1]
    j_lo = math.floor(2 * e0)
    j_hi = math.floor(2 * e1)
    base = j_lo // 2
    # stream B: G(m) - G(base) for m in [base, j_hi // 2]
    half = iter_g_blocks(base + 1, j_hi // 2 + 1, f1, f2)
    hbuf = np.zeros(1, dtype=np.int64)  # G over [hstart, hstart + len)
    hstart = base
    hacc = 0
    gacc = 0
    out = {}
    ends = np.asarray(es)
    ej = np.floor(2 * ends).astype(np.int64)
    acc = 0.0  # integral from e0 up to the start of the current piece (j/2)
    # the first piece starts at j_lo/2 <= e0; remove the part below e0 at the end
    for start, g in iter_g_blocks(base + 1, j_hi + 1, f1, f2):
        stop = start + g.size
        G = gacc + np.cumsum(g)  # G(start + i) - G(base)
        gacc = int(G[-1])
        js = np.arange(max(start, j_lo), stop, dtype=np.int64)
        if js.size == 0:
            continue
        Gj = G[js - start]
        need_lo, need_hi = int(js[0] // 2), int(js[-1] // 2)
        while hstart + hbuf.size - 1 < need_hi:
            _, g2 = next(half)
            # drop what no later block can ask for, keep the rest
            cut = max(need_lo - hstart, 0)
            hbuf = np.concatenate([hbuf[cut:], hacc + np.cumsum(g2)])
            hstart += cut
            hacc = int(hbuf[-1])
        Gh = hbuf[js // 2 - hstart]
        C = np.abs(Gj - Gh).astype(np.float64)
        jf = js.astype(np.float64)
        piece = C * (2 / jf - 2 / (jf + 1))
        cum = np.concatenate([[0.0], np.cumsum(piece)])
        sel = np.nonzero((ej >= js[0]) & (ej <= js[-1]))[0]
        for i in sel:
            r = int(ej[i] - js[0])
            out[es[i]] = acc + cum[r] + C[r] * (2 / jf[r] - 1 / ends[i])
        acc += float(cum[-1])
    off = out[e0]
    return {e: v - off for e, v in out.items()}


def scale_average_abs(x: int, w: float, pw: PrimeWindow | None = None, f1="liouville",
                      f2="liouville") -> ScaleAverage:
    """(1/log w) int_{x/w}^x |S(t)| dt/t, and, with a prime window, the same
    integral of Z°(T), which equals (1/L) sum_p (1/p) int_{x/wp}^{x/p} |S| dt/t."""
    if not (1 < w <= x):
        raise ParameterError("need 1 < w <= x")
    lw = math.log(w)
    pts = [x / w, float(x)]
    if pw is not None:
        for p in pw.primes:
            pts += [x / (w * p), x / p]
    F = abs_s_integrals(pts, f1, f2)
    direct = (F[float(x)] - F[x / w]) / lw
    extra = {"direct": direct}
    if pw is not None:
        zc = sum((F[x / p] - F[x / (w * p)]) / p for p in pw.primes) / float(pw.mertens) / lw
        extra.update(zcirc=zc, slack=abs(direct - zc) * lw, log_H=math.log(max(pw.primes)))
    return ScaleAverage(x, w, direct, "scale-average |S|", math.floor(x / w), x, extra)


# --- Omega counts and the double sum -----------------------------------------

def omega_window(window_start: int, length: int) -> np.ndarray:
    """Omega(n) for n in (window_start, window_start + length]."""
    lo, hi = window_start + 1, window_start + length + 1
    base = small_primes(math.isqrt(hi))
    parts = [omega_segment(s, min(s + STREAM_BLOCK, hi), base) for s in range(lo, hi, STREAM_BLOCK)]
    return np.concatenate(parts)


def pi_k_counts(window_start: int, window_len: int, k_max: int | None = None) -> dict:
    """#{n in the window: Omega(n) = k}; every k up to max(k_max, largest seen)."""
    om = omega_window(window_start, window_len)
    counts = np.bincount(om.astype(np.int64))
    top = max(len(counts) - 1, k_max or 0)
    out = {k: int(counts[k]) if k < len(counts) else 0 for k in range(top + 1)}
    if sum(out.values()) != window_len:
        raise AssertionError("Omega counts do not partition the window")
    return out


@dataclass
class OmegaPairResult:
    lhs: Fraction
    main_term: Fraction
    pi_k: int
    pi_l: int

    @property
    def ratio(self) -> float:
        if self.main_term == 0:
            return math.nan if self.lhs else 1.0
        return float(self.lhs / self.main_term)


def omega_pair_double_sum(window_start: int, window_len: int, pw: PrimeWindow, k: int, l: int) -> OmegaPairResult:
    """sum_p (1/p) #{n: Omega(n) = k, Omega(n+p) = l} against L pi_k pi_l / N."""
    H = max(pw.primes)
    om = omega_window(window_start, window_len + H)
    a = om[:window_len] == k
    counts = []
    for p in pw.primes:
        counts.append(int(np.count_nonzero(a & (om[p:p + window_len] == l))))
    lhs = sum((Fraction(c, p) for c, p in zip(counts, pw.primes)), Fraction(0))
    pk = int(np.count_nonzero(a))
    pl = int(np.count_nonzero(om[:window_len] == l))
    main = pw.mertens * pk * pl / window_len
    return OmegaPairResult(lhs, main, pk, pl)


# --- prime phase sums --------------------------------------------------------

@dataclass
class PhaseDiagnostics:
    H: int
    primes: tuple[int, ...]
    Qsum: float  # sum 1/q
    epsilon: float
    grid: int
    Q_values: np.ndarray
    major_measure: float
    fourth_moment: float
    fourth_moment_grid: float
    delta: float
    measure_bound: float
    moment_bound: float


def dyadic_primes(H: int) -> PrimeWindow:
    """The primes of [H/2, H]."""
    lo = math.ceil(H / 2)
    ps = [int(p) for p in primes_in_range(lo, H)]
    return PrimeWindow(lo, H, tuple(ps), reciprocal_sum(ps))


def phase_sum_grid(primes: Sequence[int], grid: int) -> np.ndarray:
    """Q(j/grid) = sum_q e(q j/grid)/q for j = 0..grid-1, by FFT."""
    a = np.zeros(grid, dtype=np.complex128)
    for q in primes:
        a[q % grid] += 1.0 / q
    return np.fft.ifft(a) * grid


def fourth_moment_exact(primes: Sequence[int]) -> float:
    """int_0^1 |Q|^4 = sum_m |sum_{q-p=m} 1/(pq)|^2 from the exact autocorrelation."""
    H = max(primes)
    v = np.zeros(H + 1)
    for q in primes:
        v[q] = 1.0 / q
    r = np.correlate(v, v, mode="full")
    return float(np.sum(r * r))


def prime_phase_diagnostics(H: int, epsilon: float = 0.5, grid: int | None = None,
                            pw: PrimeWindow | None = None) -> PhaseDiagnostics:
    """Q on a uniform grid, the grid measure of {|Q| > eps Q(0)} and the exact fourth moment."""
    if H < 4:
        raise ParameterError("need H >= 4")
    pw = pw or dyadic_primes(H)
    if any(not (H / 2 <= q <= H) for q in pw.primes):
        raise ParameterError("primes must lie in [H/2, H]")
    grid = grid or 8 * H
    if grid < 8 * H:
        raise ParameterError("grid needs at least 8H points")
    Q = phase_sum_grid(pw.primes, grid)
    Qs = float(pw.mertens)
    meas = float(np.mean(np.abs(Q) > epsilon * Qs))
    fm = fourth_moment_exact(pw.primes)
    fm_grid = float(np.mean(np.abs(Q) ** 4))
    delta = Qs * math.log(H)
    return PhaseDiagnostics(H, tuple(pw.primes), Qs, epsilon, grid, Q, meas, fm, fm_grid, delta,
                            100 / ((epsilon * delta) ** 4 * H), 100 / (H * math.log(H) ** 4))


# --- short intervals ---------------------------------------------------------

@dataclass
class ShortIntervalStats:
    x: int
    h: int
    samples: int
    seed: int
    values: np.ndarray  # |sum_{t < m <= t+2h} f(m)| / 2h

    @property
    def mean(self) -> float:
        return float(self.values.mean())

    @property
    def p95(self) -> float:
        return float(np.percentile(self.values, 95))


def short_interval_lambda(x: int, h: int, samples: int, seed: int = 1,
                          kind: str = "liouville") -> ShortIntervalStats:
    """Normalized sums of f over (t, t+2h] for t drawn uniformly from [x, 2x - 2h]."""
    if not (1 <= h <= x // 4):
        raise ParameterError("need 1 <= h <= x/4")
    if samples < 1:
        raise ParameterError("need samples >= 1")
    if 2 * h * samples > 2 * 10**9:
        raise CapacityError("too many integers to sieve")
    f = Arith(kind) if kind != "omega-indicator" else None
    if f is None:
        raise ParameterError("short intervals take liouville or constant")
    rng = np.random.default_rng(seed)
    ts = rng.integers(x, 2 * x - 2 * h + 1, size=samples)
    base = small_primes(math.isqrt(2 * x + 1))
    vals = np.empty(samples)
    for i, t in enumerate(ts):
        t = int(t)
        s = 0
        for start in range(t + 1, t + 2 * h + 1, STREAM_BLOCK):
            stop = min(start + STREAM_BLOCK, t + 2 * h + 1)
            if kind == "constant":
                s += stop - start
            else:
                s += int(f.values(omega_segment(start, stop, base)).sum())
        vals[i] = abs(s) / (2 * h)
    return ShortIntervalStats(x, h, samples, seed, vals)


radaro_residual = z_integral_residual
com_double_sum = omega_pair_double_sum
