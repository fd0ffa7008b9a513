"""The divisibility operator A on an integer window and its exceptional sets.

For f on the window V and n in V,

    (A f)(n) = sum_{p | n, s = +-1} f(n + s p) - sum_{p, s = +-1} f(n + s p) / p,

where p runs over the prime window and steps leaving V are dropped.  The
matrix entry between n and m = n +- p is 1_{p|n} - 1/p, which is symmetric
because p | n iff p | m.  A support mask X restricts on both sides:
A|_X f = (A (f 1_X)) 1_X.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .arith import FactorTable, PrimeWindow, build_factor_table
from .errors import CapacityError, ParameterError

DENSE_LIMIT = 4096


@dataclass(frozen=True)
class SupportMask:
    window_start: int
    bits: np.ndarray  # bool, one entry per window element
    undecided: int = 0

    @property
    def window_len(self) -> int:
        return int(self.bits.size)

    @property
    def cardinality(self) -> int:
        return int(np.count_nonzero(self.bits))

    @classmethod
    def full(cls, window_start: int, window_len: int) -> "SupportMask":
        return cls(window_start, np.ones(window_len, dtype=bool))

    @classmethod
    def empty(cls, window_start: int, window_len: int) -> "SupportMask":
        return cls(window_start, np.zeros(window_len, dtype=bool))

    def _check(self, other: "SupportMask") -> None:
        if other.window_start != self.window_start or other.window_len != self.window_len:
            raise ParameterError("masks over different windows")

    def __and__(self, other: "SupportMask") -> "SupportMask":
        self._check(other)
        return SupportMask(self.window_start, self.bits & other.bits,
                           self.undecided + other.undecided)

    def __or__(self, other: "SupportMask") -> "SupportMask":
        self._check(other)
        return SupportMask(self.window_start, self.bits | other.bits)

    def __invert__(self) -> "SupportMask":
        return SupportMask(self.window_start, ~self.bits)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SupportMask):
            return NotImplemented
        return (self.window_start == other.window_start
                and np.array_equal(self.bits, other.bits))

    def members(self) -> np.ndarray:
        return np.nonzero(self.bits)[0] + self.window_start + 1

    def to_bytes(self) -> bytes:
        head = struct.pack("<2q", self.window_start, self.window_len)
        return head + np.packbits(self.bits, bitorder="little").tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "SupportMask":
        start, length = struct.unpack_from("<2q", data)
        packed = np.frombuffer(data, dtype=np.uint8, offset=16)
        if packed.size != (length + 7) // 8:
            raise ParameterError("mask length mismatch")
        bits = np.unpackbits(packed, bitorder="little")[:length].astype(bool)
        return cls(start, bits)


@dataclass
class OperatorSpec:
    table: FactorTable
    pw: PrimeWindow
    support: SupportMask
    _multiples: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.support.window_len != self.table.window_len or \
                self.support.window_start != self.table.window_start:
            raise ParameterError("support mask does not match the table window")

    @property
    def size(self) -> int:
        return self.table.window_len

    @property
    def H(self) -> int:
        return max(self.pw.primes) if self.pw.primes else 0

    def multiples(self, p: int) -> np.ndarray:
        """Window indices i with p | n_i."""
        m = self._multiples.get(p)
        if m is None:
            st = (-self.table.first) % p
            m = np.arange(st, self.size, p, dtype=np.int64)
            self._multiples[p] = m
        return m

    def restricted(self, support: SupportMask) -> "OperatorSpec":
        return OperatorSpec(self.table, self.pw, support, self._multiples)


def make_operator(window_start: int, window_len: int, pw: PrimeWindow,
                  support: SupportMask | None = None) -> OperatorSpec:
    table = build_factor_table(window_start, window_len, pw)
    if support is None:
        support = SupportMask.full(window_start, window_len)
    return OperatorSpec(table, pw, support)


def apply_operator(spec: OperatorSpec, f: np.ndarray) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    n = spec.size
    if f.shape != (n,):
        raise ParameterError(f"vector length {f.shape} != window length {n}")
    mask = spec.support.bits
    g = np.where(mask, f, 0.0)
    out = np.zeros(n)
    for p in spec.pw.primes:
        if p >= n:
            continue
        w = 1.0 / p
        # unconditional part: -1/p times both neighbours
        out[:-p] -= w * g[p:]
        out[p:] -= w * g[:-p]
        # divisible part: +1 at multiples of p
        m = spec.multiples(p)
        up = m[m + p < n]
        out[up] += g[up + p]
        dn = m[m >= p]
        out[dn] += g[dn - p]
    out[~mask] = 0.0
    return out


def assemble_dense(spec: OperatorSpec) -> np.ndarray:
    n = spec.size
    if n > DENSE_LIMIT:
        raise CapacityError(f"dense assembly limited to {DENSE_LIMIT} (window {n})")
    M = np.zeros((n, n))
    first = spec.table.first
    idx = np.arange(n)
    for p in spec.pw.primes:
        if p >= n:
            continue
        i = idx[:-p]
        val = np.where((first + i) % p == 0, 1.0, 0.0) - 1.0 / p
        M[i, i + p] = val
        M[i + p, i] = val
    mask = spec.support.bits
    M[~mask, :] = 0.0
    M[:, ~mask] = 0.0
    return M


def threshold_count(K, mertens: Fraction) -> int:
    """Largest integer t with t <= K * mertens, computed exactly."""
    return math.floor(Fraction(K) * mertens)


def compute_X0_mask(table: FactorTable, K) -> SupportMask:
    """Mask of the n with omega_P(n) <= K * mertens."""
    if K < 0:
        raise ParameterError("K must be non-negative")
    t = threshold_count(K, table.mertens)
    return SupportMask(table.window_start, table.omega_p <= t)


# --- Y_ell: admissible chains and their escape progressions -----------------

def admissible_extension(chain_p: tuple, chain_s: tuple, p: int, s: int) -> bool:
    """Can (p, s) be appended to the chain without breaking admissibility?

    A prime may not reappear after a different prime has intervened, and two
    consecutive equal primes must carry the same sign.
    """
    if not chain_p:
        return True
    if p == chain_p[-1]:
        return s == chain_s[-1]
    return p not in chain_p


def iter_admissible_chains(primes, max_len: int):
    """Yield (p_vec, s_vec, beta_vec) for admissible chains of length 1..max_len.

    beta_vec[i] = s_1 p_1 + ... + s_i p_i for i = 0..l.
    """
    stack = [((), (), (0,))]
    while stack:
        cp, cs, beta = stack.pop()
        if cp:
            yield cp, cs, beta
        if len(cp) >= max_len:
            continue
        for p in reversed(primes):
            for s in (-1, 1):
                if admissible_extension(cp, cs, p, s):
                    stack.append((cp + (p,), cs + (s,), beta + (beta[-1] + s * p,)))


def chain_progressions(primes, ell: int):
    """Progressions (q, a) of integers excluded from Y_ell.

    Each admissible chain of length l < ell yields one progression per escape:
    p_0 | n and p_0 | n + beta_l with p_0 outside the chain, or beta_l = 0.
    Conflicting congruences give nothing.
    """
    out = set()
    for cp, cs, beta in iter_admissible_chains(tuple(primes), ell - 1):
        conds = [(p, -beta[i]) for i, p in enumerate(cp)]
        escapes = []
        bl = beta[-1]
        if bl == 0:
            escapes.append(None)
        for p0 in primes:
            if p0 not in cp and bl % p0 == 0:
                escapes.append(p0)
        for p0 in escapes:
            cc = conds + ([(p0, 0)] if p0 is not None else [])
            r = crt_pairs(cc)
            if r is not None:
                out.add(r)
    return sorted(out)


def crt_pairs(conds) -> tuple[int, int] | None:
    """Solve n = a_i mod p_i for primes p_i; None on conflict."""
    q, a = 1, 0
    for p, r in conds:
        r %= p
        if q % p == 0:
            if a % p != r:
                return None
            continue
        # a + q t = r mod p
        t = ((r - a) * pow(q, -1, p)) % p
        a += q * t
        q *= p
        a %= q
    return q, a


def yl_excluded_by_chain(n: int, primes, ell: int, node_budget: int = 10**5):
    """Depth-first search for an exclusion witness of n.

    Returns (witness or None, decided).  decided is False when the node
    budget ran out before the search finished.
    """
    nodes = 0
    stack = [((), (), 0)]
    while stack:
        cp, cs, b = stack.pop()
        nodes += 1
        if nodes > node_budget:
            return None, False
        if cp:
            if b == 0:
                return (cp, cs, None), True
            for p0 in primes:
                if p0 not in cp and n % p0 == 0 and (n + b) % p0 == 0:
                    return (cp, cs, p0), True
        if len(cp) >= ell - 1:
            continue
        m = n + b
        for p in primes:
            if m % p:
                continue
            for s in (-1, 1):
                if admissible_extension(cp, cs, p, s):
                    stack.append((cp + (p,), cs + (s,), b + s * p))
    return None, True


def compute_Yl_mask(table: FactorTable, pw: PrimeWindow, ell: int,
                    node_budget: int = 10**5, method: str = "progressions") -> SupportMask:
    """Mask of the window elements lying in Y_ell.

    The default method marks every progression produced by chain_progressions,
    which is exact.  method="dfs" searches chains per n; when the node budget
    runs out the n is treated as excluded and counted in `undecided`.
    """
    if ell < 1 or node_budget < 1:
        raise ParameterError("need ell >= 1 and node_budget >= 1")
    length = table.window_len
    first = table.first
    if method == "progressions":
        excluded = np.zeros(length, dtype=bool)
        for q, a in chain_progressions(pw.primes, ell):
            excluded[(a - first) % q :: q] = True
        return SupportMask(table.window_start, ~excluded)
    if method != "dfs":
        raise ParameterError(f"unknown method {method!r}")
    bits = np.ones(length, dtype=bool)
    undecided = 0
    if ell >= 2:
        ps = pw.primes
        for i in range(length):
            if table.div_offsets[i] == table.div_offsets[i + 1]:
                continue  # no p_1 divides n
            wit, decided = yl_excluded_by_chain(first + i, ps, ell, node_budget)
            if not decided:
                undecided += 1
                bits[i] = False
            elif wit is not None:
                bits[i] = False
    return SupportMask(table.window_start, bits, undecided)


@dataclass(frozen=True)
class ExclusionReport:
    window_len: int
    K: float
    ell: int
    x0_excluded: int
    yl_excluded: int
    union_excluded: int
    x0_bound: float  # density bound exp(-(K log K - K + 1) L)
    yl_bound: float  # count bound 3^l L^l (log H/log H0 + 1 + 1/L) N/H0 + 3^l H^(l+1), as density
    undecided: int = 0

    @property
    def x0_density(self) -> float:
        return self.x0_excluded / self.window_len

    @property
    def yl_density(self) -> float:
        return self.yl_excluded / self.window_len

    @property
    def union_density(self) -> float:
        return self.union_excluded / self.window_len

    def rows(self):
        return [("x0", self.x0_excluded, self.x0_density, self.x0_bound),
                ("yl", self.yl_excluded, self.yl_density, self.yl_bound),
                ("union", self.union_excluded, self.union_density,
                 min(1.0, self.x0_bound + self.yl_bound))]


def x0_density_bound(K: float, L: float) -> float:
    if K <= 0:
        return 1.0
    return math.exp(-(K * math.log(K) - K + 1) * L)


def yl_count_bound(ell: int, pw: PrimeWindow, N: int) -> float:
    L = pw.L
    H, H0 = pw.h, pw.h0
    return (3 ** ell * L ** ell * (math.log(H) / math.log(H0) + 1 + 1 / L) * N / H0
            + 3 ** ell * float(H) ** (ell + 1))


def exclusion_report(table: FactorTable, pw: PrimeWindow, K, ell: int) -> ExclusionReport:
    x0 = compute_X0_mask(table, K)
    yl = compute_Yl_mask(table, pw, ell)
    both = x0 & yl
    n = table.window_len
    return ExclusionReport(
        window_len=n, K=float(K), ell=ell,
        x0_excluded=n - x0.cardinality,
        yl_excluded=n - yl.cardinality,
        union_excluded=n - both.cardinality,
        x0_bound=x0_density_bound(float(K), pw.L),
        yl_bound=min(1.0, yl_count_bound(ell, pw, n) / n) if pw.primes else 0.0,
        undecided=yl.undecided,
    )


def heavy_vertex_form(spec: OperatorSpec, n0: int) -> float:
    """<delta_n0, A^2 delta_n0> computed from the matrix row of n0."""
    i = spec.table.index(n0)
    e = np.zeros(spec.size)
    e[i] = 1.0
    v = apply_operator(spec, e)
    return float(v @ v)


def heavy_vertex_lower(pw: PrimeWindow, n0: int) -> Fraction:
    """sum over p | n0 in P of (1 - 1/p)^2, exactly."""
    return sum((Fraction(p - 1, p) ** 2 for p in pw.primes if n0 % p == 0), Fraction(0))


def find_heavy_vertex(table: FactorTable, K, margin: int) -> int | None:
    """First n with omega_P(n) > K L lying at least `margin` from both window ends."""
    t = threshold_count(K, table.mertens)
    om = table.omega_p
    for i in np.nonzero(om > t)[0]:
        if margin <= i < table.window_len - margin:
            return table.first + int(i)
    return None
