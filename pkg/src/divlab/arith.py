"""Prime sieving, windowed factorization and the functions Omega, lambda, omega_P.

Windows are half-open on the left: a window (N, N+len] holds the integers
N+1, ..., N+len, and index i of every per-n array refers to n = N+1+i.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import ParameterError

BLOCK = 1 << 18
MAX_N = 1 << 48  # keeps sqrt-range sieving and int64 products safe
MAGIC = b"DIVLAB1\0"


def small_primes(limit: int) -> np.ndarray:
    """All primes <= limit, as int64."""
    if limit < 2:
        return np.zeros(0, dtype=np.int64)
    s = np.ones(limit + 1, dtype=bool)
    s[:2] = False
    s[4::2] = False
    for i in range(3, math.isqrt(limit) + 1, 2):
        if s[i]:
            s[i * i :: 2 * i] = False
    return np.nonzero(s)[0].astype(np.int64)


def primes_in_range(lo: int, hi: int) -> np.ndarray:
    """Primes p with lo <= p <= hi, by segmented sieving in blocks of BLOCK."""
    lo = max(lo, 2)
    if hi < lo:
        return np.zeros(0, dtype=np.int64)
    base = small_primes(math.isqrt(hi))
    out = []
    for start in range(lo, hi + 1, BLOCK):
        stop = min(start + BLOCK, hi + 1)
        s = np.ones(stop - start, dtype=bool)
        for p in base:
            p = int(p)
            first = max(p * p, -(-start // p) * p)
            if first >= stop:
                continue
            s[first - start :: p] = False
        out.append(np.nonzero(s)[0].astype(np.int64) + start)
    return np.concatenate(out)


def reciprocal_sum(values: Sequence[int]) -> Fraction:
    """Exact sum of 1/v, merged pairwise so the denominators stay balanced."""
    terms = [(1, int(v)) for v in values]
    if not terms:
        return Fraction(0)
    while len(terms) > 1:
        merged = []
        for i in range(0, len(terms) - 1, 2):
            (a, b), (c, d) = terms[i], terms[i + 1]
            merged.append((a * d + b * c, b * d))
        if len(terms) % 2:
            merged.append(terms[-1])
        terms = merged
    return Fraction(*terms[0])


@dataclass(frozen=True)
class PrimeWindow:
    """A set of primes inside [h0, h] with its exact Mertens sum."""

    h0: int
    h: int
    primes: tuple[int, ...]
    mertens: Fraction
    complete: bool = True

    @classmethod
    def from_primes(cls, primes: Sequence[int], h0: int | None = None,
                    h: int | None = None) -> "PrimeWindow":
        """Build a window from an explicit sublist of primes."""
        ps = tuple(sorted(int(p) for p in primes))
        if len(set(ps)) != len(ps):
            raise ParameterError("duplicate primes")
        if h0 is None:
            h0 = ps[0] if ps else 2
        if h is None:
            h = ps[-1] if ps else h0
        if h0 < 2 or h < h0:
            raise ParameterError(f"need 2 <= h0 <= h, got h0={h0}, h={h}")
        for p in ps:
            if not (h0 <= p <= h) or not _is_prime(p):
                raise ParameterError(f"{p} is not a prime in [{h0}, {h}]")
        return cls(h0, h, ps, reciprocal_sum(ps), complete=False)

    @property
    def L(self) -> float:
        return float(self.mertens)

    def __len__(self) -> int:
        return len(self.primes)


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    for p in (2, 3, 5, 7, 11, 13):
        if n % p == 0:
            return n == p
    i = 17
    while i * i <= n:
        if n % i == 0:
            return False
        i += 2
    return True


def sieve_primes(h0: int, h: int) -> PrimeWindow:
    """All primes of [h0, h] together with their exact reciprocal sum."""
    if h0 < 2 or h < h0:
        raise ParameterError(f"need 2 <= h0 <= h, got h0={h0}, h={h}")
    if h > 1 << 40:
        raise ParameterError("h exceeds 2^40")
    ps = tuple(int(p) for p in primes_in_range(h0, h))
    return PrimeWindow(h0, h, ps, reciprocal_sum(ps))


def mertens_partial(pw: PrimeWindow, lo: int, hi: int) -> Fraction:
    """Exact sum of 1/p over the primes of pw lying in [lo, hi]."""
    if lo > hi:
        raise ParameterError("lo > hi")
    return reciprocal_sum([p for p in pw.primes if lo <= p <= hi])


# --- full factorization over segments --------------------------------------

def omega_segment(lo: int, hi: int, base: np.ndarray | None = None) -> np.ndarray:
    """Omega(n) for lo <= n < hi (int8), with Omega(1) = 0.

    Every prime power p^e <= hi with p <= sqrt(hi) is sieved; the cofactor
    left over after removing those primes is 1 or a single large prime.
    """
    if lo < 1 or hi <= lo:
        raise ParameterError("need 1 <= lo < hi")
    if hi > MAX_N:
        raise ParameterError("segment exceeds the supported integer width")
    if base is None:
        base = small_primes(math.isqrt(hi - 1))
    n = hi - lo
    om = np.zeros(n, dtype=np.int8)
    part = np.ones(n, dtype=np.int64)
    for p in base:
        p = int(p)
        if p * p >= hi:
            break
        pk = p
        while pk < hi:
            st = (-lo) % pk
            om[st::pk] += 1
            part[st::pk] *= p
            pk *= p
    om += part < np.arange(lo, hi, dtype=np.int64)
    return om


def liouville_from_omega(om: np.ndarray) -> np.ndarray:
    return (1 - 2 * (om.astype(np.int8) & 1)).astype(np.int8)


def iter_omega_blocks(lo: int, hi: int, block: int = BLOCK) -> Iterator[tuple[int, np.ndarray]]:
    """Yield (start, Omega array) for consecutive blocks covering [lo, hi)."""
    base = small_primes(math.isqrt(max(hi - 1, 1)))
    for start in range(lo, hi, block):
        stop = min(start + block, hi)
        yield start, omega_segment(start, stop, base)


# --- factor tables ----------------------------------------------------------

@dataclass
class FactorTable:
    """Per-n data over the window (window_start, window_start + window_len].

    The divisors in P are stored in CSR form: the primes of P dividing the
    i-th integer are div_primes[div_offsets[i]:div_offsets[i+1]], ascending.
    """

    window_start: int
    window_len: int
    primes: tuple[int, ...]
    div_offsets: np.ndarray
    div_primes: np.ndarray
    big_omega: np.ndarray
    liouville: np.ndarray
    mertens: Fraction = field(default=Fraction(0))

    @property
    def first(self) -> int:
        return self.window_start + 1

    @property
    def last(self) -> int:
        return self.window_start + self.window_len

    def n_values(self) -> np.ndarray:
        return np.arange(self.first, self.last + 1, dtype=np.int64)

    @property
    def omega_p(self) -> np.ndarray:
        return np.diff(self.div_offsets)

    def index(self, n: int) -> int:
        if not (self.first <= n <= self.last):
            raise ParameterError(f"{n} outside window ({self.window_start}, {self.last}]")
        return n - self.first

    def divisors(self, n: int) -> list[int]:
        i = self.index(n)
        return [int(p) for p in self.div_primes[self.div_offsets[i] : self.div_offsets[i + 1]]]

    def __eq__(self, other) -> bool:
        if not isinstance(other, FactorTable):
            return NotImplemented
        return (self.window_start == other.window_start
                and self.window_len == other.window_len
                and self.primes == other.primes
                and all(np.array_equal(getattr(self, a), getattr(other, a))
                        for a in ("div_offsets", "div_primes", "big_omega", "liouville")))

    def to_bytes(self) -> bytes:
        head = struct.pack("<8s4q", MAGIC, self.window_start, self.window_len,
                           len(self.primes), len(self.div_primes))
        cols = [np.asarray(self.primes, dtype="<i8"), self.div_offsets.astype("<i8"),
                self.div_primes.astype("<i8"), self.big_omega.astype("<i8"),
                self.liouville.astype("<i8")]
        return head + b"".join(c.tobytes() for c in cols)

    @classmethod
    def from_bytes(cls, data: bytes) -> "FactorTable":
        hsize = struct.calcsize("<8s4q")
        if len(data) < hsize:
            raise ParameterError("truncated factor table")
        magic, start, length, npr, ndiv = struct.unpack_from("<8s4q", data)
        if magic != MAGIC:
            raise ParameterError("bad magic bytes")
        sizes = [npr, length + 1, ndiv, length, length]
        if len(data) != hsize + 8 * sum(sizes):
            raise ParameterError("factor table length mismatch")
        cols, pos = [], hsize
        for s in sizes:
            cols.append(np.frombuffer(data, dtype="<i8", count=s, offset=pos).astype(np.int64))
            pos += 8 * s
        primes = tuple(int(p) for p in cols[0])
        return cls(start, length, primes, cols[1], cols[2], cols[3].astype(np.int8),
                   cols[4].astype(np.int8), reciprocal_sum(primes))

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path: str | Path) -> "FactorTable":
        return cls.from_bytes(Path(path).read_bytes())


def divisor_csr(first: int, length: int, primes: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    """CSR lists of the primes in `primes` dividing first, ..., first+length-1."""
    idx_parts, p_parts = [], []
    for p in primes:
        st = (-first) % p
        idx = np.arange(st, length, p, dtype=np.int64)
        idx_parts.append(idx)
        p_parts.append(np.full(idx.size, p, dtype=np.int64))
    if idx_parts:
        idx = np.concatenate(idx_parts)
        ps = np.concatenate(p_parts)
        order = np.lexsort((ps, idx))
        idx, ps = idx[order], ps[order]
    else:
        idx = ps = np.zeros(0, dtype=np.int64)
    offsets = np.zeros(length + 1, dtype=np.int64)
    np.cumsum(np.bincount(idx, minlength=length), out=offsets[1:])
    return offsets, ps


def build_factor_table(window_start: int, window_len: int, pw: PrimeWindow) -> FactorTable:
    """Factor data for (window_start, window_start + window_len] over the primes of pw."""
    if window_start < 0 or window_len < 1:
        raise ParameterError("need window_start >= 0 and window_len >= 1")
    hi = window_start + window_len + 1
    if hi > MAX_N:
        raise ParameterError("window exceeds the supported integer width")
    first = window_start + 1
    offsets, ps = divisor_csr(first, window_len, pw.primes)
    om = np.empty(window_len, dtype=np.int8)
    for start, block in iter_omega_blocks(first, hi):
        om[start - first : start - first + block.size] = block
    return FactorTable(window_start, window_len, tuple(pw.primes), offsets, ps, om,
                       liouville_from_omega(om), pw.mertens)
