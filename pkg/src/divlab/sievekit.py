"""Combinatorial sieve identities, sieving by composite moduli, and the Kubilius model.

Propositions are indexed 0..m-1 in a fixed total order; subsets of them are
bitmasks.  Progressions are canonical pairs (q, a mod q) with q squarefree;
the empty intersection is the separate singleton EMPTY.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Callable, Iterable, Sequence

import numpy as np

from .arith import PrimeWindow
from .divgraph import chain_progressions
from .errors import CapacityError, ParameterError, ValidationError


def popcount(x: int) -> int:
    return bin(x).count("1")


def iter_submasks(mask: int):
    """All submasks of `mask`, including 0 and mask itself."""
    s = mask
    while True:
        yield s
        if s == 0:
            return
        s = (s - 1) & mask


# --- abstract sieve ----------------------------------------------------------

def gstar_transform(g: Callable[[int], int], S: int) -> int:
    """g*(S) = sum over T subset of S of g(T) (-1)^|T|, with sets as bitmasks."""
    if popcount(S) > 20:
        raise CapacityError("gstar limited to |S| <= 20")
    return sum(g(T) * (-1 if popcount(T) & 1 else 1) for T in iter_submasks(S))


def inclusion_exclusion_terms(g: Callable[[int], int], Qn: int) -> tuple[int, int, int]:
    """(1_empty(Qn), g*(Qn), correction) for the set Qn of true propositions.

    The correction sums (-1)^|S| (g(S - min S) - g(S)) over the non-empty S
    made of true propositions with no true proposition below min S.
    """
    lhs = 1 if Qn == 0 else 0
    gs = gstar_transform(g, Qn)
    corr = 0
    if Qn:
        low = Qn & -Qn  # the least true proposition must be min S
        rest = Qn ^ low
        for U in iter_submasks(rest):
            S = U | low
            sign = -1 if popcount(S) & 1 else 1
            corr += sign * (g(U) - g(S))
    return lhs, gs, corr


@dataclass
class InclusionExclusionReport:
    checked: int
    patterns: int
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def check_inclusion_exclusion(props: Sequence[Callable[[int], bool]], n_range: Iterable[int],
                          gs: Sequence[Callable[[int], int]]) -> InclusionExclusionReport:
    """Check 1_empty(Q(n)) = g*(Q(n)) + correction exactly for every n and g."""
    if len(props) > 12:
        raise CapacityError("at most 12 propositions")
    for g in gs:
        if g(0) != 1:
            raise ValidationError("g(empty) must be 1")
    cache: dict[int, list] = {}
    checked = 0
    violations = []
    for n in n_range:
        Qn = 0
        for j, Q in enumerate(props):
            if Q(n):
                Qn |= 1 << j
        if Qn not in cache:
            cache[Qn] = [inclusion_exclusion_terms(g, Qn) for g in gs]
        for gi, (lhs, gstar, corr) in enumerate(cache[Qn]):
            checked += 1
            if lhs != gstar + corr:
                violations.append((n, gi, lhs, gstar, corr))
    return InclusionExclusionReport(checked, len(cache), violations)


def crosscut_sum(collection: Sequence[Iterable], X: Iterable) -> int:
    """sum over subfamilies S of the collection with union X of (-1)^|S|.

    Computed by Moebius inversion over W subset of X: the subfamilies with
    union inside W contribute 1 when no member lies inside W, else 0.
    """
    X = sorted(set(X))
    if len(X) > 16:
        raise CapacityError("crosscut limited to |X| <= 16")
    pos = {x: i for i, x in enumerate(X)}
    members = []
    for c in collection:
        m = 0
        for x in c:
            if x not in pos:
                raise ParameterError(f"{x} not in X")
            m |= 1 << pos[x]
        members.append(m)
    full = (1 << len(X)) - 1
    total = 0
    for W in iter_submasks(full):
        if not any(m & ~W == 0 for m in members):
            total += -1 if (len(X) - popcount(W)) & 1 else 1
    bound = 1 << len(X)
    if abs(total) > bound:
        raise AssertionError(f"crosscut sum {total} exceeds 2^{len(X)}")
    return total


def crosscut_sum_direct(collection: Sequence[Iterable], X: Iterable) -> int:
    """Direct enumeration of subfamilies; exponential in the collection size."""
    X = frozenset(X)
    coll = [frozenset(c) for c in collection]
    total = 0
    for r in range(len(coll) + 1):
        for sub in combinations(coll, r):
            if frozenset().union(*sub) == X:
                total += (-1) ** r
    return total


def crosscut_all_collections(nx: int) -> np.ndarray:
    """Crosscut sums for every collection of subsets of an nx-element set.

    Collections are bitmasks over the 2^nx subsets; entry c of the result is
    the sum for collection c.
    """
    ns = 1 << nx
    if ns > 16:
        raise CapacityError("exhaustive census limited to |X| <= 4")
    colls = np.arange(1 << ns, dtype=np.int64)
    total = np.zeros(colls.size, dtype=np.int64)
    for W in range(ns):
        inside = 0
        for s in range(ns):
            if s & ~W == 0:
                inside |= 1 << s
        sign = -1 if (nx - popcount(W)) & 1 else 1
        total += sign * ((colls & inside) == 0)
    return total


# --- progressions -------------------------------------------------------------

def is_squarefree(q: int) -> bool:
    if q < 1:
        return False
    d = 2
    while d * d <= q:
        if q % (d * d) == 0:
            return False
        d += 1
    return True


def prime_factors(q: int) -> list[int]:
    out, d = [], 2
    while d * d <= q:
        if q % d == 0:
            out.append(d)
            while q % d == 0:
                q //= d
        d += 1
    if q > 1:
        out.append(q)
    return out


@dataclass(frozen=True, order=True)
class Progression:
    q: int
    a: int

    def __post_init__(self):
        if not is_squarefree(self.q):
            raise ValidationError(f"modulus {self.q} is not squarefree")
        if not 0 <= self.a < self.q:
            object.__setattr__(self, "a", self.a % self.q)

    is_empty = False

    def contains(self, n) -> bool:
        return n % self.q == self.a

    def indicator(self, first: int, length: int) -> np.ndarray:
        out = np.zeros(length, dtype=bool)
        out[(self.a - first) % self.q :: self.q] = True
        return out

    def shifted(self, b: int) -> "Progression":
        """{n - b : n in self}."""
        return Progression(self.q, (self.a - b) % self.q)

    def subset_of(self, other: "Progression | _Empty") -> bool:
        if other is EMPTY:
            return False
        return self.q % other.q == 0 and self.a % other.q == other.a

    @property
    def omega(self) -> int:
        return len(prime_factors(self.q))

    def __str__(self):
        return f"{self.a} mod {self.q}"


class _Empty:
    is_empty = True
    q = None

    def __repr__(self):
        return "EMPTY"

    def contains(self, n) -> bool:
        return False

    def indicator(self, first: int, length: int) -> np.ndarray:
        return np.zeros(length, dtype=bool)

    def subset_of(self, other) -> bool:
        return True

    def shifted(self, b: int):
        return self

    @property
    def omega(self) -> float:
        return math.inf


EMPTY = _Empty()
WHOLE = Progression(1, 0)


def intersect(P, R):
    if P is EMPTY or R is EMPTY:
        return EMPTY
    g = math.gcd(P.q, R.q)
    if (P.a - R.a) % g:
        return EMPTY
    # solve x = P.a mod P.q, x = R.a mod R.q
    m = P.q // g
    t = ((R.a - P.a) // g * pow(m, -1, R.q // g)) % (R.q // g) if R.q // g > 1 else 0
    lcm = P.q * (R.q // g)
    return Progression(lcm, (P.a + P.q * t) % lcm)


@dataclass
class ProgressionFamily:
    members: tuple

    def __post_init__(self):
        self.members = tuple(self.members)
        if len(set(self.members)) != len(self.members):
            raise ValidationError("family members must be distinct")
        if any(m is EMPTY for m in self.members):
            raise ValidationError("EMPTY cannot be a family member")
        self._closure = None

    def __len__(self):
        return len(self.members)

    def closure(self) -> list:
        """All intersections of subfamilies (the empty subfamily gives WHOLE), EMPTY included if reached."""
        if self._closure is None:
            cur = {WHOLE}
            has_empty = False
            for P in self.members:
                new = set()
                for R in cur:
                    X = intersect(R, P)
                    if X is EMPTY:
                        has_empty = True
                    else:
                        new.add(X)
                cur |= new
            self._closure = sorted(cur) + ([EMPTY] if has_empty else [])
        return self._closure


@dataclass
class DownSet:
    """A subset of the intersection closure, closed under taking supersets.

    WHOLE (the intersection of the empty subfamily) contains everything, so
    it is added whenever the set is non-empty.
    """

    family: ProgressionFamily
    members: frozenset

    def __post_init__(self):
        mem = set(self.members)
        if not mem:
            raise ValidationError("the set of kept intersections must be non-empty")
        if EMPTY in mem:
            raise ValidationError("EMPTY cannot be kept")
        mem.add(WHOLE)
        closure = [R for R in self.family.closure() if R is not EMPTY]
        cset = set(closure)
        for R in mem:
            if R not in cset:
                raise ValidationError(f"{R} is not an intersection of family members")
        for R in mem:
            for R2 in closure:
                if R.subset_of(R2) and R2 not in mem:
                    raise ValidationError(f"not closed under containment: {R} kept, {R2} not")
        self.members = frozenset(mem)

    @classmethod
    def upward_closure(cls, family: ProgressionFamily, seeds) -> "DownSet":
        closure = [R for R in family.closure() if R is not EMPTY]
        mem = {R2 for R in seeds for R2 in closure if R.subset_of(R2)}
        return cls(family, frozenset(mem))

    @classmethod
    def by_omega(cls, family: ProgressionFamily, m: int) -> "DownSet":
        """Keep the intersections whose modulus has at most m prime factors."""
        closure = [R for R in family.closure() if R is not EMPTY]
        return cls(family, frozenset(R for R in closure if R.omega <= m))


def build_FQD(family: ProgressionFamily, D: DownSet) -> dict:
    """Coefficients c_R with F(n) = sum_R c_R 1_{n in R}, R running over D.

    c_R sums (-1)^|S| over subfamilies S with intersection R.  Only members
    containing R can occur; each has modulus dividing q(R), and their
    intersection is R exactly when the moduli jointly use every prime of
    q(R), so c_R is a crosscut sum over the primes of q(R).
    """
    if len(family) > 16:
        raise CapacityError("at most 16 progressions")
    if D.family is not family:
        raise ValidationError("kept set belongs to a different family")
    coeffs = {}
    for R in sorted(D.members):
        X = prime_factors(R.q)
        coll = [prime_factors(P.q) for P in family.members if R.subset_of(P)]
        c = crosscut_sum(coll, X)
        if abs(c) > 2 ** len(X):
            raise AssertionError(f"|c_R| = {abs(c)} > 2^{len(X)} for {R}")
        coeffs[R] = c
    return coeffs


def FQD_direct(family: ProgressionFamily, D: DownSet, first: int, length: int) -> np.ndarray:
    """F(n) from its defining sum over all subfamilies with intersection in D."""
    m = len(family)
    if m > 16:
        raise CapacityError("at most 16 progressions")
    out = np.zeros(length, dtype=np.int64)
    for r in range(m + 1):
        for sub in combinations(family.members, r):
            R = WHOLE
            for P in sub:
                R = intersect(R, P)
            if R is not EMPTY and R in D.members:
                out += (-1) ** r * R.indicator(first, length)
    return out


def boundary(family: ProgressionFamily, D: DownSet) -> list:
    """Kept R for which some member P has P cap R not kept (EMPTY counts as not kept)."""
    return sorted(R for R in D.members
                  if any(intersect(P, R) not in D.members for P in family.members))


def outer_boundary(family: ProgressionFamily, D: DownSet) -> list:
    """Non-kept non-empty intersections of the form P cap R with R kept."""
    out = set()
    for R in D.members:
        for P in family.members:
            X = intersect(P, R)
            if X is not EMPTY and X not in D.members:
                out.add(X)
    return sorted(out)


@dataclass
class SieveReport:
    n_checked: int
    violations_inner: int
    violations_outer: int
    coeff_violations: int
    max_coeff_ratio: float
    exact_where_no_boundary: bool

    @property
    def ok(self) -> bool:
        return not (self.violations_inner or self.violations_outer or self.coeff_violations)


def sieve_pointwise_check(family: ProgressionFamily, D: DownSet, first: int,
                          length: int) -> SieveReport:
    """Compare 1_{n in no member} with F(n) against both error envelopes, for n in [first, first+length)."""
    coeffs = build_FQD(family, D)
    F = np.zeros(length, dtype=np.int64)
    for R, c in coeffs.items():
        if c:
            F += c * R.indicator(first, length)
    sifted = np.ones(length, dtype=bool)
    for P in family.members:
        sifted &= ~P.indicator(first, length)
    err = np.abs(sifted.astype(np.int64) - F)
    env_in = np.zeros(length, dtype=np.int64)
    for R in boundary(family, D):
        env_in += (2 ** R.omega) * R.indicator(first, length)
    env_out = np.zeros(length, dtype=np.int64)
    for R in outer_boundary(family, D):
        env_out += (3 ** R.omega) * R.indicator(first, length)
    bad_c = sum(1 for R, c in coeffs.items() if abs(c) > 2 ** R.omega)
    ratio = max((abs(c) / 2 ** R.omega for R, c in coeffs.items()), default=0.0)
    return SieveReport(length, int(np.count_nonzero(err > env_in)),
                       int(np.count_nonzero(err > env_out)), bad_c, ratio,
                       bool(np.all(err[env_in == 0] == 0)))


def random_family(rng: np.random.Generator, size: int, moduli: Sequence[int]) -> ProgressionFamily:
    """`size` distinct random progressions with moduli drawn from `moduli`."""
    seen = set()
    tries = 0
    while len(seen) < size:
        q = int(rng.choice(moduli))
        seen.add(Progression(q, int(rng.integers(q))))
        tries += 1
        if tries > 100 * size:
            raise ParameterError("could not draw enough distinct progressions")
    return ProgressionFamily(tuple(sorted(seen)))


def random_downset(rng: np.random.Generator, family: ProgressionFamily) -> DownSet:
    closure = [R for R in family.closure() if R is not EMPTY]
    k = int(rng.integers(1, len(closure) + 1))
    seeds = [closure[i] for i in rng.choice(len(closure), size=k, replace=False)]
    return DownSet.upward_closure(family, seeds)


def enumerate_W_family(ell: int, pw: PrimeWindow, beta: Sequence[int]) -> ProgressionFamily:
    """The progressions excluded from Y_ell, displaced by each -beta_i."""
    if ell > 3 or len(pw.primes) > 10:
        raise CapacityError("W family enumeration limited to ell <= 3 and |P| <= 10")
    base = chain_progressions(pw.primes, ell)
    out = set()
    for q, a in base:
        for b in beta:
            out.add(Progression(q, a).shifted(b))
    return ProgressionFamily(tuple(sorted(out)))


# --- Kubilius model -------------------------------------------------------------

@dataclass(frozen=True)
class KubiliusSpec:
    """Divisibility pattern delta_i(p) for the shifts n + alpha_i, n = a mod q.

    pattern maps each prime of the window to a tuple of ell bits.
    """

    a: int
    q: int
    shifts: tuple
    pattern: tuple  # sorted tuple of (p, bits)
    exclusions: tuple = ()  # per shift, a frozenset of primes forced to not divide

    def __post_init__(self):
        if not is_squarefree(self.q):
            raise ValidationError("q must be squarefree")
        for p, bits in self.pattern:
            if len(bits) != len(self.shifts):
                raise ValidationError("pattern width differs from the number of shifts")
        for i, ex in enumerate(self.exclusions):
            if any(self.q % p == 0 for p in ex):
                raise ValidationError("excluded primes must not divide q")

    @property
    def ell(self) -> int:
        return len(self.shifts)

    def bits(self, p: int) -> tuple:
        return dict(self.pattern)[p]


def consistent_at(p: int, bits: Sequence[int], spec_a: int, q: int, shifts: Sequence[int],
                  exclusions: Sequence = ()) -> bool:
    ell = len(shifts)
    for i in range(ell):
        if i < len(exclusions) and p in exclusions[i] and bits[i]:
            return False
        if q % p == 0 and bits[i] != int((spec_a + shifts[i]) % p == 0):
            return False
        for j in range(ell):
            same = (shifts[i] - shifts[j]) % p == 0
            if same and bits[i] != bits[j]:
                return False
            if not same and bits[i] and bits[j]:
                return False
    return True


def is_consistent(spec: KubiliusSpec) -> bool:
    return all(consistent_at(p, bits, spec.a, spec.q, spec.shifts, spec.exclusions)
               for p, bits in spec.pattern)


def kubilius_model_prob(spec: KubiliusSpec, pw: PrimeWindow) -> Fraction:
    """P(Z_p^(i) = delta_i(p) for all p, i) in the independent per-prime model.

    Per prime: p | q gives 1 (the pattern is forced); some delta_i(p) = 1 gives
    1/p; all zero gives 1 - rho(p)/p with rho(p) the number of residues
    -alpha_i mod p.  Inconsistent patterns have probability 0.
    """
    pat = dict(spec.pattern)
    prob = Fraction(1)
    for p in pw.primes:
        bits = pat.get(p)
        if bits is None:
            raise ValidationError(f"pattern missing prime {p}")
        if not consistent_at(p, bits, spec.a, spec.q, spec.shifts, spec.exclusions):
            return Fraction(0)
        if spec.q % p == 0:
            continue
        if any(bits):
            prob *= Fraction(1, p)
        else:
            rho = len({(-s) % p for s in spec.shifts})
            prob *= Fraction(p - rho, p)
    return prob


def all_patterns_at(p: int, spec_a: int, q: int, shifts: Sequence[int], exclusions=()):
    ell = len(shifts)
    for bits in range(1 << ell):
        b = tuple((bits >> i) & 1 for i in range(ell))
        if consistent_at(p, b, spec_a, q, shifts, exclusions):
            yield b


def iter_patterns(pw: PrimeWindow, a: int, q: int, shifts, min_prob: Fraction = Fraction(0),
                  exclusions=()):
    """Consistent patterns with model probability >= min_prob, with their probabilities."""
    primes = list(pw.primes)
    per = [list(all_patterns_at(p, a, q, shifts, exclusions)) for p in primes]

    def factor(p, bits):
        if q % p == 0:
            return Fraction(1)
        if any(bits):
            return Fraction(1, p)
        return Fraction(p - len({(-s) % p for s in shifts}), p)

    def rec(i, acc, prob):
        if prob < min_prob or prob == 0:
            return
        if i == len(primes):
            yield tuple(acc), prob
            return
        for b in per[i]:
            acc.append((primes[i], b))
            yield from rec(i + 1, acc, prob * factor(primes[i], b))
            acc.pop()

    yield from rec(0, [], Fraction(1))


def encode_pattern(pattern, pw: PrimeWindow, ell: int) -> int:
    pat = dict(pattern)
    code, bit = 0, 0
    for p in pw.primes:
        for i in range(ell):
            if pat[p][i]:
                code += 1 << bit
            bit += 1
    return code


@dataclass
class KubiliusComparison:
    exact_density: Fraction
    model_value: Fraction
    count: int

    @property
    def relative_error(self) -> float:
        if self.model_value == 0:
            return 0.0 if self.exact_density == 0 else math.inf
        return float(abs(self.exact_density - self.model_value) / self.model_value)


def kubilius_compare(spec: KubiliusSpec, pw: PrimeWindow, N: int,
                     codes: dict | None = None) -> KubiliusComparison:
    """Exact density over (N, 2N] of the pattern versus (1/q) times the model probability.

    `codes` may hold precomputed pattern counts (see pattern_histogram).
    """
    model = kubilius_model_prob(spec, pw) / spec.q
    if codes is None:
        codes = pattern_histogram(pw, N, spec.a, spec.q, spec.shifts)
    count = codes.get(encode_pattern(spec.pattern, pw, spec.ell), 0) if is_consistent(spec) else 0
    return KubiliusComparison(Fraction(count, N), model, count)


def pattern_histogram(pw: PrimeWindow, N: int, a: int, q: int, shifts) -> dict:
    """Counts of each divisibility pattern over n in (N, 2N] with n = a mod q."""
    first = N + 1 + ((a - (N + 1)) % q)
    n = np.arange(first, 2 * N + 1, q, dtype=np.int64)
    nbits = len(pw.primes) * len(shifts)
    if nbits <= 62:
        code = np.zeros(n.size, dtype=np.int64)
        bit = 0
        for p in pw.primes:
            for s in shifts:
                code |= ((n + s) % p == 0).astype(np.int64) << bit
                bit += 1
        vals, counts = np.unique(code, return_counts=True)
        return {int(v): int(c) for v, c in zip(vals, counts)}
    hist: dict = {}
    words = []
    bit = 0
    cur = np.zeros(n.size, dtype=np.int64)
    for p in pw.primes:
        for s in shifts:
            cur |= ((n + s) % p == 0).astype(np.int64) << (bit % 62)
            bit += 1
            if bit % 62 == 0:
                words.append(cur)
                cur = np.zeros(n.size, dtype=np.int64)
    if bit % 62:
        words.append(cur)
    stacked = np.stack(words, axis=1)
    rows, counts = np.unique(stacked, axis=0, return_counts=True)
    for row, c in zip(rows, counts):
        hist[sum(int(w) << (62 * j) for j, w in enumerate(row))] = int(c)
    return hist


def kubilius_total_probability(pw: PrimeWindow, a: int, q: int, shifts, exclusions=()) -> Fraction:
    """Exact total model mass of all consistent patterns (1 without exclusions).

    The model is a product over primes, so the total factors as a product of
    per-prime sums and no pattern list is needed.
    """
    total = Fraction(1)
    for p in pw.primes:
        s = Fraction(0)
        for bits in all_patterns_at(p, a, q, shifts, exclusions):
            if q % p == 0:
                s += 1
            elif any(bits):
                s += Fraction(1, p)
            else:
                s += Fraction(p - len({(-t) % p for t in shifts}), p)
        total *= s
    return total


check_whithe_identity = check_inclusion_exclusion
