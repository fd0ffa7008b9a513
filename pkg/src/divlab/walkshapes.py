"""Walk shapes, free reduction, induced graphs, index sets, sieve graphs and walk sums.

Positions in a walk are 1-based throughout (i = 1..2k), matching
beta_i = s_1 p_1 + ... + s_i p_i with beta_0 = 0.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Hashable, Mapping, Sequence

import numpy as np

from .arith import FactorTable, PrimeWindow
from .divgraph import SupportMask, compute_X0_mask, compute_Yl_mask, crt_pairs
from .errors import CapacityError, ParameterError, ValidationError, VerificationError
from .spectral import partial_sums, zero_sum_walks

EXACT_BUDGET = 10**8


# --- shapes -----------------------------------------------------------------

def _labels_from_blocks(blocks, length: int) -> tuple[int, ...]:
    lab = [-1] * length
    for c, b in enumerate(blocks):
        for i in b:
            if not 1 <= i <= length or lab[i - 1] != -1:
                raise ValidationError("blocks must partition 1..len")
            lab[i - 1] = c
    if -1 in lab:
        raise ValidationError("blocks must cover 1..len")
    return tuple(lab)


def _canonical_blocks(labels: Sequence[Hashable]) -> tuple[tuple[int, ...], ...]:
    order: dict = {}
    for i, x in enumerate(labels, 1):
        order.setdefault(x, []).append(i)
    return tuple(tuple(b) for b in order.values())


@dataclass(frozen=True)
class Shape:
    """An equivalence relation on positions 1..len together with signs.

    Blocks are stored sorted and ordered by their smallest element.
    """

    blocks: tuple[tuple[int, ...], ...]
    signs: tuple[int, ...]

    def __post_init__(self):
        if len(self.signs) % 2:
            raise ValidationError("shape length must be even")
        if any(s not in (1, -1) for s in self.signs):
            raise ValidationError("signs must be +1 or -1")
        blocks = tuple(sorted((tuple(sorted(b)) for b in self.blocks), key=lambda b: b[0]))
        if any(not b for b in blocks):
            raise ValidationError("empty block")
        _labels_from_blocks(blocks, len(self.signs))
        object.__setattr__(self, "blocks", blocks)

    @classmethod
    def from_labels(cls, labels: Sequence[Hashable], signs: Sequence[int]) -> "Shape":
        if len(labels) != len(signs):
            raise ParameterError("labels and signs differ in length")
        return cls(_canonical_blocks(labels), tuple(int(s) for s in signs))

    @property
    def length(self) -> int:
        return len(self.signs)

    @property
    def k(self) -> int:
        return self.length // 2

    @property
    def labels(self) -> tuple[int, ...]:
        """Class number of each position; classes numbered by first appearance."""
        return _labels_from_blocks(self.blocks, self.length)

    def block_of(self, i: int) -> tuple[int, ...]:
        return self.blocks[self.labels[i - 1]]

    def word(self) -> list[tuple[int, int]]:
        return list(zip(self.labels, self.signs))

    def to_line(self) -> str:
        part = "|".join(",".join(map(str, b)) for b in self.blocks)
        return f"{part} {''.join('+' if s > 0 else '-' for s in self.signs)}"

    @classmethod
    def from_line(cls, line: str) -> "Shape":
        try:
            part, sg = line.split()
            blocks = tuple(tuple(int(x) for x in b.split(",")) for b in part.split("|"))
        except ValueError as exc:
            raise ParameterError(f"malformed shape line {line!r}") from exc
        if set(sg) - {"+", "-"}:
            raise ParameterError(f"malformed sign string {sg!r}")
        return cls(blocks, tuple(1 if c == "+" else -1 for c in sg))


def shape_of(p_vec: Sequence[int], sigma_vec: Sequence[int]) -> Shape:
    """i ~ j iff p_i = p_j."""
    return Shape.from_labels([int(p) for p in p_vec], sigma_vec)


@dataclass(frozen=True)
class ReducedShape:
    original: Shape
    shape: Shape  # shape of the reduced word w'
    yellow: tuple[tuple[int, ...], ...]  # original blocks whose letters all cancel
    iota: tuple[int, ...]  # reduced position -> original position (both 1-based)

    @property
    def length(self) -> int:
        return self.shape.length


def _free_reduce(word):
    """Stack reduction of a word given as (letter, sign, tag) triples."""
    stack = []
    for x, s, t in word:
        if stack and stack[-1][0] == x and stack[-1][1] == -s:
            stack.pop()
        else:
            stack.append((x, s, t))
    return stack


def reduce_shape(shape: Shape) -> ReducedShape:
    lab = shape.labels
    stack = _free_reduce([(lab[i], shape.signs[i], i + 1) for i in range(shape.length)])
    alive = {x for x, _, _ in stack}
    yellow = tuple(b for c, b in enumerate(shape.blocks) if c not in alive)
    red = Shape.from_labels([x for x, _, _ in stack], [s for _, s, _ in stack])
    return ReducedShape(shape, red, yellow, tuple(t for _, _, t in stack))


# --- induced graphs ---------------------------------------------------------

def consecutive_graph(positions: Sequence[int], labels: Mapping[int, int]) -> set[tuple[int, int]]:
    """Edges {[i], [i']} for consecutive entries i, i' of `positions` in distinct classes."""
    edges = set()
    for a, b in zip(positions, positions[1:]):
        u, v = labels[a], labels[b]
        if u != v:
            edges.add((min(u, v), max(u, v)))
    return edges


@dataclass(frozen=True)
class WalkGraph:
    vertices: tuple[tuple[int, ...], ...]  # non-yellow original blocks
    edges: frozenset  # pairs (u, v), u < v, vertex indices
    arrows: frozenset  # pairs (u, v), u != v

    @property
    def n(self) -> int:
        return len(self.vertices)

    def degree(self, v: int) -> int:
        return sum(v in e for e in self.edges)

    def in_degree(self, v: int) -> int:
        return sum(b == v for _, b in self.arrows)

    def adjacency(self) -> list[set[int]]:
        adj = [set() for _ in range(self.n)]
        for u, v in self.edges:
            adj[u].add(v)
            adj[v].add(u)
        return adj

    def is_connected(self) -> bool:
        if self.n == 0:
            return True
        adj, seen, todo = self.adjacency(), {0}, [0]
        while todo:
            for w in adj[todo.pop()]:
                if w not in seen:
                    seen.add(w)
                    todo.append(w)
        return len(seen) == self.n


def induced_walk_graph(shape: Shape, reduced: ReducedShape | None = None) -> WalkGraph:
    """Vertices are the non-yellow classes; two of them are joined when they occur
    at positions with only yellow positions strictly between.  Arrows follow the
    reduced word cyclically, with self-loops dropped."""
    red = reduced or reduce_shape(shape)
    yellow = set(red.yellow)
    vertices = tuple(b for b in shape.blocks if b not in yellow)
    vid = {b: j for j, b in enumerate(vertices)}
    labels = {i: vid[b] for b in vertices for i in b}
    edges = consecutive_graph(sorted(labels), labels)
    orig = [labels[t] for t in red.iota]
    arrows = {(orig[i], orig[(i + 1) % len(orig)]) for i in range(len(orig))}
    arrows = frozenset((a, b) for a, b in arrows if a != b)
    g = WalkGraph(vertices, frozenset(edges), arrows)
    if not g.is_connected():
        raise VerificationError("induced walk graph is disconnected", instance=shape.to_line())
    if g.n >= 2 and any(g.in_degree(v) == 0 for v in range(g.n)):
        raise VerificationError("a vertex receives no arrow", instance=shape.to_line())
    return g


# --- index sets -------------------------------------------------------------

@dataclass
class IndexSets:
    beta: tuple[int, ...]
    L: frozenset
    S: frozenset
    S0: frozenset
    S1: frozenset
    s1_witness: dict  # i -> smallest qualifying jmath
    recurrence_pairs: list  # (i, i', intervening indices)


def lone_indices(p_vec: Sequence[int]) -> frozenset:
    cnt: dict = {}
    for p in p_vec:
        cnt[p] = cnt.get(p, 0) + 1
    return frozenset(i for i, p in enumerate(p_vec, 1) if cnt[p] == 1)


def special_set(p_vec: Sequence[int], beta: Sequence[int], L=None) -> frozenset:
    """Indices i in L having some j != i-1, i with p_i | beta_i - beta_j and
    beta_j not in {beta_{i-1}, beta_i}, or beta_i = beta_j with j in L."""
    L = lone_indices(p_vec) if L is None else L
    m = len(p_vec)
    out = set()
    for i in L:
        p = p_vec[i - 1]
        for j in range(1, m + 1):
            if j in (i - 1, i):
                continue
            d = beta[i] - beta[j]
            if (d % p == 0 and beta[j] not in (beta[i - 1], beta[i])) or (d == 0 and j in L):
                out.add(i)
                break
    return frozenset(out)


def _lone_between(L, i: int, j: int) -> bool:
    """Is there an element of L with i < x <= j or j < x < i?"""
    return any(i < x <= j or j < x < i for x in L)


def classify_indices(p_vec: Sequence[int], sigma_vec: Sequence[int],
                     pw: PrimeWindow | None = None, l_set=None) -> IndexSets:
    """The lone-prime set L, the special sets S, S0, S1 and the recurrence pairs.

    Every set is computed by scanning all j in 1..2k.  Recurrence pairs are
    the i < i' with p_i = p_i'; with `l_set` given, only pairs having some
    j not in l_set with i <= j <= i' are kept.
    """
    m = len(p_vec)
    if m != len(sigma_vec) or m % 2:
        raise ParameterError("p_vec and sigma_vec must have the same even length")
    if m > 12:
        raise CapacityError("index scans limited to 2k <= 12")
    if pw is not None and any(p not in pw.primes for p in p_vec):
        raise ParameterError("p_vec uses primes outside the window")
    p_vec = tuple(int(p) for p in p_vec)
    beta = tuple(partial_sums(p_vec, sigma_vec))
    L = lone_indices(p_vec)
    S = special_set(p_vec, beta, L)

    S0 = set()
    for i in L:
        if any((beta[i] - beta[j]) % p_vec[i - 1] == 0 and _lone_between(L, i, j)
               for j in range(1, m + 1)):
            S0.add(i)

    # signed counts of each prime up to position j
    running = [dict()]
    for p, s in zip(p_vec, sigma_vec):
        d = dict(running[-1])
        d[p] = d.get(p, 0) + s
        running.append(d)
    primes = set(p_vec)
    witness = {}
    for i in sorted(L):
        pi = p_vec[i - 1]
        for j in range(1, m + 1):
            if j in (i - 1, i) or (beta[i] - beta[j]) % pi:
                continue
            if _lone_between(L, i, j):
                continue
            if any(running[j].get(p, 0) != running[i].get(p, 0) for p in primes if p != pi):
                witness[i] = j
                break

    pairs = []
    for i in range(1, m + 1):
        for i2 in range(i + 1, m + 1):
            if p_vec[i - 1] != p_vec[i2 - 1]:
                continue
            if l_set is not None and all(j in l_set for j in range(i, i2 + 1)):
                continue
            pairs.append((i, i2, tuple(range(i + 1, i2))))
    return IndexSets(beta, L, S, frozenset(S0), frozenset(witness), witness, pairs)


# --- Dyck codes -------------------------------------------------------------

def dyck_code(shape: Shape, yellow=None) -> str:
    """Balanced parentheses recording how the yellow letters cancel.

    A letter opens a parenthesis unless it cancels the letter on top of the
    stack, in which case it closes it.
    """
    if yellow is None:
        yellow = reduce_shape(shape).yellow
    ypos = sorted(i for b in yellow for i in b)
    lab = shape.labels
    stack, out = [], []
    for i in ypos:
        x, s = lab[i - 1], shape.signs[i - 1]
        if stack and stack[-1] == (x, -s):
            stack.pop()
            out.append(")")
        else:
            stack.append((x, s))
            out.append("(")
    if stack:
        raise ValidationError("yellow restriction does not reduce to the empty word")
    return "".join(out)


def catalan(m: int) -> int:
    return math.comb(2 * m, m) // (m + 1)


# --- sieve graphs -----------------------------------------------------------

@dataclass(frozen=True)
class ThreadSpec:
    kind: str  # "open" or "closed"
    anchor: int  # vertex 0..2k of the horizontal path
    length: int


def sieve_graph_edges(k: int, threads: Sequence[ThreadSpec]):
    """Canonical edge list.

    Edges 0..2k-1 form the horizontal path (edge e joins vertex e to e+1 and
    corresponds to index e+1 of {1..2k}).  Each thread follows, edges in
    order from its anchor; an open thread then adds its witness at the anchor
    and its witness at the far end.  Returns (edges, thread_of, is_witness,
    vertex count), thread_of being -1 on the horizontal path.
    """
    edges = [(v, v + 1) for v in range(2 * k)]
    thread_of = [-1] * (2 * k)
    witness = [False] * (2 * k)
    nv = 2 * k + 1
    for t, th in enumerate(threads):
        if th.kind not in ("open", "closed"):
            raise ValidationError(f"unknown thread kind {th.kind!r}")
        if not 0 <= th.anchor <= 2 * k:
            raise ValidationError("thread anchor is not on the horizontal path")
        if th.length < (2 if th.kind == "closed" else 1):
            raise ValidationError("thread too short")
        prev = th.anchor
        for j in range(th.length):
            if th.kind == "closed" and j == th.length - 1:
                nxt = th.anchor
            else:
                nxt = nv
                nv += 1
            edges.append((prev, nxt))
            thread_of.append(t)
            witness.append(False)
            prev = nxt
        if th.kind == "open":
            for tail in (th.anchor, prev):
                edges.append((tail, nv))
                nv += 1
                thread_of.append(t)
                witness.append(True)
    return edges, thread_of, witness, nv


def _runs_connected(pos: list[int], size: int, cyclic: bool) -> bool:
    """Do the positions form one interval of 0..size-1 (cyclically if asked)?"""
    if not pos or len(pos) == size:
        return True
    s = set(pos)
    if cyclic:
        starts = [i for i in pos if (i - 1) % size not in s]
    else:
        starts = [i for i in pos if i - 1 not in s]
    return len(starts) == 1


@dataclass
class SieveGraph:
    k: int
    threads: tuple[ThreadSpec, ...]
    edges: tuple[tuple[int, int], ...]
    thread_of: tuple[int, ...]
    is_witness: tuple[bool, ...]
    n_vertices: int
    labels: tuple  # equivalence label per edge
    ell: int | None = None

    def thread_path(self, t: int) -> list[int]:
        return [e for e, th in enumerate(self.thread_of) if th == t and not self.is_witness[e]]

    def thread_witnesses(self, t: int) -> list[int]:
        return [e for e, th in enumerate(self.thread_of) if th == t and self.is_witness[e]]

    def classes(self) -> dict:
        out: dict = {}
        for e, x in enumerate(self.labels):
            out.setdefault(x, []).append(e)
        return out

    @property
    def cost(self) -> int:
        return len({self.labels[e] for e, t in enumerate(self.thread_of) if t >= 0})

    def is_non_redundant(self) -> bool:
        threads_of_class: dict = {}
        for e, t in enumerate(self.thread_of):
            if t >= 0:
                threads_of_class.setdefault(self.labels[e], set()).add(t)
        for t in range(len(self.threads)):
            mine = [e for e, th in enumerate(self.thread_of) if th == t]
            if not any(threads_of_class[self.labels[e]] == {t} for e in mine):
                return False
        return True


def build_sieve_graph(k: int, threads: Sequence[ThreadSpec], equivalence: Sequence[Hashable],
                      ell: int | None = None) -> SieveGraph:
    """Assemble a sieve graph and check the thread rules for the edge equivalence.

    `equivalence` gives one label per edge in the order of sieve_graph_edges.
    """
    if k < 0:
        raise ParameterError("k must be non-negative")
    threads = tuple(threads)
    if ell is not None and any(th.length > ell for th in threads):
        raise ValidationError("thread longer than ell")
    edges, thread_of, witness, nv = sieve_graph_edges(k, threads)
    labels = tuple(equivalence)
    if len(labels) != len(edges):
        raise ValidationError(f"expected {len(edges)} edge labels, got {len(labels)}")
    for t, th in enumerate(threads):
        path = [e for e, x in enumerate(thread_of) if x == t and not witness[e]]
        wit = [e for e, x in enumerate(thread_of) if x == t and witness[e]]
        for x in {labels[e] for e in path}:
            pos = [j for j, e in enumerate(path) if labels[e] == x]
            if not _runs_connected(pos, len(path), th.kind == "closed"):
                raise ValidationError(f"class {x!r} is not connected inside thread {t}")
        if wit:
            if labels[wit[0]] != labels[wit[1]]:
                raise ValidationError(f"witnesses of thread {t} are not equivalent")
            if any(labels[e] == labels[wit[0]] for e in path):
                raise ValidationError(f"witness class of thread {t} meets the thread path")
    return SieveGraph(k, threads, tuple(edges), tuple(thread_of), tuple(witness), nv, labels, ell)


@dataclass
class ValidityReport:
    divisibility: bool  # condition (i)
    closed_zero: bool  # condition (ii), closed paths
    open_nonzero: bool  # condition (ii), open threads
    signs: bool  # condition (iii)

    @property
    def valid(self) -> bool:
        return self.divisibility and self.closed_zero and self.open_nonzero and self.signs

    def __bool__(self) -> bool:
        return self.valid


def _potentials(G: SieveGraph, weight: list[int]):
    """Potentials along a BFS tree and the gcd of all cycle sums.

    Any walk from u to v has signed sum pot[v] - pot[u] plus a Z-combination
    of the fundamental cycle sums.
    """
    adj = [[] for _ in range(G.n_vertices)]
    for e, (a, b) in enumerate(G.edges):
        adj[a].append((e, b, 1))
        adj[b].append((e, a, -1))
    pot = [None] * G.n_vertices
    g = 0
    used = set()
    for root in range(G.n_vertices):
        if pot[root] is not None:
            continue
        pot[root] = 0
        todo = deque([root])
        while todo:
            u = todo.popleft()
            for e, v, d in adj[u]:
                if e in used:
                    continue
                used.add(e)
                val = pot[u] + d * weight[e]
                if pot[v] is None:
                    pot[v] = val
                    todo.append(v)
                else:
                    g = math.gcd(g, val - pot[v])
    return pot, g


def validate_tuple(G: SieveGraph, l_set, sigma: Sequence[int],
                   prime_assignment: Mapping[Hashable, int]) -> ValidityReport:
    """Check conditions (i)-(iii) for (G, l, sigma, primes).

    l_set holds indices 1..2k of the horizontal path; sigma has one sign per
    edge; prime_assignment maps each equivalence label to its prime.
    """
    if len(sigma) != len(G.edges) or any(s not in (1, -1) for s in sigma):
        raise ParameterError("sigma needs one sign +-1 per edge")
    try:
        weight = [sigma[e] * int(prime_assignment[G.labels[e]]) for e in range(len(G.edges))]
    except KeyError as exc:
        raise ParameterError(f"no prime for class {exc.args[0]!r}") from exc
    pot, g = _potentials(G, weight)

    closed_zero = g == 0
    open_nonzero = True
    signs_ok = True
    for t, th in enumerate(G.threads):
        path = G.thread_path(t)
        if th.kind == "open":
            a, b = G.edges[path[0]][0], G.edges[path[-1]][1]
            if pot[b] - pot[a] == 0:
                open_nonzero = False
        pairs = list(zip(path, path[1:]))
        if th.kind == "closed" and len(path) > 1:
            pairs.append((path[-1], path[0]))
        for e1, e2 in pairs:
            if G.labels[e1] == G.labels[e2] and sigma[e1] != sigma[e2]:
                signs_ok = False

    lset = set(l_set)
    divis = True
    for x, members in G.classes().items():
        p = int(prime_assignment[x])
        live = [e for e in members if G.thread_of[e] >= 0 or (e + 1) in lset]
        if len(live) < 2:
            continue
        if g % p:
            divis = False
            break
        base = pot[G.edges[live[0]][0]]
        if any((pot[G.edges[e][0]] - base) % p for e in live):
            divis = False
            break
    return ValidityReport(divis, closed_zero, open_nonzero, signs_ok)


def random_sieve_graph(rng: np.random.Generator, k: int, ell: int, max_threads: int = 2,
                       n_labels: int = 4) -> SieveGraph:
    """A random sieve graph whose equivalence obeys the thread rules."""
    nt = int(rng.integers(0, max_threads + 1))
    threads = []
    for _ in range(nt):
        kind = "closed" if rng.random() < 0.5 and ell >= 2 else "open"
        lo = 2 if kind == "closed" else 1
        threads.append(ThreadSpec(kind, int(rng.integers(0, 2 * k + 1)), int(rng.integers(lo, ell + 1))))
    edges, thread_of, witness, _ = sieve_graph_edges(k, threads)
    labels: list = [None] * len(edges)
    for e in range(2 * k):
        labels[e] = int(rng.integers(0, n_labels))
    fresh = n_labels
    for t, th in enumerate(threads):
        path = [e for e, x in enumerate(thread_of) if x == t and not witness[e]]
        wit = [e for e, x in enumerate(thread_of) if x == t and witness[e]]
        used = set()
        j = 0
        while j < len(path):
            run = int(rng.integers(1, len(path) - j + 1))
            while True:
                lab = int(rng.integers(0, n_labels)) if rng.random() < 0.4 else fresh
                if lab not in used:
                    break
            if lab == fresh:
                fresh += 1
            used.add(lab)
            for e in path[j:j + run]:
                labels[e] = lab
            j += run
        if wit:
            while True:
                lab = int(rng.integers(0, n_labels)) if rng.random() < 0.4 else fresh
                if lab not in used:
                    break
            if lab == fresh:
                fresh += 1
            for e in wit:
                labels[e] = lab
    return build_sieve_graph(k, threads, labels, ell)


# --- shape census -----------------------------------------------------------

def set_partitions(items: Sequence[int]):
    """All partitions of `items` as label tuples (restricted growth strings)."""
    n = len(items)
    if n == 0:
        yield ()
        return
    lab = [0] * n

    def rec(i, m):
        if i == n:
            yield tuple(lab)
            return
        for c in range(m + 1):
            lab[i] = c
            yield from rec(i + 1, max(m, c + 1))

    yield from rec(1, 1)


@dataclass
class CensusResult:
    count: int
    bound: int
    partitions: int


def in_census_family(n_list: Sequence[int], labels: Sequence[int], kappa: int, rho: int) -> bool:
    lab = dict(zip(n_list, labels))
    edges = consecutive_graph(list(n_list), lab)
    deg: dict = {}
    for u, v in edges:
        deg[u] = deg.get(u, 0) + 1
        deg[v] = deg.get(v, 0) + 1
    big = {c for c, d in deg.items() if d > 2}
    if len(big) > rho:
        return False
    for c in big:
        exits = sum(1 for a, b in zip(n_list, n_list[1:]) if lab[a] == c and lab[b] != c)
        if exits > kappa:
            return False
    return True


def shape_family_census(k: int, n_set, kappa: int, rho: int) -> CensusResult:
    """Count the equivalence relations on n_set whose graph has at most rho
    vertices of degree > 2, each such class being left at most kappa times."""
    if 2 * k > 6:
        raise CapacityError("census limited to 2k <= 6")
    n_list = sorted(n_set)
    if any(not 1 <= i <= 2 * k for i in n_list):
        raise ParameterError("n_set must lie in 1..2k")
    if kappa < 1 or rho < 0:
        raise ParameterError("need kappa >= 1 and rho >= 0")
    count = total = 0
    for lab in set_partitions(n_list):
        total += 1
        count += in_census_family(n_list, lab, kappa, rho)
    bound = 5 ** len(n_list) * (2 * k) ** ((kappa - 1) * rho + 2)
    if count > bound:
        raise VerificationError("census exceeds the coding bound", instance=(k, n_list, kappa, rho))
    return CensusResult(count, bound, total)


# --- the walk sums S1, S2 ----------------------------------------------------

@dataclass
class WalkSumResult:
    S1: float
    S2: float
    mode: str
    stderr1: float = 0.0
    stderr2: float = 0.0
    samples: int = 0
    members: int = 0  # pairs (p, sigma) admitting a witnessing n
    witnesses: dict = field(default_factory=dict)  # (p, sigma) -> first witnessing n

    def rows(self):
        return [("S1", self.S1, self.stderr1), ("S2", self.S2, self.stderr2)]


class _WalkSumContext:
    def __init__(self, table: FactorTable, support: SupportMask, mertens: float, k: int):
        self.table = table
        self.bits = support.bits
        self.first = table.first
        self.size = table.window_len
        self.Lsc = mertens
        self.k = k
        self.cutoff = 2 * k / math.log(mertens) if mertens != 1 else math.inf
        self.subsets = range(1 << (2 * k))

    def l_weights(self, p_vec):
        """w(l) = prod_{i not in l} 1/p_i * prod_{classes meeting l} 1/p."""
        m = len(p_vec)
        blocks = _canonical_blocks(p_vec)
        bmask = [sum(1 << (i - 1) for i in b) for b in blocks]
        out = []
        for l in self.subsets:
            w = 1.0
            for i in range(m):
                if not (l >> i) & 1:
                    w /= p_vec[i]
            for b, bm in zip(blocks, bmask):
                if l & bm:
                    w /= p_vec[b[0] - 1]
            out.append(w)
        return out

    def s1_term(self, p_vec, s_vec):
        """Contribution of one zero-sum (p, sigma) to S1 and its first witness."""
        beta = partial_sums(p_vec, s_vec)
        lo, hi = -min(beta), self.size - max(beta)
        if hi <= lo:
            return 0.0, None
        idx = np.arange(lo, hi)
        ok = np.ones(idx.size, dtype=bool)
        for b in beta:
            ok &= self.bits[idx + b]
        if not ok.any():
            return 0.0, None
        idx = idx[ok]
        L = lone_indices(p_vec)
        ns_mask = 0
        D = np.zeros(idx.size, dtype=np.int64)
        for i in range(1, len(p_vec) + 1):
            if i in L:
                continue
            ns_mask |= 1 << (i - 1)
            hit = (self.first + idx + beta[i]) % p_vec[i - 1] == 0
            D |= hit.astype(np.int64) << (i - 1)
        Ds = [int(d) for d in np.unique(D)]
        w = self.l_weights(p_vec)
        total = 0.0
        for l in self.subsets:
            need = l & ns_mask
            if any(need & d == need for d in Ds):
                total += w[l]
        return total * self.Lsc ** (-len(L) / 2), int(self.first + idx[0])

    def s2_term(self, p_vec, s_vec):
        beta = partial_sums(p_vec, s_vec)
        if len(special_set(p_vec, beta)) <= self.cutoff:
            return 0.0
        w = self.l_weights(p_vec)
        start, last = self.table.window_start, self.table.last
        total = 0.0
        for l in self.subsets:
            conds = [(p_vec[i], -beta[i + 1]) for i in range(len(p_vec)) if (l >> i) & 1]
            r = crt_pairs(conds)
            if r is None:
                continue
            q, a = r
            cnt = (last - a) // q - (start - a) // q
            total += cnt * w[l]
        return total / self.size


def evaluate_walk_sums(pw: PrimeWindow, table: FactorTable, K, ell: int, k: int,
                       mode: str = "exact", seed: int = 1, samples: int = 200,
                       support: SupportMask | None = None) -> WalkSumResult:
    """The sums S1 (lone-prime walks inside X0 and Y_ell) and S2 (walks with many
    special indices), exactly or by Monte Carlo.

    The Monte Carlo estimator draws the first 2k-2 steps uniformly and sums
    the last two steps exhaustively, so it is unbiased for both sums.
    """
    if k < 1:
        raise ParameterError("k must be >= 1")
    P = tuple(pw.primes)
    if not P:
        raise ParameterError("empty prime window")
    if support is None:
        support = compute_X0_mask(table, K) & compute_Yl_mask(table, pw, ell)
    ctx = _WalkSumContext(table, support, float(pw.mertens), k)
    m = 2 * k
    steps = [(p, s) for p in P for s in (1, -1)]

    if mode == "exact":
        if len(P) ** m * 4 ** m > EXACT_BUDGET:
            raise CapacityError("exact walk sums exceed the enumeration budget")
        S1 = 0.0
        wit = {}
        for p_vec, s_vec in zero_sum_walks(P, m):
            v, n0 = ctx.s1_term(p_vec, s_vec)
            if n0 is not None:
                S1 += v
                wit[(p_vec, s_vec)] = n0
        S2 = 0.0
        for combo in np.ndindex(*([len(steps)] * m)):
            p_vec = tuple(steps[c][0] for c in combo)
            s_vec = tuple(steps[c][1] for c in combo)
            S2 += ctx.s2_term(p_vec, s_vec)
        return WalkSumResult(S1, S2, "exact", members=len(wit), witnesses=wit)

    if mode != "montecarlo":
        raise ParameterError(f"unknown mode {mode!r}")
    if samples < 2:
        raise ParameterError("need at least 2 samples")
    rng = np.random.default_rng(seed)
    scale = float(len(steps)) ** (m - 2)
    tails = [(a, b) for a in steps for b in steps]
    v1 = np.empty(samples)
    v2 = np.empty(samples)
    for t in range(samples):
        head = [steps[c] for c in rng.integers(0, len(steps), m - 2)]
        hp = tuple(p for p, _ in head)
        hs = tuple(s for _, s in head)
        b = sum(p * s for p, s in head)
        a1 = a2 = 0.0
        for (p1, s1), (p2, s2) in tails:
            p_vec, s_vec = hp + (p1, p2), hs + (s1, s2)
            if b + s1 * p1 + s2 * p2 == 0:
                a1 += ctx.s1_term(p_vec, s_vec)[0]
            a2 += ctx.s2_term(p_vec, s_vec)
        v1[t], v2[t] = a1 * scale, a2 * scale
    r = math.sqrt(samples)
    return WalkSumResult(float(v1.mean()), float(v2.mean()), "montecarlo",
                         float(v1.std(ddof=1) / r), float(v2.std(ddof=1) / r), samples)
