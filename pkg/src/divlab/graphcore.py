"""Graph and exact linear-algebra tools: leafy spanning trees, in-boundary
selection, connected sets with large out-boundary, rational ranks and
lattice-point counts."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import networkx as nx
import numpy as np

from .errors import CapacityError, ParameterError, PreconditionError, ValidationError, VerificationError
from .walkshapes import Shape, WalkGraph, induced_walk_graph, reduce_shape

EXACT_LEAF_LIMIT = 16


# --- graphs -----------------------------------------------------------------

@dataclass(frozen=True)
class SimpleGraph:
    """Undirected simple graph on 0..n-1 with an optional set of arrows."""

    n: int
    edges: frozenset
    arrows: frozenset = frozenset()

    def __post_init__(self):
        es = set()
        for u, v in self.edges:
            if u == v:
                raise ValidationError("loops are not allowed")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise ValidationError("edge endpoint out of range")
            es.add((min(u, v), max(u, v)))
        for u, v in self.arrows:
            if u == v or not (0 <= u < self.n and 0 <= v < self.n):
                raise ValidationError(f"bad arrow ({u}, {v})")
        object.__setattr__(self, "edges", frozenset(es))
        object.__setattr__(self, "arrows", frozenset((int(u), int(v)) for u, v in self.arrows))

    @classmethod
    def from_networkx(cls, g: nx.Graph, arrows=()) -> "SimpleGraph":
        idx = {v: i for i, v in enumerate(g.nodes)}
        return cls(len(idx), frozenset((idx[a], idx[b]) for a, b in g.edges),
                   frozenset((idx[a], idx[b]) for a, b in arrows))

    @classmethod
    def from_walk_graph(cls, w: WalkGraph) -> "SimpleGraph":
        return cls(w.n, w.edges, w.arrows)

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(self.n))
        g.add_edges_from(self.edges)
        return g

    def adjacency(self) -> list[set[int]]:
        adj = [set() for _ in range(self.n)]
        for u, v in self.edges:
            adj[u].add(v)
            adj[v].add(u)
        return adj

    def degrees(self) -> list[int]:
        return [len(a) for a in self.adjacency()]

    def in_degrees(self) -> list[int]:
        d = [0] * self.n
        for _, v in self.arrows:
            d[v] += 1
        return d

    def is_connected(self, subset: Iterable[int] | None = None) -> bool:
        vs = set(range(self.n)) if subset is None else set(subset)
        if not vs:
            return True
        adj = self.adjacency()
        start = next(iter(vs))
        seen, todo = {start}, [start]
        while todo:
            for w in adj[todo.pop()]:
                if w in vs and w not in seen:
                    seen.add(w)
                    todo.append(w)
        return seen == vs

    def to_text(self) -> str:
        adj = self.adjacency()
        lines = [f"{v}: " + " ".join(map(str, sorted(adj[v]))) for v in range(self.n)]
        outs: dict = {}
        for u, v in sorted(self.arrows):
            outs.setdefault(u, []).append(v)
        lines += [f"-> {u}: " + " ".join(map(str, vs)) for u, vs in sorted(outs.items())]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "SimpleGraph":
        n, edges, arrows = 0, set(), set()
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            is_arrow = line.startswith("->")
            if is_arrow:
                line = line[2:].strip()
            head, sep, rest = line.partition(":")
            try:
                v = int(head)
                nbrs = [int(x) for x in rest.split()]
            except ValueError:
                raise ParameterError(f"line {lineno}: expected 'v: a b c'") from None
            if not sep:
                raise ParameterError(f"line {lineno}: missing ':'")
            if is_arrow:
                arrows.update((v, w) for w in nbrs)
            else:
                n = max(n, v + 1)
                edges.update((min(v, w), max(v, w)) for w in nbrs)
        n = max([n] + [max(e) + 1 for e in edges | arrows])
        return cls(n, frozenset(edges), frozenset(arrows))

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path) -> "SimpleGraph":
        return cls.from_text(Path(path).read_text())


def petersen() -> SimpleGraph:
    return SimpleGraph.from_networkx(nx.petersen_graph())


# --- exact rank -------------------------------------------------------------

def integer_rank(rows: Sequence[Sequence[int]]) -> int:
    """Rank of an integer matrix by fraction-free (Bareiss) elimination."""
    A = [list(map(int, r)) for r in rows]
    if not A:
        return 0
    m = len(A[0])
    rank, prev = 0, 1
    for col in range(m):
        piv = next((r for r in range(rank, len(A)) if A[r][col]), None)
        if piv is None:
            continue
        A[rank], A[piv] = A[piv], A[rank]
        p = A[rank][col]
        for r in range(rank + 1, len(A)):
            a = A[r][col]
            A[r] = [(p * A[r][j] - a * A[rank][j]) // prev for j in range(m)]
        prev = p
        rank += 1
        if rank == len(A):
            break
    return rank


@dataclass(frozen=True)
class RationalMatrix:
    rows: tuple[tuple[Fraction, ...], ...]

    @classmethod
    def of(cls, rows) -> "RationalMatrix":
        rows = tuple(tuple(Fraction(x) for x in r) for r in rows)
        if len({len(r) for r in rows}) > 1:
            raise ParameterError("ragged matrix")
        return cls(rows)

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.rows), (len(self.rows[0]) if self.rows else 0)

    def integer_rows(self) -> list[list[int]]:
        """Each row scaled by the lcm of its denominators; the rank is unchanged."""
        out = []
        for r in self.rows:
            d = math.lcm(*(x.denominator for x in r)) if r else 1
            out.append([int(x * d) for x in r])
        return out

    def rank(self) -> int:
        return integer_rank(self.integer_rows())

    def determinant(self) -> Fraction:
        n, m = self.shape
        if n != m:
            raise ParameterError("determinant of a non-square matrix")
        A = [list(r) for r in self.rows]
        det = Fraction(1)
        for c in range(n):
            piv = next((r for r in range(c, n) if A[r][c]), None)
            if piv is None:
                return Fraction(0)
            if piv != c:
                A[c], A[piv] = A[piv], A[c]
                det = -det
            det *= A[c][c]
            for r in range(c + 1, n):
                f = A[r][c] / A[c][c]
                if f:
                    A[r] = [a - f * b for a, b in zip(A[r], A[c])]
        return det


# --- leafy spanning trees ---------------------------------------------------

@dataclass
class LeafTree:
    edges: frozenset
    leaves: frozenset
    exact: bool  # maximum over all spanning trees
    n3: int  # vertices of degree >= 3 in the graph
    bound: float  # n3/4 + 2

    @property
    def leaf_count(self) -> int:
        return len(self.leaves)


def _check_tree(g: SimpleGraph, edges) -> frozenset:
    t = SimpleGraph(g.n, frozenset(edges))
    if not t.edges <= g.edges or len(t.edges) != max(g.n - 1, 0) or not t.is_connected():
        raise VerificationError("constructed tree is not a spanning tree", instance=g.to_text())
    deg = t.degrees()
    return frozenset(v for v in range(g.n) if deg[v] == 1)


def _tree_from_core(g: SimpleGraph, core: set[int]) -> set[tuple[int, int]]:
    """BFS tree inside the connected dominating set, other vertices hung on it."""
    adj = g.adjacency()
    root = min(core)
    seen, todo, edges = {root}, [root], set()
    while todo:
        u = todo.pop(0)
        for w in sorted(adj[u]):
            if w in core and w not in seen:
                seen.add(w)
                todo.append(w)
                edges.add((min(u, w), max(u, w)))
    for v in range(g.n):
        if v not in core:
            u = min(adj[v] & core)
            edges.add((min(u, v), max(u, v)))
    return edges


def _min_connected_dominating_set(g: SimpleGraph) -> set[int]:
    n = g.n
    nb = [sum(1 << w for w in a) | (1 << v) for v, a in enumerate(g.adjacency())]
    full = (1 << n) - 1
    adjm = [sum(1 << w for w in a) for a in g.adjacency()]

    def connected(mask):
        start = mask & -mask
        seen = start
        frontier = start
        while frontier:
            v = frontier.bit_length() - 1
            frontier &= frontier - 1
            new = adjm[v] & mask & ~seen
            seen |= new
            frontier |= new
        return seen == mask

    for size in range(1, n + 1):
        for combo in itertools.combinations(range(n), size):
            mask = sum(1 << v for v in combo)
            dom = 0
            for v in combo:
                dom |= nb[v]
            if dom == full and connected(mask):
                return set(combo)
    raise VerificationError("no connected dominating set found")


def _greedy_leafy_tree(g: SimpleGraph) -> set[tuple[int, int]]:
    """Grow a tree from a vertex, always expanding the tree vertex that adds the
    most new vertices."""
    adj = g.adjacency()
    start = max(range(g.n), key=lambda v: (len(adj[v]), -v))
    intree, edges = {start}, set()
    frontier = {start}
    while len(intree) < g.n:
        best = max(intree, key=lambda v: (len(adj[v] - intree), -v))
        new = adj[best] - intree
        if not new:
            raise VerificationError("greedy tree stalled")
        for w in new:
            intree.add(w)
            edges.add((min(best, w), max(best, w)))
        frontier |= new
    return edges


def max_leaf_spanning_tree(g: SimpleGraph) -> LeafTree:
    """A spanning tree with many leaves.

    Graphs with at most EXACT_LEAF_LIMIT vertices are solved exactly through
    a minimum connected dominating set (a tree has n - |internal| leaves and
    its internal vertices dominate and are connected); there the guarantee
    leaves >= n3/4 + 2 is asserted.  Larger graphs use a greedy expansion and
    the guarantee is only reported.
    """
    if g.n == 0:
        raise ValidationError("empty graph")
    if not g.is_connected():
        raise ValidationError("graph is disconnected")
    deg = g.degrees()
    n3 = sum(d >= 3 for d in deg)
    bound = n3 / 4 + 2
    if g.n == 1:
        return LeafTree(frozenset(), frozenset(), True, 0, bound)
    if g.n == 2:
        return LeafTree(g.edges, frozenset({0, 1}), True, 0, bound)
    exact = g.n <= EXACT_LEAF_LIMIT
    edges = _tree_from_core(g, _min_connected_dominating_set(g)) if exact else _greedy_leafy_tree(g)
    leaves = _check_tree(g, edges)
    if exact and len(leaves) < bound:
        raise VerificationError(f"{len(leaves)} leaves < {bound}", instance=g.to_text())
    return LeafTree(frozenset(edges), leaves, exact, n3, bound)


def _invariant(g: nx.Graph) -> tuple:
    deg = dict(g.degree())
    tri = nx.triangles(g)
    return tuple(sorted((deg[v], tri[v], tuple(sorted(deg[w] for w in g[v]))) for v in g))


def mindeg3_graphs(max_n: int = 8) -> list[nx.Graph]:
    """All connected graphs with minimum degree >= 3 on 4..max_n vertices, up to isomorphism.

    Graphs on up to 7 vertices come from the networkx atlas; a graph on 8
    vertices minus a vertex of minimum degree is isomorphic to some atlas
    graph, so the 8-vertex ones are the atlas graphs on 7 vertices extended
    by a vertex of minimum degree, deduplicated by isomorphism.
    """
    if max_n > 8:
        raise CapacityError("exhaustive generation limited to 8 vertices")
    from networkx.generators.atlas import graph_atlas_g

    atlas = graph_atlas_g()
    out = [g for g in atlas if 4 <= g.number_of_nodes() <= max_n
           and min(d for _, d in g.degree()) >= 3 and nx.is_connected(g)]
    if max_n < 8:
        return out
    buckets: dict = {}
    for base in atlas:
        if base.number_of_nodes() != 7:
            continue
        deg = dict(base.degree())
        for r in range(3, 8):
            for nbrs in itertools.combinations(range(7), r):
                # the added vertex may be taken of minimum degree
                if any(deg[v] + (v in nbrs) < max(3, r) for v in range(7)):
                    continue
                g = base.copy()
                g.add_edges_from((7, v) for v in nbrs)
                key = _invariant(g)
                bucket = buckets.setdefault(key, [])
                if not any(nx.is_isomorphic(g, h) for h in bucket):
                    bucket.append(g)
    for bucket in buckets.values():
        out.extend(g for g in bucket if nx.is_connected(g))
    return out


# --- in-boundary subsets and blue selection ---------------------------------

def inboundary_subset(g: SimpleGraph, S: Iterable[int]) -> frozenset:
    """A subset S' of S with |S'| >= |S|/3, each member receiving an arrow from
    outside S'.

    Keep one incoming arrow per vertex (the one from the smallest source).
    Inside S these parent links form trees and cycles; colour by depth
    parity, breaking each cycle at one vertex, and keep the larger class of
    each component.
    """
    S = set(S)
    if any(not 0 <= v < g.n for v in S):
        raise ParameterError("S contains a vertex outside the graph")
    indeg = g.in_degrees()
    if any(d == 0 for d in indeg):
        raise ValidationError("some vertex has in-degree 0")
    parent = {}
    for u, v in sorted(g.arrows):
        parent.setdefault(v, u)
    children: dict = {v: [] for v in S}
    for v in S:
        if parent[v] in S:
            children[parent[v]].append(v)
    chosen = set()
    done = set()
    for v0 in sorted(S):
        if v0 in done:
            continue
        # walk up to a root or around a cycle
        path, v = [], v0
        seen_here = set()
        while v in S and v not in seen_here and v not in done:
            seen_here.add(v)
            path.append(v)
            v = parent[v]
        if v in done:
            # joins an already handled component; cannot happen since components
            # are handled from their root, but stay safe
            root, cyc = path[-1], False
        elif v in seen_here:
            root, cyc = v, True
        else:
            root, cyc = path[-1], False
        depth = {root: 0}
        todo = [root]
        comp = []
        while todo:
            u = todo.pop()
            comp.append(u)
            for w in children[u]:
                if w not in depth and not (cyc and w == root):
                    depth[w] = depth[u] + 1
                    todo.append(w)
        even = {u for u in comp if depth[u] % 2 == 0}
        odd = set(comp) - even
        if cyc and parent[root] in even:
            even.discard(root)
        chosen |= even if len(even) >= len(odd) else odd
        done |= set(comp)
    chosen = frozenset(chosen)
    if 3 * len(chosen) < len(S):
        raise VerificationError("selected fewer than |S|/3 vertices", instance=(g.to_text(), sorted(S)))
    for w in chosen:
        if not any(b == w and a not in chosen for a, b in g.arrows):
            raise VerificationError("a selected vertex has no arrow from outside",
                                    instance=(g.to_text(), sorted(S)))
    return chosen


def tour_arrows(g: SimpleGraph, seed: int = 0) -> SimpleGraph:
    """g with arrows along a closed walk around a random spanning tree.

    Every vertex receives an arrow, as in the graph of a closed walk.
    """
    rng = np.random.default_rng(seed)
    adj = g.adjacency()
    start = int(rng.integers(g.n))
    seen = {start}
    arrows = set()

    def visit(u):
        nbrs = list(adj[u])
        rng.shuffle(nbrs)
        for v in nbrs:
            if v not in seen:
                seen.add(v)
                arrows.add((u, v))
                visit(v)
                arrows.add((v, u))

    visit(start)
    if len(seen) != g.n:
        raise ValidationError("graph is disconnected")
    return SimpleGraph(g.n, g.edges, frozenset(arrows))


def out_boundary(g: SimpleGraph, S: Iterable[int]) -> frozenset:
    S = set(S)
    return frozenset(w for v, w in g.arrows if v in S and w not in S)


@dataclass
class BlueSelection:
    blue: frozenset  # V'
    boundary: frozenset
    n3: int
    proven_bound: float  # n3/12 + 2/3
    stated_bound: float  # n3/12 + 4/3
    stated_asserted: bool
    tree: LeafTree = field(repr=False, default=None)


def blue_selection(g: SimpleGraph, n3: int | None = None) -> BlueSelection:
    """V' = V minus the in-boundary subset of the leaves of a leafy spanning tree.

    The leaves number >= n3/4 + 2 and a third of them survive the selection,
    which gives |out-boundary| >= n3/12 + 2/3; that is always checked when the
    tree is exact.  The larger constant 4/3 is asserted only when the graph
    has at least ceil(n3/12 + 4/3) vertices outside V', and reported otherwise.
    """
    if not g.is_connected():
        raise ValidationError("graph is disconnected")
    deg = g.degrees()
    actual = sum(d > 2 for d in deg)
    if n3 is None:
        n3 = actual
    elif n3 > actual:
        raise PreconditionError(f"only {actual} vertices have degree > 2")
    tree = max_leaf_spanning_tree(g)
    sprime = inboundary_subset(g, tree.leaves)
    blue = frozenset(range(g.n)) - sprime
    if not g.is_connected(blue):
        raise VerificationError("V' is not connected", instance=g.to_text())
    bd = out_boundary(g, blue)
    proven = n3 / 12 + 2 / 3
    stated = n3 / 12 + 4 / 3
    if tree.exact and g.n >= 2 and len(bd) < proven - 1e-12:
        raise VerificationError(f"out-boundary {len(bd)} < {proven}", instance=g.to_text())
    assertable = g.n - len(blue) >= math.ceil(stated)
    if assertable and len(bd) < stated:
        raise VerificationError(f"out-boundary {len(bd)} < {stated}", instance=g.to_text())
    return BlueSelection(blue, bd, n3, proven, stated, assertable, tree)


# --- ranks from shapes ------------------------------------------------------

def succession_count(shape: Shape) -> int:
    """Largest r with i_1 < j_1 < i_1' <= i_2 < j_2 < i_2' <= ... <= i_r < j_r < i_r'
    where i_t ~ i_t' and j_t is in another class.  Greedy by earliest end."""
    lab = shape.labels
    n = len(lab)
    count, start = 0, 0
    while True:
        best = None
        for b in range(start + 2, n):
            # is there a <= start' < j < b with lab[a] == lab[b] != lab[j]?
            for a in range(start, b - 1):
                if lab[a] == lab[b] and any(lab[j] != lab[a] for j in range(a + 1, b)):
                    best = b
                    break
            if best is not None:
                break
        if best is None:
            return count
        count += 1
        start = best


@dataclass
class RankReport:
    dim_pairs: int
    dim_all: int
    s: int
    kappa: int | None
    rank_bound: float | None
    hypothesis: bool  # no kappa-fold succession in the reduced shape
    asserted: bool


def _v_vectors(shape: Shape, red: list) -> list[list[int]]:
    """v(i) for i = 1..2k as integer vectors over the red classes."""
    col = {b: c for c, b in enumerate(red)}
    lab = shape.labels
    cur = [0] * len(red)
    out = []
    for i in range(shape.length):
        out.append(list(cur))
        b = shape.blocks[lab[i]]
        if b in col:
            cur[col[b]] += shape.signs[i]
    return out


def red_blue_rank(shape: Shape, coloring: Mapping[tuple, str], kappa: int | None = None) -> RankReport:
    """Ranks of the difference vectors v(i2) - v(i1) for a red/blue colouring.

    `coloring` maps original blocks to "red", "blue" or anything else for
    uncoloured.  Yellow classes may not be red or blue, and the blue classes
    must induce a connected subgraph of the walk graph.
    """
    reduced = reduce_shape(shape)
    wg = induced_walk_graph(shape, reduced)
    yellow = set(reduced.yellow)
    color = {b: coloring.get(b) for b in shape.blocks}
    if any(b in yellow and c in ("red", "blue") for b, c in color.items()):
        raise ValidationError("yellow classes cannot be coloured")
    blue = [b for b in shape.blocks if color[b] == "blue"]
    red = [b for b in shape.blocks if color[b] == "red"]
    vid = {b: j for j, b in enumerate(wg.vertices)}
    if not SimpleGraph.from_walk_graph(wg).is_connected(vid[b] for b in blue):
        raise PreconditionError("blue classes do not induce a connected subgraph")
    v = _v_vectors(shape, red)

    def diff(i2, i1):
        return [a - b for a, b in zip(v[i2 - 1], v[i1 - 1])]

    pairs = [diff(b[t], b[0]) for b in blue for t in range(1, len(b))]
    ublue = sorted(i for b in blue for i in b)
    alls = [diff(i, ublue[0]) for i in ublue[1:]]
    dim_pairs = integer_rank(pairs) if red else 0
    dim_all = integer_rank(alls) if red else 0
    if dim_pairs != dim_all:
        raise VerificationError("span of class differences differs from the full span",
                                instance=(shape.to_line(), sorted(color.items())))

    rlab = [shape.block_of(t) for t in reduced.iota]
    s = sum(1 for j in range(len(rlab) - 1)
            if color[rlab[j]] == "blue" and color[rlab[j + 1]] == "red")
    if kappa is None:
        return RankReport(dim_pairs, dim_all, s, None, None, False, False)
    if kappa < 1:
        raise ParameterError("kappa must be >= 1")
    bound = s / kappa - 1
    hyp = succession_count(reduced.shape) < kappa
    partition = all(color[b] in ("red", "blue") for b in wg.vertices)
    asserted = hyp and partition
    if asserted and dim_pairs < bound:
        raise VerificationError(f"rank {dim_pairs} < s/kappa - 1 = {bound}",
                                instance=(shape.to_line(), sorted(color.items()), kappa))
    return RankReport(dim_pairs, dim_all, s, kappa, bound, hyp, asserted)


def sparse_rank_bound(m: RationalMatrix, kappa: int) -> bool:
    """rank(m) >= rows/kappa when every row is non-zero and every column has
    at most kappa non-zero entries."""
    nrows, ncols = m.shape
    if kappa < 1:
        raise ParameterError("kappa must be >= 1")
    if any(all(x == 0 for x in r) for r in m.rows):
        raise PreconditionError("a row is zero")
    if any(sum(r[c] != 0 for r in m.rows) > kappa for c in range(ncols)):
        raise PreconditionError("a column has more than kappa non-zero entries")
    r = m.rank()
    if r * kappa < nrows:
        raise VerificationError(f"rank {r} < {nrows}/{kappa}", instance=m.rows)
    return True


# --- lattice points ---------------------------------------------------------

@dataclass
class LatticeCount:
    count: int
    bound: float


def lattice_count(mat: Sequence[Sequence[int]], c: Sequence[int], r: Sequence[int],
                  boxes: Sequence[int], C: int | None = None, M: int | None = None) -> LatticeCount:
    """Count n with N_i <= n_i <= 2 N_i and r_i | (mat n + c)_i by brute force,
    against the bound (2 C m / M)^m prod N_i."""
    A = np.asarray(mat, dtype=np.int64)
    m = A.shape[0]
    if A.shape != (m, m) or len(c) != m or len(r) != m or len(boxes) != m:
        raise ParameterError("dimension mismatch")
    if RationalMatrix.of(A.tolist()).determinant() == 0:
        raise PreconditionError("matrix is singular")
    C = int(np.abs(A).max()) if C is None else C
    M = min(r) if M is None else M
    if C < np.abs(A).max() or M < 1 or min(r) < M or min(boxes) < M:
        raise PreconditionError("need |entries| <= C, r_i >= M >= 1 and N_i >= M")
    if math.prod(n + 1 for n in boxes) > 5 * 10**7:
        raise CapacityError("box too large for brute force")
    grids = np.meshgrid(*[np.arange(n, 2 * n + 1, dtype=np.int64) for n in boxes], indexing="ij")
    pts = np.stack([g.ravel() for g in grids])
    vals = A @ pts + np.asarray(c, dtype=np.int64)[:, None]
    ok = np.all(vals % np.asarray(r, dtype=np.int64)[:, None] == 0, axis=0)
    count = int(ok.sum())
    bound = (2 * C * m / M) ** m * math.prod(boxes)
    if count > bound:
        raise VerificationError(f"{count} solutions exceed {bound}", instance=(A.tolist(), c, r, boxes))
    return LatticeCount(count, bound)
