import itertools
import math
from collections import Counter

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, strategies as st

from divlab.arith import PrimeWindow, build_factor_table, sieve_primes
from divlab.divgraph import SupportMask
from divlab.errors import CapacityError, ParameterError, ValidationError
from divlab.walkshapes import (Shape, ThreadSpec, build_sieve_graph, catalan, classify_indices,
                               dyck_code, evaluate_walk_sums, induced_walk_graph, random_sieve_graph,
                               reduce_shape, set_partitions, shape_family_census, shape_of,
                               validate_tuple)

# classes {1,8},{2,9},{3},{4,7},{5,6,10}; the word reduces by cancelling x5 x5^-1 then x4^-1 x4
LONG = Shape.from_labels("ABCDEEDABE", (1, -1, 1, -1, 1, -1, 1, 1, 1, -1))
FIRST = Shape.from_labels("ABCABF", (1, -1, 1, 1, 1, -1))


def test_shape_of():
    assert shape_of((11, 13, 11, 17), (1, 1, -1, -1)).blocks == ((1, 3), (2,), (4,))
    assert shape_of((7,) * 4, (1, -1, 1, -1)).blocks == ((1, 2, 3, 4),)
    assert LONG.blocks == ((1, 8), (2, 9), (3,), (4, 7), (5, 6, 10))


def test_shape_line_roundtrip():
    assert Shape.from_line(LONG.to_line()) == LONG
    assert LONG.to_line() == "1,8|2,9|3|4,7|5,6,10 +-+-+-+++-"
    with pytest.raises(ParameterError):
        Shape.from_line("1,2 +*")
    with pytest.raises(ValidationError):
        Shape(((1,), (1, 2)), (1, -1))


def test_reduction_examples():
    r = reduce_shape(Shape.from_labels("xx", (1, -1)))
    assert r.length == 0 and r.yellow == ((1, 2),)
    s = Shape.from_labels("abab", (1, 1, 1, 1))
    r = reduce_shape(s)
    assert r.shape == s and r.yellow == () and r.iota == (1, 2, 3, 4)
    r = reduce_shape(LONG)
    assert r.yellow == ((4, 7),) and r.length == 6 and r.iota == (1, 2, 3, 8, 9, 10)


def test_walk_graph_first_example():
    g = induced_walk_graph(FIRST)
    names = {j: b for j, b in enumerate(g.vertices)}
    edges = {frozenset((names[u], names[v])) for u, v in g.edges}
    assert edges == {frozenset({(1, 4), (2, 5)}), frozenset({(2, 5), (3,)}),
                     frozenset({(1, 4), (3,)}), frozenset({(2, 5), (6,)})}


def test_walk_graph_with_yellow():
    g = induced_walk_graph(LONG)
    names = {j: b for j, b in enumerate(g.vertices)}
    edges = {frozenset((names[u], names[v])) for u, v in g.edges}
    # adjacency through yellow positions: {1,8} meets {5,6,10} across {4,7}
    assert frozenset({(1, 8), (5, 6, 10)}) in edges
    assert edges == {frozenset(e) for e in [((1, 8), (2, 9)), ((2, 9), (3,)), ((3,), (5, 6, 10)),
                                            ((1, 8), (5, 6, 10)), ((2, 9), (5, 6, 10))]}
    assert g.n == 4


def test_walk_graph_single_class():
    g = induced_walk_graph(Shape.from_labels("aaaa", (1, 1, -1, 1)))
    assert g.n == 1 and not g.edges


@st.composite
def shapes(draw, max_k=5):
    k = draw(st.integers(1, max_k))
    labels = draw(st.lists(st.integers(0, k), min_size=2 * k, max_size=2 * k))
    signs = draw(st.lists(st.sampled_from([1, -1]), min_size=2 * k, max_size=2 * k))
    return Shape.from_labels(labels, signs)


@given(shapes())
def test_walk_graph_properties(s):
    r = reduce_shape(s)
    g = induced_walk_graph(s, r)
    assert g.is_connected()
    assert g.n == len(s.blocks) - len(r.yellow)
    # the reduced word contains no cancelling neighbours
    w = r.shape.word()
    assert all(not (a[0] == b[0] and a[1] == -b[1]) for a, b in zip(w, w[1:]))
    if r.yellow:
        code = dyck_code(s, r.yellow)
        assert code.count("(") == code.count(")")


# --- index sets against an independent scan ---------------------------------

def brute_index_sets(p, sg):
    m = len(p)
    beta = [sum(p[t] * sg[t] for t in range(i)) for i in range(m + 1)]
    cnt = Counter(p)
    L = {i for i in range(1, m + 1) if cnt[p[i - 1]] == 1}
    S, S0, S1 = set(), set(), {}
    for i in sorted(L):
        pi = p[i - 1]
        for j in range(1, m + 1):
            hit = (beta[i] - beta[j]) % pi == 0
            lone_between = any((i < x <= j) or (j < x < i) for x in L)
            if j not in (i - 1, i):
                if (hit and beta[j] != beta[i - 1] and beta[j] != beta[i]) or (beta[i] == beta[j] and j in L):
                    S.add(i)
            if hit and lone_between:
                S0.add(i)
            if j not in (i - 1, i) and hit and not lone_between and i not in S1:
                ci = Counter()
                cj = Counter()
                for t in range(i):
                    ci[p[t]] += sg[t]
                for t in range(j):
                    cj[p[t]] += sg[t]
                if any(ci[q] != cj[q] for q in set(p) if q != pi):
                    S1[i] = j
    pairs = [(i, i2, tuple(range(i + 1, i2))) for i, i2 in itertools.combinations(range(1, m + 1), 2)
             if p[i - 1] == p[i2 - 1]]
    return L, S, S0, S1, pairs


def test_index_sets_distinct():
    p = (11, 13, 17, 19)
    r = classify_indices(p, (1, 1, 1, 1))
    assert r.L == {1, 2, 3, 4} and not r.S and not r.S0 and not r.S1


def test_index_sets_pairs():
    r = classify_indices((11, 13, 11, 13), (1, 1, -1, -1))
    assert r.L == frozenset()
    assert r.recurrence_pairs[0] == (1, 3, (2,))
    assert r.recurrence_pairs == [(1, 3, (2,)), (2, 4, (3,))]


@given(st.lists(st.sampled_from([11, 13, 17, 19, 23, 29, 31]), min_size=6, max_size=6),
       st.lists(st.sampled_from([1, -1]), min_size=6, max_size=6))
def test_index_sets_against_brute(p, sg):
    r = classify_indices(p, sg, sieve_primes(11, 31))
    L, S, S0, S1, pairs = brute_index_sets(p, sg)
    assert r.L == L and r.S == S and r.S0 == S0
    assert r.S1 == set(S1) and r.s1_witness == S1
    assert r.recurrence_pairs == pairs


def test_index_sets_capacity():
    with pytest.raises(CapacityError):
        classify_indices((11,) * 14, (1, -1) * 7)


# --- Dyck codes --------------------------------------------------------------

def test_dyck_examples():
    assert dyck_code(LONG) == "()"
    s = Shape.from_labels("xxxyyx", (1, -1, -1, -1, 1, 1))
    assert dyck_code(s, ((1, 2, 3, 6), (4, 5))) == "()(())"


@pytest.mark.parametrize("m", [1, 2, 3, 4])
def test_dyck_enumeration(m):
    codes = set()
    letters = range(m)
    for word in itertools.product(itertools.product(letters, (1, -1)), repeat=2 * m):
        stack = []
        for x, s in word:
            if stack and stack[-1] == (x, -s):
                stack.pop()
            else:
                stack.append((x, s))
        if stack:
            continue
        shape = Shape.from_labels([x for x, _ in word], [s for _, s in word])
        codes.add(dyck_code(shape, shape.blocks))
    assert len(codes) <= catalan(m) <= 4 ** m


# --- sieve graphs ------------------------------------------------------------

def test_sieve_graph_no_threads():
    G = build_sieve_graph(2, [], ["a", "b", "a", "c"])
    assert G.cost == 0 and G.is_non_redundant()
    rep = validate_tuple(G, {1, 2, 3, 4}, [1, 1, -1, 1], {"a": 11, "b": 13, "c": 17})
    assert rep.valid or not rep.divisibility


def test_closed_thread_nonzero_sum():
    G = build_sieve_graph(1, [ThreadSpec("closed", 0, 2)], ["h1", "h2", "x", "y"])
    rep = validate_tuple(G, set(), [1, 1, 1, 1], {"h1": 11, "h2": 13, "x": 17, "y": 19})
    assert not rep.closed_zero and not rep.valid
    ok = validate_tuple(G, set(), [1, 1, 1, -1], {"h1": 11, "h2": 13, "x": 17, "y": 17})
    # same prime, opposite signs: sum zero, but x and y are different classes
    assert ok.closed_zero


def test_thread_rules():
    with pytest.raises(ValidationError):
        build_sieve_graph(1, [ThreadSpec("closed", 0, 1)], ["a", "b", "c"])
    with pytest.raises(ValidationError):
        # class x split into two runs inside an open thread
        build_sieve_graph(1, [ThreadSpec("open", 0, 3)], ["a", "b", "x", "y", "x", "w", "w"])
    with pytest.raises(ValidationError):
        build_sieve_graph(1, [ThreadSpec("open", 0, 1)], ["a", "b", "x", "w", "v"])


def _walk_sum(G, weight, path_nodes_edges):
    return sum(weight[e] * d for e, d in path_nodes_edges)


def independent_validity(G, l_set, sigma, primes):
    """Conditions checked on a subdivided simple graph using networkx cycle bases."""
    H = nx.Graph()
    w = {}
    for e, (a, b) in enumerate(G.edges):
        mid = ("m", e)
        H.add_edge(("v", a), mid)
        H.add_edge(mid, ("v", b))
        wt = sigma[e] * primes[G.labels[e]]
        w[(("v", a), mid)] = wt
        w[(mid, ("v", a))] = -wt
        w[(mid, ("v", b))] = 0
        w[(("v", b), mid)] = 0
    for v in range(G.n_vertices):
        H.add_node(("v", v))

    def path_sum(nodes):
        return sum(w[(x, y)] for x, y in zip(nodes, nodes[1:]))

    g = 0
    for cyc in nx.cycle_basis(H):
        g = math.gcd(g, path_sum(cyc + [cyc[0]]))
    closed = g == 0
    opened = True
    signs = True
    for t, th in enumerate(G.threads):
        path = G.thread_path(t)
        if th.kind == "open" and sum(sigma[e] * primes[G.labels[e]] for e in path) == 0:
            opened = False
        pairs = list(zip(path, path[1:])) + ([(path[-1], path[0])] if th.kind == "closed" else [])
        signs &= all(sigma[a] == sigma[b] for a, b in pairs if G.labels[a] == G.labels[b])
    divis = True
    for x in set(G.labels):
        live = [e for e in range(len(G.edges)) if G.labels[e] == x
                and (G.thread_of[e] >= 0 or e + 1 in l_set)]
        if len(live) < 2:
            continue
        p = primes[x]
        if g % p:
            divis = False
            continue
        src = ("v", G.edges[live[0]][0])
        for e in live[1:]:
            dst = ("v", G.edges[e][0])
            if not nx.has_path(H, src, dst):
                continue
            if path_sum(nx.shortest_path(H, src, dst)) % p:
                divis = False
    return closed and opened and signs and divis, closed, signs


def test_validity_against_independent_checker():
    rng = np.random.default_rng(7)
    pool = [11, 13, 17, 19, 23]
    agree = 0
    for _ in range(300):
        k = int(rng.integers(1, 4))
        G = random_sieve_graph(rng, k, 3, max_threads=2, n_labels=3)
        labs = sorted(set(G.labels))
        primes = {x: int(rng.choice(pool)) for x in labs}
        sigma = [int(rng.choice([1, -1])) for _ in G.edges]
        l_set = {i for i in range(1, 2 * k + 1) if rng.random() < 0.5}
        rep = validate_tuple(G, l_set, sigma, primes)
        ok, closed, signs = independent_validity(G, l_set, sigma, primes)
        assert rep.closed_zero == closed and rep.signs == signs
        if closed:
            assert rep.valid == ok
        agree += 1
    assert agree == 300


def test_random_sieve_graphs_build():
    rng = np.random.default_rng(11)
    for _ in range(200):
        G = random_sieve_graph(rng, int(rng.integers(1, 4)), 3)
        assert len(G.labels) == len(G.edges)
        assert G.cost <= sum(1 for t in G.thread_of if t >= 0)


# --- census -----------------------------------------------------------------

def test_set_partitions_bell():
    assert [sum(1 for _ in set_partitions(range(n))) for n in range(7)] == [1, 1, 2, 5, 15, 52, 203]


def test_census_examples():
    r = shape_family_census(2, set(), 1, 0)
    assert r.count == 1 and r.bound >= 1
    r = shape_family_census(1, {1, 2}, 1, 0)
    assert r.count == 2 and r.count <= 5 ** 2 * 2 ** 2
    r = shape_family_census(3, range(1, 7), 2, 1)
    assert r.count == 199 and r.bound == 3375000 and r.partitions == 203


# --- walk sums --------------------------------------------------------------

def test_walk_sums_single_prime():
    p = 11
    pw = PrimeWindow.from_primes([p])
    table = build_factor_table(10**5, 2000, pw)
    r = evaluate_walk_sums(pw, table, 10**6, 1, 1, support=SupportMask.full(10**5, 2000))
    # both zero-sum pairs (p,+,p,-) and (p,-,p,+): l runs over subsets of {1,2}
    # with weights 1/p^2 (none), 1/p^2 (one), 1/p^2 (other), 1/p (both)
    assert r.S1 == pytest.approx(2 * (3 / p**2 + 1 / p), rel=1e-12)


def test_walk_sums_empty_support():
    pw = PrimeWindow.from_primes([11, 13])
    table = build_factor_table(10**5, 500, pw)
    r = evaluate_walk_sums(pw, table, 4, 2, 1, support=SupportMask.empty(10**5, 500))
    assert r.S1 == 0 and r.members == 0


def test_walk_sums_exact_frozen():
    pw = PrimeWindow.from_primes([11, 13, 17, 19])
    table = build_factor_table(10**5, 10**5, pw)
    r = evaluate_walk_sums(pw, table, 4, 2, 2)
    assert r.S1 == pytest.approx(2.5224, abs=1e-4)
    assert r.S2 == pytest.approx(0.80698, abs=1e-5)
    mc = evaluate_walk_sums(pw, table, 4, 2, 2, mode="montecarlo", seed=3, samples=100)
    assert abs(mc.S1 - r.S1) <= 4 * mc.stderr1
    assert abs(mc.S2 - r.S2) <= 4 * mc.stderr2
