"""Exact enumeration: cluster shapes, size polynomials, partitions, animals.

P(C(o) = S) for a nearest-neighbour configuration factorises as
(1-p)^{|boundary S|} * p^{|E(S)|}, so P(|C(o)| = n) is a polynomial in p with
integer coefficients once shapes are counted.  All arithmetic is exact
(Fraction); brute-force configuration sums provide an independent oracle on
tiny patches.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Iterator, Optional, Sequence

from .patches import LatticePatch, canon_edge

__all__ = [
    "ClusterShape",
    "RationalPolynomial",
    "CapExceeded",
    "enumerate_clusters",
    "cluster_size_polynomial",
    "brute_force_event_probability",
    "brute_cluster_size",
    "count_partitions",
    "partitions_pentagonal",
    "hardy_ramanujan_estimate",
    "count_tree_animals",
    "fit_animal_constant",
]

DEFAULT_CAP = 1 << 25


class CapExceeded(RuntimeError):
    """An enumeration would exceed the configured work cap."""


def work_cap(default: int = DEFAULT_CAP) -> int:
    env = os.environ.get("PERC_CAP")
    return int(env) if env else default


# ---------------------------------------------------------------------------
# polynomials


@dataclass(frozen=True)
class RationalPolynomial:
    """Dense polynomial with Fraction coefficients, index = degree."""

    coeffs: tuple

    @classmethod
    def from_list(cls, cs: Iterable) -> "RationalPolynomial":
        cs = [Fraction(c) for c in cs]
        while len(cs) > 1 and cs[-1] == 0:
            cs.pop()
        return cls(tuple(cs))

    @classmethod
    def zero(cls) -> "RationalPolynomial":
        return cls((Fraction(0),))

    def __add__(self, other: "RationalPolynomial") -> "RationalPolynomial":
        n = max(len(self.coeffs), len(other.coeffs))
        cs = [Fraction(0)] * n
        for i, c in enumerate(self.coeffs):
            cs[i] += c
        for i, c in enumerate(other.coeffs):
            cs[i] += c
        return RationalPolynomial.from_list(cs)

    def __mul__(self, other: "RationalPolynomial") -> "RationalPolynomial":
        cs = [Fraction(0)] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            if a == 0:
                continue
            for j, b in enumerate(other.coeffs):
                cs[i + j] += a * b
        return RationalPolynomial.from_list(cs)

    def scale(self, c) -> "RationalPolynomial":
        c = Fraction(c)
        return RationalPolynomial.from_list([c * a for a in self.coeffs])

    def __call__(self, x):
        acc = 0
        for c in reversed(self.coeffs):
            acc = acc * x + c
        return acc

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def to_json(self) -> list:
        return [str(c) for c in self.coeffs]


def monomial_term(count: int, e: int, b: int) -> RationalPolynomial:
    """count * p^e * (1-p)^b as an exact polynomial."""
    cs = [Fraction(0)] * (e + b + 1)
    for k in range(b + 1):
        cs[e + k] += count * math.comb(b, k) * (-1) ** k
    return RationalPolynomial.from_list(cs)


# ---------------------------------------------------------------------------
# cluster shapes


@dataclass(frozen=True)
class ClusterShape:
    """A possible finite cluster: (vertices, edges) with its patch boundary."""

    vertices: tuple  # sorted
    edges: tuple  # sorted canonical pairs
    boundary_size: int

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def to_json(self) -> dict:
        return {
            "vertices": list(self.vertices),
            "edges": [list(e) for e in self.edges],
            "boundary_size": self.boundary_size,
        }


def _connected_vertex_sets(adj: dict, root, n: int) -> Iterator[frozenset]:
    """All connected vertex sets of size exactly n containing root.

    Standard enumeration without duplicates: extend with candidates from the
    frontier, forbidding previously-considered candidates along each branch.
    """

    def extend(current: set, frontier: list, forbidden: set):
        if len(current) == n:
            yield frozenset(current)
            return
        while frontier:
            v = frontier.pop()
            if v in forbidden:  # frontier may hold duplicates
                continue
            forbidden = forbidden | {v}
            new_frontier = frontier + [
                w for w in adj[v] if w not in current and w not in forbidden
            ]
            current.add(v)
            yield from extend(current, new_frontier, forbidden)
            current.remove(v)

    if n == 1:
        yield frozenset({root})
        return
    yield from extend({root}, [w for w in adj[root]], {root})


def _spanning_connected_edge_sets(vertices: frozenset, internal: list) -> Iterator[tuple]:
    """All edge subsets of `internal` that connect all of `vertices`.

    Include/exclude DFS with a feasibility check: excluded edges must leave
    the remaining graph connected.
    """
    verts = sorted(vertices)
    vi = {v: i for i, v in enumerate(verts)}
    n = len(verts)
    m = len(internal)

    def connected_with(allowed_mask: int) -> bool:
        # union-find over edges allowed by the mask
        parent = list(range(n))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        comps = n
        for k in range(m):
            if allowed_mask >> k & 1:
                a, b = find(vi[internal[k][0]]), find(vi[internal[k][1]])
                if a != b:
                    parent[a] = b
                    comps -= 1
        return comps == 1

    full = (1 << m) - 1
    if not connected_with(full):
        return

    def rec(k: int, chosen: int, available: int):
        if k == m:
            if connected_with(chosen):
                yield chosen
            return
        bit = 1 << k
        # include edge k
        yield from rec(k + 1, chosen | bit, available)
        # exclude edge k, but only if remaining edges can still connect
        if connected_with(available & ~bit):
            yield from rec(k + 1, chosen, available & ~bit)

    for mask in rec(0, 0, full):
        yield tuple(internal[k] for k in range(m) if mask >> k & 1)


def enumerate_clusters(
    patch: LatticePatch, n: int, cap: Optional[int] = None
) -> list:
    """All shapes (V, E) of a possible cluster of the origin with |V| = n.

    Shapes are connected subgraphs containing the origin; the boundary size is
    measured in the ambient patch (edges with >= 1 end in V, not in E).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    cap = cap if cap is not None else work_cap()
    adj = patch.adjacency
    out = []
    for vs in _connected_vertex_sets(adj, patch.origin, n):
        internal = sorted(
            {canon_edge(u, w) for u in vs for w in adj[u] if w in vs}
        )
        incident = len(
            {canon_edge(u, w) for u in vs for w in adj[u]}
        )
        if n == 1:
            out.append(ClusterShape(tuple(sorted(vs)), (), incident))
            continue
        for es in _spanning_connected_edge_sets(vs, internal):
            out.append(
                ClusterShape(tuple(sorted(vs)), tuple(sorted(es)), incident - len(es))
            )
            if len(out) > cap:
                raise CapExceeded(f"more than {cap} shapes")
    out.sort(key=lambda s: (s.vertices, s.edges))
    return out


def cluster_size_polynomial(
    patch: LatticePatch, n: int, cap: Optional[int] = None
) -> RationalPolynomial:
    """P(|C(o)| = n) for bond percolation on the patch, exactly."""
    counts: dict = {}
    for shape in enumerate_clusters(patch, n, cap=cap):
        key = (shape.n_edges, shape.boundary_size)
        counts[key] = counts.get(key, 0) + 1
    poly = RationalPolynomial.zero()
    for (e, b), cnt in sorted(counts.items()):
        poly = poly + monomial_term(cnt, e, b)
    return poly


def factored_terms(patch: LatticePatch, n: int) -> list:
    """[(count, n_edges, boundary)] summary of P(|C(o)| = n)."""
    counts: dict = {}
    for shape in enumerate_clusters(patch, n):
        key = (shape.n_edges, shape.boundary_size)
        counts[key] = counts.get(key, 0) + 1
    return [(cnt, e, b) for (e, b), cnt in sorted(counts.items())]


# ---------------------------------------------------------------------------
# brute force oracle


def brute_force_event_probability(
    patch: LatticePatch,
    mode: str,
    event: Callable,
    p,
    cap: Optional[int] = None,
) -> Fraction:
    """Exact P(event) by summing over all 2^|items| configurations.

    `event` receives a frozenset of occupied items (edges in bond mode,
    vertices in site mode).  p must be rational for an exact result.
    """
    if mode not in ("bond", "site"):
        raise ValueError("bond or site mode only")
    items = patch.edge_order if mode == "bond" else patch.vertex_order
    m = len(items)
    cap = cap if cap is not None else work_cap()
    if 1 << m > cap:
        raise CapExceeded(f"2^{m} configurations exceed cap {cap}")
    p = Fraction(p)
    q = 1 - p
    pw_p = [p**k for k in range(m + 1)]
    pw_q = [q**k for k in range(m + 1)]
    total = Fraction(0)
    for mask in range(1 << m):
        k = mask.bit_count()
        occ = frozenset(items[i] for i in range(m) if mask >> i & 1)
        if event(occ):
            total += pw_p[k] * pw_q[m - k]
    return total


def brute_cluster_size(patch: LatticePatch, occupied_edges: frozenset) -> tuple:
    """(|C(o)|, touches_escape) for a bond configuration given as an edge set."""
    adj = patch.adjacency
    seen = {patch.origin}
    stack = [patch.origin]
    while stack:
        u = stack.pop()
        for w in adj[u]:
            if canon_edge(u, w) in occupied_edges and w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen), bool(seen & patch.escape)


# ---------------------------------------------------------------------------
# partitions


def count_partitions(n: int) -> list:
    """[p(0), ..., p(n)] by the standard bounded-part DP."""
    if n < 0:
        raise ValueError("n must be >= 0")
    table = [0] * (n + 1)
    table[0] = 1
    for part in range(1, n + 1):
        for total in range(part, n + 1):
            table[total] += table[total - part]
    return table


def partitions_pentagonal(n: int) -> list:
    """[p(0), ..., p(n)] via Euler's pentagonal number recurrence."""
    ps = [1]
    for m in range(1, n + 1):
        total = 0
        k = 1
        while True:
            g1 = k * (3 * k - 1) // 2
            g2 = k * (3 * k + 1) // 2
            if g1 > m and g2 > m:
                break
            sign = -1 if k % 2 == 0 else 1
            if g1 <= m:
                total += sign * ps[m - g1]
            if g2 <= m:
                total += sign * ps[m - g2]
            k += 1
        ps.append(total)
    return ps


def hardy_ramanujan_estimate(n: int) -> float:
    """p(n) ~ exp(pi sqrt(2n/3)) / (4 n sqrt(3))."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return math.exp(math.pi * math.sqrt(2.0 * n / 3.0)) / (4.0 * n * math.sqrt(3.0))


# ---------------------------------------------------------------------------
# tree animals


def count_tree_animals(d: int, n: int, method: str = "formula") -> int:
    """Number of n-vertex subtrees of the d-regular tree containing the root.

    formula: d ((d-1)n)! / ((n-1)! ((d-2)n + 2)!)
    brute:   explicit enumeration (slow; for cross-checks)
    """
    if d < 3:
        raise ValueError("d must be >= 3")
    if n < 1:
        raise ValueError("n must be >= 1")
    if method == "formula":
        if n == 1:
            return 1
        num = d * math.factorial((d - 1) * n)
        den = math.factorial(n - 1) * math.factorial((d - 2) * n + 2)
        assert num % den == 0
        return num // den
    if method == "brute":
        from .patches import build_tree_patch

        patch = build_tree_patch(d, n)  # depth n suffices for n-vertex subtrees
        count = 0
        for _ in _connected_vertex_sets(patch.adjacency, patch.origin, n):
            count += 1
        return count
    raise ValueError("method must be formula or brute")


def fit_animal_constant(d: int, n_max: int = 40) -> int:
    """Smallest integer c with S_n < c ((d-1) e)^n for all n <= n_max."""
    base = (d - 1) * math.e
    worst = max(count_tree_animals(d, n) / base**n for n in range(1, n_max + 1))
    return math.floor(worst) + 1
