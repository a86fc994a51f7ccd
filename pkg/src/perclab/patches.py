"""Finite patches of infinite lattices and Cayley graphs.

A patch is a finite graph with a marked origin and a set of escape vertices
(the outermost shell).  "The cluster of the origin is infinite" is proxied by
"the cluster touches an escape vertex".

Planar patches carry an explicit straight-line embedding (``coords``); faces
are traced from the induced rotation system.  Cayley patches are built from a
finite presentation via Knuth-Bendix completion of the rewriting system, so
vertices are shortlex normal forms; the relator-cycle translates that fit in
the patch are attached as a cycle basis.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .gf2 import edge_vector, rank

__all__ = [
    "LatticePatch",
    "DualPatch",
    "Presentation",
    "build_square_patch",
    "build_triangular_patch",
    "build_tree_patch",
    "build_path_patch",
    "build_cayley_patch",
    "dual_patch",
    "axis_of",
    "canon_edge",
    "trace_faces",
    "StructuralError",
]


class StructuralError(ValueError):
    """A patch failed an internal consistency check."""


def canon_edge(u, v):
    """Canonical (sorted) representation of an undirected edge."""
    return (u, v) if u <= v else (v, u)


# ---------------------------------------------------------------------------
# patch


@dataclass(eq=False)
class LatticePatch:
    """Finite patch with origin, escape shell, and optional geometry.

    Immutable by convention: no method mutates the defining fields.  Derived
    structures (adjacency, edge order, distances) are cached lazily.
    """

    kind: str  # square | triangular | tree | cayley | path
    vertices: frozenset
    edges: frozenset  # canonical (u, v) tuples, u <= v
    origin: object
    escape: frozenset
    coords: Optional[dict] = None  # vertex -> (x, y) straight-line embedding
    basis: tuple = ()  # cycle basis: tuples of vertices (closed walks)
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.origin not in self.vertices:
            raise StructuralError("origin not a vertex")
        if not self.escape <= self.vertices:
            raise StructuralError("escape vertices not a subset of vertices")
        for u, v in self.edges:
            if u not in self.vertices or v not in self.vertices:
                raise StructuralError("edge endpoint outside patch")
        self._adj: Optional[dict] = None
        self._edge_order: Optional[list] = None
        self._edge_index: Optional[dict] = None
        self._vertex_order: Optional[list] = None
        self._vertex_index: Optional[dict] = None
        self._dist_escape: Optional[dict] = None
        self._rotation: Optional[dict] = None

    # -- derived structure -------------------------------------------------

    @property
    def adjacency(self) -> dict:
        if self._adj is None:
            adj = {v: [] for v in self.vertices}
            for u, v in sorted(self.edges):
                adj[u].append(v)
                adj[v].append(u)
            self._adj = adj
        return self._adj

    def neighbors(self, v) -> list:
        return self.adjacency[v]

    def degree(self, v) -> int:
        return len(self.adjacency[v])

    @property
    def edge_order(self) -> list:
        """Canonical (sorted) edge list; index = position in sampling streams."""
        if self._edge_order is None:
            self._edge_order = sorted(self.edges)
        return self._edge_order

    @property
    def edge_index(self) -> dict:
        if self._edge_index is None:
            self._edge_index = {e: i for i, e in enumerate(self.edge_order)}
        return self._edge_index

    @property
    def vertex_order(self) -> list:
        if self._vertex_order is None:
            self._vertex_order = sorted(self.vertices)
        return self._vertex_order

    @property
    def vertex_index(self) -> dict:
        if self._vertex_index is None:
            self._vertex_index = {v: i for i, v in enumerate(self.vertex_order)}
        return self._vertex_index

    @property
    def distance_to_escape(self) -> dict:
        """Graph distance from each vertex to the escape shell (BFS, cached)."""
        if self._dist_escape is None:
            dist = {v: 0 for v in self.escape}
            frontier = list(self.escape)
            while frontier:
                nxt = []
                for v in frontier:
                    for w in self.adjacency[v]:
                        if w not in dist:
                            dist[w] = dist[v] + 1
                            nxt.append(w)
                frontier = nxt
            self._dist_escape = dist
        return self._dist_escape

    @property
    def rotation(self) -> dict:
        """Rotation system: neighbours of each vertex in ccw angular order."""
        if self._rotation is None:
            if self.coords is None:
                raise StructuralError(f"{self.kind} patch has no planar embedding")
            self._rotation = {
                v: sorted(self.adjacency[v], key=lambda w: _angle(self.coords, v, w))
                for v in self.vertices
            }
        return self._rotation

    # -- serialization -----------------------------------------------------

    def to_json(self) -> str:
        obj = {
            "kind": self.kind,
            "origin": _key(self.origin),
            "vertices": [_key(v) for v in self.vertex_order],
            "escape": sorted(_key(v) for v in self.escape),
            "adjacency": {
                _key(v): [_key(w) for w in self.adjacency[v]] for v in self.vertex_order
            },
            "meta": self.meta,
        }
        return json.dumps(obj, sort_keys=True)


def _key(v) -> str:
    return json.dumps(v) if not isinstance(v, str) else v


def _angle(coords: dict, v, w) -> float:
    vx, vy = coords[v]
    wx, wy = coords[w]
    return math.atan2(wy - vy, wx - vx) % (2 * math.pi)


# ---------------------------------------------------------------------------
# builders


def build_square_patch(radius: int) -> LatticePatch:
    """Box [-r, r]^2 of Z^2; escape = the perimeter shell."""
    if radius < 1:
        raise ValueError("radius must be >= 1")
    r = radius
    vertices = {(x, y) for x in range(-r, r + 1) for y in range(-r, r + 1)}
    edges = set()
    for x, y in vertices:
        for dx, dy in ((1, 0), (0, 1)):
            w = (x + dx, y + dy)
            if w in vertices:
                edges.add(canon_edge((x, y), w))
    escape = frozenset(v for v in vertices if max(abs(v[0]), abs(v[1])) == r)
    basis = []
    for x in range(-r, r):
        for y in range(-r, r):
            basis.append(((x, y), (x + 1, y), (x + 1, y + 1), (x, y + 1)))
    return LatticePatch(
        kind="square",
        vertices=frozenset(vertices),
        edges=frozenset(edges),
        origin=(0, 0),
        escape=escape,
        coords={v: (float(v[0]), float(v[1])) for v in vertices},
        basis=tuple(basis),
        meta={"radius": radius},
    )


_TRI_DIRS = ((1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1))


def build_triangular_patch(radius: int) -> LatticePatch:
    """Ball of the triangular lattice in axial coordinates; 1 + 3r(r+1) vertices."""
    if radius < 1:
        raise ValueError("radius must be >= 1")

    def dist(v):
        x, y = v
        return (abs(x) + abs(y) + abs(x + y)) // 2

    r = radius
    vertices = {
        (x, y)
        for x in range(-r, r + 1)
        for y in range(-r, r + 1)
        if dist((x, y)) <= r
    }
    edges = set()
    for v in vertices:
        for dx, dy in _TRI_DIRS:
            w = (v[0] + dx, v[1] + dy)
            if w in vertices:
                edges.add(canon_edge(v, w))
    coords = {
        (x, y): (x + 0.5 * y, y * math.sqrt(3) / 2.0) for (x, y) in vertices
    }
    escape = frozenset(v for v in vertices if dist(v) == r)
    return LatticePatch(
        kind="triangular",
        vertices=frozenset(vertices),
        edges=frozenset(edges),
        origin=(0, 0),
        escape=escape,
        coords=coords,
        meta={"radius": radius},
    )


def build_tree_patch(d: int, depth: int) -> LatticePatch:
    """d-regular tree to the given depth; root has d children, leaves escape.

    Vertices are child-index tuples; the root is ().
    """
    if d < 3:
        raise ValueError("tree degree must be >= 3")
    if depth < 1:
        raise ValueError("depth must be >= 1")
    vertices = {()}
    frontier = [()]
    for level in range(depth):
        nxt = []
        for v in frontier:
            width = d if v == () else d - 1
            for i in range(width):
                nxt.append(v + (i,))
        vertices.update(nxt)
        frontier = nxt
    edges = {canon_edge(v, v[:-1]) for v in vertices if v != ()}
    escape = frozenset(v for v in vertices if len(v) == depth)
    return LatticePatch(
        kind="tree",
        vertices=frozenset(vertices),
        edges=frozenset(edges),
        origin=(),
        escape=escape,
        meta={"d": d, "depth": depth},
    )


def build_path_patch(length: int) -> LatticePatch:
    """One-way path 0 -- 1 -- ... -- length; escape = far endpoint."""
    if length < 1:
        raise ValueError("length must be >= 1")
    vertices = frozenset(range(length + 1))
    edges = frozenset((i, i + 1) for i in range(length))
    return LatticePatch(
        kind="path",
        vertices=vertices,
        edges=edges,
        origin=0,
        escape=frozenset({length}),
        meta={"length": length},
    )


# ---------------------------------------------------------------------------
# presentations and Knuth-Bendix rewriting


@dataclass(frozen=True)
class Presentation:
    """Finite group presentation.

    Generators are lowercase letters a, b, c, ...; the uppercase letter is the
    inverse.  Relators are words equal to the identity, e.g. "abAB" for the
    commutator [a, b].
    """

    generators: int
    relators: tuple

    def __post_init__(self) -> None:
        if not 1 <= self.generators <= 26:
            raise ValueError("generator count must be in 1..26")
        letters = self.letters
        for w in self.relators:
            if not w:
                raise ValueError("empty relator")
            if any(c not in letters for c in w):
                raise ValueError(f"relator {w!r} uses unknown letters")
            for i in range(len(w) - 1):
                if w[i] == _invert_letter(w[i + 1]):
                    raise ValueError(f"relator {w!r} is not freely reduced")

    @property
    def letters(self) -> str:
        # generator immediately followed by its inverse: the shortlex order
        # a < A < b < B < ... is the one under which completion terminates
        # for the free-abelian presentations used here
        gens = "abcdefghijklmnopqrstuvwxyz"[: self.generators]
        return "".join(c + c.upper() for c in gens)

    @property
    def max_relator_length(self) -> int:
        return max((len(w) for w in self.relators), default=0)

    @classmethod
    def from_json(cls, text: str) -> "Presentation":
        obj = json.loads(text)
        return cls(generators=int(obj["generators"]), relators=tuple(obj["relators"]))

    def to_json(self) -> str:
        return json.dumps(
            {"generators": self.generators, "relators": list(self.relators)},
            sort_keys=True,
        )


def _invert_letter(c: str) -> str:
    return c.lower() if c.isupper() else c.upper()


def _invert_word(w: str) -> str:
    return "".join(_invert_letter(c) for c in reversed(w))


def _shortlex_key(word: str, letters: str):
    return (len(word), tuple(letters.index(c) for c in word))


class RewritingSystem:
    """Shortlex Knuth-Bendix completion for a group presentation.

    Raises StructuralError if completion does not terminate within the caps;
    the presentations used here (free and free-abelian style) complete in a
    handful of rounds.
    """

    def __init__(self, pres: Presentation, max_rules: int = 500, max_equations: int = 50000):
        self.letters = pres.letters
        self.rules: list[tuple[str, str]] = []
        from collections import deque

        queue: deque = deque()
        for c in self.letters:
            queue.append((c + _invert_letter(c), ""))
        for w in pres.relators:
            queue.append((w, ""))
        processed = 0
        while queue:
            processed += 1
            if processed > max_equations or len(self.rules) > max_rules:
                raise StructuralError("Knuth-Bendix completion did not converge")
            u, v = queue.popleft()
            u, v = self.reduce(u), self.reduce(v)
            if u == v:
                continue
            if _shortlex_key(u, self.letters) < _shortlex_key(v, self.letters):
                u, v = v, u
            # interreduce: rules whose lhs the new rule rewrites go back in the queue
            keep = []
            for l2, r2 in self.rules:
                if u in l2:
                    queue.append((l2, r2))
                else:
                    keep.append((l2, r2))
            keep.append((u, v))
            self.rules = keep
            for pair in self._critical_pairs((u, v)):
                queue.append(pair)

    def reduce(self, word: str) -> str:
        changed = True
        while changed:
            changed = False
            for lhs, rhs in self.rules:
                i = word.find(lhs)
                if i >= 0:
                    word = word[:i] + rhs + word[i + len(lhs) :]
                    changed = True
        return word

    def _critical_pairs(self, new: tuple) -> list:
        pairs = []
        for other in list(self.rules):
            for (l1, r1), (l2, r2) in ((new, other), (other, new)):
                # overlap: proper suffix of l1 equals proper prefix of l2
                for k in range(1, min(len(l1), len(l2))):
                    if l1[-k:] == l2[:k]:
                        a = r1 + l2[k:]
                        b = l1[: len(l1) - k] + r2
                        pairs.append((a, b))
                # containment: l2 inside l1
                if l2 in l1 and l1 != l2:
                    i = l1.find(l2)
                    a = r1
                    b = l1[:i] + r2 + l1[i + len(l2) :]
                    pairs.append((a, b))
        return pairs


def build_cayley_patch(pres: Presentation, radius: int) -> LatticePatch:
    """Word-metric ball of radius r in the Cayley graph of a presentation.

    Vertices are shortlex normal forms; relator-cycle translates that stay in
    the ball are attached as the cycle basis and their GF(2) rank is checked
    against the cycle space of the ball.
    """
    if radius < 1:
        raise ValueError("radius must be >= 1")
    rs = RewritingSystem(pres)
    letters = pres.letters
    dist = {"": 0}
    order = [""]
    for w in order:
        if dist[w] == radius:
            continue
        for c in letters:
            nf = rs.reduce(w + c)
            if nf not in dist:
                dist[nf] = dist[w] + 1
                order.append(nf)
    vertices = frozenset(order)
    edges = set()
    for w in vertices:
        for c in letters:
            nf = rs.reduce(w + c)
            if nf in vertices and nf != w:
                edges.add(canon_edge(w, nf))
    escape = frozenset(w for w in vertices if dist[w] == radius)

    basis = []
    seen = set()
    for w in sorted(vertices):
        for rel in pres.relators:
            walk = [w]
            cur = w
            ok = True
            for c in rel:
                cur = rs.reduce(cur + c)
                if cur not in vertices:
                    ok = False
                    break
                walk.append(cur)
            if not ok or walk[-1] != w or len(set(walk[:-1])) != len(walk) - 1:
                continue
            cyc = tuple(walk[:-1])
            key = frozenset(canon_edge(cyc[i], cyc[(i + 1) % len(cyc)]) for i in range(len(cyc)))
            if key in seen or len(key) < 3:
                continue
            seen.add(key)
            basis.append(cyc)

    patch = LatticePatch(
        kind="cayley",
        vertices=vertices,
        edges=frozenset(edges),
        origin="",
        escape=escape,
        basis=tuple(basis),
        meta={
            "radius": radius,
            "presentation": {"generators": pres.generators, "relators": list(pres.relators)},
            "max_relator_length": pres.max_relator_length,
        },
    )
    _check_cycle_rank(patch)
    return patch


def _check_cycle_rank(patch: LatticePatch) -> None:
    idx = patch.edge_index
    vecs = []
    for cyc in patch.basis:
        es = [canon_edge(cyc[i], cyc[(i + 1) % len(cyc)]) for i in range(len(cyc))]
        vecs.append(edge_vector(es, idx))
    expected = len(patch.edges) - len(patch.vertices) + 1
    got = rank(vecs)
    if got != expected:
        raise StructuralError(
            f"relator cycles span rank {got}, cycle space has rank {expected}"
        )


# ---------------------------------------------------------------------------
# faces and duals


def trace_faces(vertices: Iterable, adjacency: dict, coords: dict) -> list:
    """All face walks of a plane graph, from its rotation system.

    Each face is a list of directed edges (u, v); the outer face is the unique
    walk with negative signed area (a forest yields a single zero-area walk).
    """
    rotation = {
        v: sorted(adjacency[v], key=lambda w: _angle(coords, v, w)) for v in vertices
    }
    faces = []
    seen = set()
    for v in sorted(vertices):
        for w in rotation[v]:
            if (v, w) in seen:
                continue
            walk = []
            cur = (v, w)
            while cur not in seen:
                seen.add(cur)
                walk.append(cur)
                a, b = cur
                rot = rotation[b]
                cur = (b, rot[(rot.index(a) + 1) % len(rot)])
            faces.append(walk)
    return faces


def face_signed_area(walk: Sequence, coords: dict) -> float:
    s = 0.0
    for u, v in walk:
        ux, uy = coords[u]
        vx, vy = coords[v]
        s += ux * vy - vx * uy
    return s / 2.0


def outer_face_index(faces: Sequence, coords: dict) -> int:
    areas = [face_signed_area(f, coords) for f in faces]
    return min(range(len(faces)), key=lambda i: areas[i])


@dataclass(eq=False)
class DualPatch:
    """Dual of a planar patch: one vertex per face, one edge per base edge."""

    base: LatticePatch
    faces: list  # face walks (lists of directed edges)
    outer_face: int
    edge_to_dual: dict  # base edge -> (face index, face index)

    @property
    def vertices(self) -> range:
        return range(len(self.faces))

    def dual_edge(self, e) -> tuple:
        return self.edge_to_dual[e]

    def base_edge(self, i: int, j: int) -> list:
        return [e for e, fs in self.edge_to_dual.items() if set(fs) == {i, j}]

    def adjacency(self) -> dict:
        adj: dict = {i: set() for i in self.vertices}
        for f1, f2 in self.edge_to_dual.values():
            if f1 != f2:
                adj[f1].add(f2)
                adj[f2].add(f1)
        return adj


def dual_patch(patch: LatticePatch) -> DualPatch:
    """Dual graph of a planar patch via face tracing; e <-> e* is a bijection."""
    faces = trace_faces(patch.vertices, patch.adjacency, patch.coords)
    outer = outer_face_index(faces, patch.coords)
    edge_faces: dict = {}
    for i, walk in enumerate(faces):
        for u, v in walk:
            edge_faces.setdefault(canon_edge(u, v), []).append(i)
    edge_to_dual = {}
    for e, fs in edge_faces.items():
        if len(fs) != 2:
            raise StructuralError(f"edge {e} bounds {len(fs)} face sides")
        edge_to_dual[e] = (fs[0], fs[1])
    if len(edge_to_dual) != len(patch.edges):
        raise StructuralError("dual edge bijection is not onto")
    return DualPatch(base=patch, faces=faces, outer_face=outer, edge_to_dual=edge_to_dual)


# ---------------------------------------------------------------------------
# axes


def axis_of(patch: LatticePatch) -> list:
    """A geodesic from the origin to the escape shell (the marked axis)."""
    if patch.kind == "square":
        r = patch.meta["radius"]
        return [(i, 0) for i in range(r + 1)]
    if patch.kind == "triangular":
        r = patch.meta["radius"]
        return [(i, 0) for i in range(r + 1)]
    if patch.kind == "tree":
        depth = patch.meta["depth"]
        return [tuple([0] * i) for i in range(depth + 1)]
    if patch.kind == "path":
        return list(range(patch.meta["length"] + 1))
    if patch.kind == "cayley":
        # greedy shortlex geodesic along the first generator
        r = patch.meta["radius"]
        axis = [""]
        for i in range(r):
            axis.append(axis[-1] + "a")
        return [a for a in axis if a in patch.vertices]
    raise ValueError(f"unknown patch kind {patch.kind!r}")
