"""GF(2) linear algebra on integer bitsets.

Vectors are plain Python ints; bit i is coordinate i.  Used to check that a
collection of cycles (as edge-incidence vectors) spans the cycle space of a
patch.
"""

from __future__ import annotations

from typing import Iterable, Sequence

__all__ = ["rank", "in_span", "edge_vector"]


def rank(vectors: Iterable[int]) -> int:
    """Rank over GF(2) of a collection of bitset vectors."""
    pivots: list[int] = []
    r = 0
    for v in vectors:
        for p in pivots:
            v = min(v, v ^ p)
        if v:
            pivots.append(v)
            pivots.sort(reverse=True)
            r += 1
    return r


def in_span(v: int, vectors: Sequence[int]) -> bool:
    """True if v lies in the GF(2) span of vectors."""
    return rank(list(vectors)) == rank(list(vectors) + [v])


def edge_vector(edges: Iterable, edge_index: dict) -> int:
    """Incidence bitset of an edge collection, given a canonical edge order."""
    v = 0
    for e in edges:
        v |= 1 << edge_index[e]
    return v
