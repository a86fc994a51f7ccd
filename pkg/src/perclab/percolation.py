"""Percolation configurations and Monte Carlo estimators.

Modes:
  bond      -- each patch edge open with probability p
  site      -- each vertex occupied with probability p (clusters are induced)
  longrange -- each pair xy of a finite weighted model is vacant with
               probability exp(-mu(xy) * t)

Configurations are deterministic functions of (structure, mode, parameter,
seed, sample_index); see rng.  Estimators label components with
scipy.sparse.csgraph, so large batches stay cheap.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from . import rng
from .patches import LatticePatch, canon_edge

__all__ = [
    "LongRangeModel",
    "Config",
    "Cluster",
    "Estimate",
    "sample_config",
    "cluster_of",
    "estimate_theta",
    "estimate_chi_truncated",
    "estimate_tau",
    "tail_probability",
]

MODES = ("bond", "site", "longrange")


@dataclass(eq=False)
class LongRangeModel:
    """Finite complete graph with nonnegative rational weights mu(xy)."""

    vertices: tuple
    mu: dict  # canonical pair -> Fraction >= 0
    origin: object

    def __post_init__(self) -> None:
        if self.origin not in self.vertices:
            raise ValueError("origin not a vertex")
        vs = set(self.vertices)
        clean = {}
        for pair, m in self.mu.items():
            u, v = pair
            if u not in vs or v not in vs or u == v:
                raise ValueError(f"bad pair {pair}")
            m = Fraction(m)
            if m < 0:
                raise ValueError("mu must be nonnegative")
            clean[canon_edge(u, v)] = m
        self.mu = clean

    def weight(self, u, v) -> Fraction:
        return self.mu.get(canon_edge(u, v), Fraction(0))

    @property
    def pairs(self) -> list:
        vs = sorted(self.vertices)
        return [canon_edge(vs[i], vs[j]) for i in range(len(vs)) for j in range(i + 1, len(vs))]

    @classmethod
    def uniform(cls, n: int, mu, origin=0) -> "LongRangeModel":
        verts = tuple(range(n))
        weights = {}
        for i in range(n):
            for j in range(i + 1, n):
                weights[(i, j)] = Fraction(mu)
        return cls(vertices=verts, mu=weights, origin=origin)

    @classmethod
    def path(cls, n: int, mu=1, origin=0) -> "LongRangeModel":
        """One-way path: weight mu on consecutive pairs, zero elsewhere."""
        verts = tuple(range(n))
        weights = {(i, i + 1): Fraction(mu) for i in range(n - 1)}
        return cls(vertices=verts, mu=weights, origin=origin)


@dataclass(eq=False)
class Config:
    """One sampled configuration, with its generating RunSpec."""

    structure: object  # LatticePatch or LongRangeModel
    mode: str
    parameter: float
    seed: int
    sample_index: int
    items: list  # canonical order of sampled items (edges or vertices)
    occupied: np.ndarray  # bool, aligned with items

    def __post_init__(self) -> None:
        self._index = None

    @property
    def index(self) -> dict:
        if self._index is None:
            self._index = {it: i for i, it in enumerate(self.items)}
        return self._index

    def is_occupied(self, item) -> bool:
        return bool(self.occupied[self.index[item]])

    def occupied_items(self) -> list:
        return [it for it, o in zip(self.items, self.occupied) if o]

    def to_json(self) -> str:
        return json.dumps(
            {
                "mode": self.mode,
                "parameter": self.parameter,
                "seed": self.seed,
                "sample_index": self.sample_index,
                "occupied": [int(x) for x in self.occupied],
            },
            sort_keys=True,
        )


def _model_edges(model: LongRangeModel) -> list:
    return model.pairs


def sample_config(structure, mode: str, parameter, seed: int, sample_index: int = 0) -> Config:
    """Sample one configuration; a pure function of its arguments."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if mode == "longrange":
        if not isinstance(structure, LongRangeModel):
            raise ValueError("longrange mode needs a LongRangeModel")
        t = float(parameter)
        if t < 0:
            raise ValueError("time parameter must be >= 0")
        items = _model_edges(structure)
        u = rng.uniforms(seed, sample_index, len(items))
        probs = np.array([1.0 - math.exp(-float(structure.mu.get(e, 0)) * t) for e in items])
        occ = u < probs
    else:
        if not isinstance(structure, LatticePatch):
            raise ValueError(f"{mode} mode needs a LatticePatch")
        p = float(parameter)
        if not 0.0 <= p <= 1.0:
            raise ValueError("p must lie in [0, 1]")
        items = structure.edge_order if mode == "bond" else structure.vertex_order
        u = rng.uniforms(seed, sample_index, len(items))
        occ = u < p
    return Config(
        structure=structure,
        mode=mode,
        parameter=float(parameter),
        seed=seed,
        sample_index=sample_index,
        items=list(items),
        occupied=occ,
    )


@dataclass(frozen=True)
class Cluster:
    """The cluster of a vertex: vertex set, edge set, and its edge boundary.

    boundary follows the convention 'every edge with at least one end in the
    cluster that is not a cluster edge', so it may contain edges with both
    ends in the cluster.  In bond mode all boundary edges are vacant.
    """

    vertices: frozenset
    edges: frozenset
    boundary: frozenset
    touches_escape: bool

    @property
    def size(self) -> int:
        return len(self.vertices)


def _structure_adjacency(config: Config):
    s = config.structure
    if isinstance(s, LatticePatch):
        return s.adjacency, s.escape
    adj = {v: [] for v in s.vertices}
    for u, v in s.pairs:
        adj[u].append(v)
        adj[v].append(u)
    return adj, frozenset()


def cluster_of(config: Config, v) -> Cluster:
    """BFS cluster of v in the configuration (empty in site mode if v vacant)."""
    adj, escape = _structure_adjacency(config)
    if v not in adj:
        raise ValueError("vertex not in structure")
    if config.mode == "site" and not config.is_occupied(v):
        return Cluster(frozenset(), frozenset(), frozenset(), False)
    seen = {v}
    queue = [v]
    edges = set()
    while queue:
        u = queue.pop()
        for w in adj[u]:
            e = canon_edge(u, w)
            if config.mode == "site":
                if config.is_occupied(w):
                    edges.add(e)
                    if w not in seen:
                        seen.add(w)
                        queue.append(w)
            else:
                if config.is_occupied(e):
                    edges.add(e)
                    if w not in seen:
                        seen.add(w)
                        queue.append(w)
    boundary = set()
    for u in seen:
        for w in adj[u]:
            e = canon_edge(u, w)
            if e not in edges:
                boundary.add(e)
    return Cluster(
        vertices=frozenset(seen),
        edges=frozenset(edges),
        boundary=frozenset(boundary),
        touches_escape=bool(seen & escape),
    )


@dataclass(frozen=True)
class Estimate:
    value: float
    std_error: float
    samples: int
    extras: dict = field(default_factory=dict)

    def to_json(self) -> str:
        obj = {
            "value": self.value,
            "std_error": self.std_error,
            "samples": self.samples,
        }
        obj.update(self.extras)
        return json.dumps(obj, sort_keys=True)


# ---------------------------------------------------------------------------
# batched component labelling


class _PatchArrays:
    """numpy view of a patch for batched component labelling."""

    def __init__(self, patch: LatticePatch):
        self.patch = patch
        vi = patch.vertex_index
        self.n = len(patch.vertex_order)
        self.eu = np.array([vi[u] for u, v in patch.edge_order], dtype=np.int32)
        self.ev = np.array([vi[v] for u, v in patch.edge_order], dtype=np.int32)
        self.escape_idx = np.array(sorted(vi[v] for v in patch.escape), dtype=np.int32)
        self.origin_idx = vi[patch.origin]
        self.point_idx = vi
        # trees admit a level-by-level reachability sweep from the root
        self.tree_levels = None
        if patch.kind == "tree":
            by_depth: dict = {}
            for k, (u, v) in enumerate(patch.edge_order):
                parent, child = (u, v) if len(u) < len(v) else (v, u)
                by_depth.setdefault(len(child), []).append((k, vi[parent], vi[child]))
            self.tree_levels = [
                tuple(np.array(col, dtype=np.int64) for col in zip(*by_depth[d]))
                for d in sorted(by_depth)
            ]


def _tree_reach(arr: "_PatchArrays", p: float, seed: int, i: int) -> np.ndarray:
    """Root-reachability vector on a tree patch (bond mode)."""
    occ = rng.uniforms(seed, i, len(arr.eu)) < p
    reach = np.zeros(arr.n, dtype=bool)
    reach[arr.origin_idx] = True
    for eid, pi, ci in arr.tree_levels:
        reach[ci] = reach[pi] & occ[eid]
    return reach


def _tree_batches(arr: "_PatchArrays", p: float, seed: int, samples: int, chunk: int = 128):
    """(escaped, cluster_size) arrays for tree patches, chunked over samples."""
    for lo in range(0, samples, chunk):
        hi = min(lo + chunk, samples)
        occ = rng.uniform_block(seed, lo, hi, len(arr.eu)) < p
        reach = np.zeros((hi - lo, arr.n), dtype=bool)
        reach[:, arr.origin_idx] = True
        for eid, pi, ci in arr.tree_levels:
            reach[:, ci] = reach[:, pi] & occ[:, eid]
        yield reach[:, arr.escape_idx].any(axis=1), reach.sum(axis=1)


def _mc_arrays(values_iter, samples: int) -> tuple:
    total = 0.0
    total_sq = 0.0
    for x in values_iter:
        total += float(x.sum())
        total_sq += float((x * x).sum())
    mean = total / samples
    var = max(total_sq / samples - mean * mean, 0.0)
    return mean, math.sqrt(var / samples)


_ARRAY_CACHE: dict = {}


def _arrays(patch: LatticePatch) -> _PatchArrays:
    key = id(patch)
    if key not in _ARRAY_CACHE:
        _ARRAY_CACHE.clear()  # keep at most one patch hot
        _ARRAY_CACHE[key] = _PatchArrays(patch)
    return _ARRAY_CACHE[key]


def _labels(arr: _PatchArrays, mode: str, p: float, seed: int, i: int):
    """Component labels for sample i; returns (labels, site_occupied or None)."""
    if mode == "bond":
        u = rng.uniforms(seed, i, len(arr.eu))
        occ = u < p
        site_occ = None
        eu, ev = arr.eu[occ], arr.ev[occ]
    else:
        u = rng.uniforms(seed, i, arr.n)
        site_occ = u < p
        both = site_occ[arr.eu] & site_occ[arr.ev]
        eu, ev = arr.eu[both], arr.ev[both]
    m = sparse.coo_matrix(
        (np.ones(len(eu), dtype=np.int8), (eu, ev)), shape=(arr.n, arr.n)
    )
    _, labels = connected_components(m, directed=False)
    return labels, site_occ


def _mc(indicator: Callable[[int], float], samples: int) -> tuple:
    total = 0.0
    total_sq = 0.0
    for i in range(samples):
        x = indicator(i)
        total += x
        total_sq += x * x
    mean = total / samples
    var = max(total_sq / samples - mean * mean, 0.0)
    se = math.sqrt(var / samples)
    return mean, se


def estimate_theta(patch: LatticePatch, mode: str, p: float, samples: int, seed: int) -> Estimate:
    """P(cluster of the origin touches escape)."""
    _check_sim_args(patch, mode, p, samples)
    arr = _arrays(patch)

    if arr.tree_levels is not None and mode == "bond":
        mean, se = _mc_arrays(
            (esc.astype(np.float64) for esc, _ in _tree_batches(arr, p, seed, samples)),
            samples,
        )
        return Estimate(mean, se, samples)
    else:
        def ind(i: int) -> float:
            labels, site_occ = _labels(arr, mode, p, seed, i)
            if site_occ is not None and not site_occ[arr.origin_idx]:
                return 0.0
            lab = labels[arr.origin_idx]
            esc = labels[arr.escape_idx] == lab
            if site_occ is not None:
                esc &= site_occ[arr.escape_idx]
            return 1.0 if esc.any() else 0.0

    mean, se = _mc(ind, samples)
    return Estimate(mean, se, samples)


def estimate_chi_truncated(
    patch: LatticePatch, mode: str, p: float, samples: int, seed: int
) -> Estimate:
    """Mean |C(o)| over samples; clusters touching escape contribute 0.

    The fraction of escape-touching samples is reported in extras.
    """
    _check_sim_args(patch, mode, p, samples)
    arr = _arrays(patch)
    escapes = 0

    if arr.tree_levels is not None and mode == "bond":
        def values():
            nonlocal escapes
            for esc, sizes in _tree_batches(arr, p, seed, samples):
                escapes += int(esc.sum())
                yield np.where(esc, 0.0, sizes.astype(np.float64))

        mean, se = _mc_arrays(values(), samples)
        return Estimate(mean, se, samples, extras={"escape_fraction": escapes / samples})

    def ind(i: int) -> float:
        nonlocal escapes
        labels, site_occ = _labels(arr, mode, p, seed, i)
        if site_occ is not None and not site_occ[arr.origin_idx]:
            return 0.0
        lab = labels[arr.origin_idx]
        esc = labels[arr.escape_idx] == lab
        if site_occ is not None:
            esc &= site_occ[arr.escape_idx]
        if esc.any():
            escapes += 1
            return 0.0
        in_cluster = labels == lab
        if site_occ is not None:
            in_cluster &= site_occ
        return float(in_cluster.sum())

    mean, se = _mc(ind, samples)
    return Estimate(mean, se, samples, extras={"escape_fraction": escapes / samples})


def estimate_tau(
    patch: LatticePatch, mode: str, p: float, points: Sequence, samples: int, seed: int
) -> Estimate:
    """P(all points in one cluster); extras carry the finite-cluster variant."""
    _check_sim_args(patch, mode, p, samples)
    arr = _arrays(patch)
    idxs = np.array([arr.point_idx[pt] for pt in points], dtype=np.int32)
    finite_hits = 0

    def ind(i: int) -> float:
        nonlocal finite_hits
        labels, site_occ = _labels(arr, mode, p, seed, i)
        if site_occ is not None and not site_occ[idxs].all():
            return 0.0
        labs = labels[idxs]
        if not (labs == labs[0]).all():
            return 0.0
        esc = labels[arr.escape_idx] == labs[0]
        if site_occ is not None:
            esc &= site_occ[arr.escape_idx]
        if not esc.any():
            finite_hits += 1
        return 1.0

    mean, se = _mc(ind, samples)
    return Estimate(mean, se, samples, extras={"tau_finite": finite_hits / samples})


def tail_probability(
    patch: LatticePatch, mode: str, p: float, m: int, samples: int, seed: int
) -> Estimate:
    """P(|C(o)| >= m); escape-touching clusters count as infinite (>= m)."""
    _check_sim_args(patch, mode, p, samples)
    if m < 1:
        raise ValueError("m must be >= 1")
    arr = _arrays(patch)

    if arr.tree_levels is not None and mode == "bond":
        mean, se = _mc_arrays(
            (
                (esc | (sizes >= m)).astype(np.float64)
                for esc, sizes in _tree_batches(arr, p, seed, samples)
            ),
            samples,
        )
        return Estimate(mean, se, samples)

    def ind(i: int) -> float:
        labels, site_occ = _labels(arr, mode, p, seed, i)
        if site_occ is not None and not site_occ[arr.origin_idx]:
            return 0.0
        lab = labels[arr.origin_idx]
        esc = labels[arr.escape_idx] == lab
        if site_occ is not None:
            esc &= site_occ[arr.escape_idx]
        if esc.any():
            return 1.0
        in_cluster = labels == lab
        if site_occ is not None:
            in_cluster &= site_occ
        return 1.0 if int(in_cluster.sum()) >= m else 0.0

    mean, se = _mc(ind, samples)
    return Estimate(mean, se, samples)


def _check_sim_args(patch, mode, p, samples):
    if mode not in ("bond", "site"):
        raise ValueError("estimators support bond and site modes")
    if not isinstance(patch, LatticePatch):
        raise ValueError("patch required")
    if not 0.0 <= float(p) <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    if samples < 1:
        raise ValueError("samples must be >= 1")
