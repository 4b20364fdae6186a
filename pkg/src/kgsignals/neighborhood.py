"""k-hop neighborhoods, occurrence distributions and clustering targets.

The k-hop neighborhood of an entity is the *ball* of entities within k
co-occurrence hops, excluding the center itself. Occurrence targets
normalize per-entity degrees inside the neighborhood subgraph (edges
among neighborhood entities and to the center); clustering targets count
the fraction of connected pairs inside the ball.

Degree semantics: occurrence defaults to multi-edge weighted degrees
(adjacency row sums where parallel relations count separately),
clustering defaults to simple deduplicated counts, which keeps the
coefficient in [0, 1]. Both are switchable per call.

Module-level functions are straightforward dictionary/BFS code;
:class:`NeighborhoodIndex` gives identical answers through cached
sparse matrices for bulk generation over every center.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .graph import Fact, KnowledgeGraph


class EmptyNeighborhoodError(Exception):
    """No entities within the requested hop radius; record is skipped upstream."""


@dataclass(frozen=True)
class Neighborhood:
    center: int
    hops: int
    entities: tuple[int, ...]  # ascending, center excluded


@dataclass(frozen=True)
class OccurrenceDistribution:
    entities: tuple[int, ...]
    probabilities: tuple[float, ...]


def khop_entities(g: KnowledgeGraph, e: int, k: int) -> Neighborhood:
    """All entities at hop distance 1..k from ``e``, ascending."""
    if k < 1:
        raise ValueError("k must be >= 1")
    g._check_entity(e)
    seen = {e}
    frontier = [e]
    for _ in range(k):
        nxt: list[int] = []
        for u in frontier:
            for v in g.neighbors(u):
                if v not in seen:
                    seen.add(v)
                    nxt.append(v)
        if not nxt:
            break
        frontier = nxt
    seen.discard(e)
    return Neighborhood(center=e, hops=k, entities=tuple(sorted(seen)))


def _pair_weights(fact: Fact) -> dict[tuple[int, int], int]:
    """Co-occurrence increments contributed by one fact.

    Each unordered position pair adds 1 to the (a, b) cell; a pair of
    positions holding the same entity adds 1 to its diagonal cell.
    """
    out: dict[tuple[int, int], int] = {}
    ents = fact.entities
    for i in range(len(ents)):
        for j in range(i + 1, len(ents)):
            a, b = ents[i], ents[j]
            key = (a, b) if a <= b else (b, a)
            out[key] = out.get(key, 0) + 1
    return out


def _subgraph_degrees(
    g: KnowledgeGraph, members: frozenset[int], targets: list[int], weighted: bool
) -> list[int]:
    """Degree of each target entity within the induced subgraph."""
    deg = {t: 0 for t in targets}
    simple: dict[int, set[int]] = {t: set() for t in targets}
    seen_facts: set[int] = set()
    for t in targets:
        for fi in g.facts_of_entity(t):
            if fi in seen_facts:
                continue
            seen_facts.add(fi)
            for (a, b), w in _pair_weights(g.facts[fi]).items():
                if a in members and b in members:
                    if weighted:
                        if a in deg:
                            deg[a] += w
                        if b in deg and b != a:
                            deg[b] += w
                    else:
                        if a in simple and b != a:
                            simple[a].add(b)
                        if b in simple and b != a:
                            simple[b].add(a)
    if weighted:
        return [deg[t] for t in targets]
    return [len(simple[t]) for t in targets]


def occurrence_distribution(
    g: KnowledgeGraph, e: int, k: int, weighted: bool = True
) -> OccurrenceDistribution:
    """Degree-normalized probability of each entity in the k-hop ball.

    Degrees are taken within the neighborhood subgraph (members plus the
    center); probabilities sum to 1.
    """
    nb = khop_entities(g, e, k)
    if not nb.entities:
        raise EmptyNeighborhoodError(f"entity {e} has no {k}-hop neighborhood")
    members = frozenset(nb.entities) | {e}
    degrees = _subgraph_degrees(g, members, list(nb.entities), weighted)
    total = sum(degrees)
    probs = tuple(d / total for d in degrees)
    return OccurrenceDistribution(entities=nb.entities, probabilities=probs)


def local_clustering_coefficient(
    g: KnowledgeGraph, e: int, k: int, weighted: bool = False
) -> float:
    """Fraction of connected pairs inside the k-hop ball of ``e``.

    Simple mode (default) divides by C(|ball|, 2), so the value stays in
    [0, 1]. Weighted mode divides by C(d, 2) with d the weighted
    adjacency row sum from the center into the ball, and may exceed 1
    with parallel edges.
    """
    nb = khop_entities(g, e, k)
    ents = nb.entities
    if weighted:
        d = 0
        for fi in g.facts_of_entity(e):
            for (a, b), w in _pair_weights(g.facts[fi]).items():
                if a == e and b in ents:
                    d += w
                elif b == e and a in ents:
                    d += w
    else:
        d = len(ents)
    if d < 2:
        return 0.0
    member_set = frozenset(ents)
    pairs = 0
    counted: set[tuple[int, int]] = set()
    for u in ents:
        for v in g.neighbors(u):
            if v in member_set and u < v and (u, v) not in counted:
                counted.add((u, v))
                pairs += 1
    return pairs / (d * (d - 1) / 2)


def _drop_diagonal(m: sp.spmatrix) -> sp.csr_matrix:
    m = m.tocoo()
    mask = m.row != m.col
    return sp.csr_matrix((m.data[mask], (m.row[mask], m.col[mask])), shape=m.shape)


class NeighborhoodIndex:
    """Sparse-matrix fast path for bulk per-center generation.

    Precomputes the weighted co-occurrence matrix (diagonal carries
    self-co-occurrence), the simple boolean adjacency and boolean
    reachability matrices for radii 1..max_hops. Answers are integer
    degree counts divided the same way as the pure functions, so results
    are bit-identical.
    """

    def __init__(self, g: KnowledgeGraph, max_hops: int):
        self.g = g
        self.max_hops = max_hops
        n = g.num_entities
        rows: list[int] = []
        cols: list[int] = []
        vals: list[int] = []
        for f in g.facts:
            for (a, b), w in _pair_weights(f).items():
                rows.append(a)
                cols.append(b)
                vals.append(w)
                if a != b:
                    rows.append(b)
                    cols.append(a)
                    vals.append(w)
        self.weighted = sp.csr_matrix(
            (np.asarray(vals, dtype=np.int64), (rows, cols)), shape=(n, n)
        )
        simple = _drop_diagonal(self.weighted)
        simple.data[:] = 1
        simple.sort_indices()
        self.simple = simple
        step = simple.astype(bool)
        reach = [step.copy()]
        for _ in range(max_hops - 1):
            nxt = _drop_diagonal(reach[-1] + reach[-1] @ step)
            reach.append(nxt)
        for m in reach:
            m.sort_indices()
        self._reach = reach

    def ball(self, e: int, k: int) -> np.ndarray:
        """Entity ids within hop distance 1..k of ``e``, ascending."""
        return self._reach[k - 1].indices[
            self._reach[k - 1].indptr[e] : self._reach[k - 1].indptr[e + 1]
        ].copy()

    def occurrence(self, e: int, k: int, weighted: bool = True) -> tuple[np.ndarray, np.ndarray]:
        ents = self.ball(e, k)
        if ents.size == 0:
            raise EmptyNeighborhoodError(f"entity {e} has no {k}-hop neighborhood")
        members = np.sort(np.append(ents, e))
        mat = self.weighted if weighted else self.simple
        sub = mat[ents][:, members]
        degrees = np.asarray(sub.sum(axis=1)).ravel()
        return ents, degrees / int(degrees.sum())

    def clustering(self, e: int, k: int, weighted: bool = False) -> float:
        ents = self.ball(e, k)
        if weighted:
            d = int(self.weighted[e, ents].sum())
        else:
            d = int(ents.size)
        if d < 2:
            return 0.0
        pairs = self.simple[ents][:, ents].nnz // 2
        return pairs / (d * (d - 1) / 2)
