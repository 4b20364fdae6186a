"""Relation-less adjacency matrices and the matrix-equivalence task.

A matrix cell counts (relation, tuple) co-occurrences of two entities
summed over all relations; the diagonal counts self-co-occurrence (the
same entity in two positions of one tuple). Positives pair a matrix with
a simultaneous row+column permutation of itself; negatives corrupt it by
a column-only swap (re-symmetrized from the corrupted upper triangle) or
by resampling values, and are verified to not be permutation-equivalent
for small matrices.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass

import numpy as np

from .graph import KnowledgeGraph
from .neighborhood import _pair_weights, khop_entities


class SkipExample(Exception):
    """Degenerate neighborhood; no example can be built for this center."""


@dataclass(frozen=True)
class AdjacencyMatrix:
    entities: tuple[int, ...]
    values: np.ndarray  # symmetric, nonnegative ints

    def __post_init__(self) -> None:
        n = len(self.entities)
        if self.values.shape != (n, n):
            raise ValueError("matrix shape does not match entity list")


@dataclass(frozen=True)
class IvaExample:
    left: AdjacencyMatrix
    right: AdjacencyMatrix
    label: int
    mode: str  # "permute" | "column_swap" | "value_resample"


def relationless_adjacency(g: KnowledgeGraph, entities: list[int]) -> AdjacencyMatrix:
    """Co-occurrence count matrix restricted to the given entity list."""
    if len(set(entities)) != len(entities):
        raise ValueError("duplicate entities in adjacency entity list")
    for e in entities:
        g._check_entity(e)
    pos = {e: i for i, e in enumerate(entities)}
    n = len(entities)
    values = np.zeros((n, n), dtype=np.int64)
    seen: set[int] = set()
    for e in entities:
        for fi in g.facts_of_entity(e):
            if fi in seen:
                continue
            seen.add(fi)
            for (a, b), w in _pair_weights(g.facts[fi]).items():
                ia, ib = pos.get(a), pos.get(b)
                if ia is None or ib is None:
                    continue
                values[ia, ib] += w
                if ia != ib:
                    values[ib, ia] += w
    return AdjacencyMatrix(entities=tuple(entities), values=values)


def flatten_adjacency(a: AdjacencyMatrix) -> list[object]:
    """Entity ids in column order, then the upper triangle row-major.

    The diagonal is included, so the length is n + n(n+1)/2 and the
    matrix is recoverable given n.
    """
    n = len(a.entities)
    seq: list[object] = list(a.entities)
    for i in range(n):
        seq.extend(int(v) for v in a.values[i, i:])
    return seq


def unflatten_adjacency(seq: list[object], n: int) -> AdjacencyMatrix:
    """Inverse of :func:`flatten_adjacency` for an n-entity matrix."""
    if len(seq) != n + n * (n + 1) // 2:
        raise ValueError("flattened sequence has wrong length")
    entities = tuple(int(x) for x in seq[:n])
    values = np.zeros((n, n), dtype=np.int64)
    it = iter(seq[n:])
    for i in range(n):
        for j in range(i, n):
            v = int(next(it))
            values[i, j] = v
            values[j, i] = v
    return AdjacencyMatrix(entities=entities, values=values)


def permutation_equivalent(a: np.ndarray, b: np.ndarray) -> bool:
    """Exhaustively test whether some simultaneous row+column permutation
    of ``a`` equals ``b``. Only intended for small matrices."""
    n = a.shape[0]
    if b.shape != a.shape:
        return False
    for perm in itertools.permutations(range(n)):
        p = list(perm)
        if np.array_equal(a[np.ix_(p, p)], b):
            return True
    return False


def _upper_cells(n: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(n) for j in range(i, n)]


def make_iva_example(
    g: KnowledgeGraph,
    center: int,
    k: int,
    rng: random.Random,
    negative: bool,
    size_cap: int = 30,
    corruption_rate: float = 0.10,
    verify_limit: int = 8,
) -> IvaExample:
    """Build one matrix-equivalence example around ``center``.

    The matrix covers the k-hop ball plus the center, uniformly
    subsampled to ``size_cap`` entities. Positives apply a uniform random
    permutation to rows, columns and entity labels. Negatives pick a
    corruption mode uniformly: a column-only swap (with the result read
    back symmetrically from its upper triangle) or resampling
    ~corruption_rate of the upper-triangle cells to different observed
    values. Negatives on matrices up to ``verify_limit``
    entities are checked against every permutation of the original.
    """
    nb = khop_entities(g, center, k)
    if not nb.entities:
        raise SkipExample(f"entity {center} has an empty {k}-hop neighborhood")
    members = sorted(set(nb.entities) | {center})
    if len(members) > size_cap:
        sampled = rng.sample([e for e in members if e != center], size_cap - 1)
        members = sorted(sampled + [center])
    left = relationless_adjacency(g, members)
    n = len(members)

    if not negative:
        perm = list(range(n))
        rng.shuffle(perm)
        values = left.values[np.ix_(perm, perm)]
        entities = tuple(left.entities[i] for i in perm)
        right = AdjacencyMatrix(entities=entities, values=values)
        # a relabeled permutation must preserve the degree sequence
        assert sorted(values.sum(axis=1)) == sorted(left.values.sum(axis=1))
        return IvaExample(left=left, right=right, label=1, mode="permute")

    mode = rng.choice(["column_swap", "value_resample"]) if n >= 2 else "value_resample"
    for _ in range(32):
        if mode == "column_swap":
            i, j = rng.sample(range(n), 2)
            values = left.values.copy()
            values[:, [i, j]] = values[:, [j, i]]
            # keep the stored matrix symmetric (it is read back from its
            # upper triangle): mirror the corrupted upper half down
            values = np.triu(values) + np.triu(values, 1).T
        else:
            values = _resample_values(left.values, rng, corruption_rate)
        if np.array_equal(values, left.values):
            continue
        if n <= verify_limit and permutation_equivalent(left.values, values):
            mode = "value_resample"
            continue
        return IvaExample(
            left=left,
            right=AdjacencyMatrix(entities=left.entities, values=values),
            label=0,
            mode=mode,
        )
    # fallback: push one cell outside the observed value multiset, which
    # no permutation can reproduce
    values = left.values.copy()
    bump = int(values.max()) + 1 + int(values[0, 0])
    values[0, 0] = bump
    return IvaExample(
        left=left,
        right=AdjacencyMatrix(entities=left.entities, values=values),
        label=0,
        mode="value_resample",
    )


def _resample_values(values: np.ndarray, rng: random.Random, rate: float) -> np.ndarray:
    n = values.shape[0]
    cells = _upper_cells(n)
    count = max(1, math.ceil(rate * len(cells)))
    chosen = rng.sample(cells, min(count, len(cells)))
    observed = [int(values[i, j]) for i, j in cells]
    out = values.copy()
    for i, j in chosen:
        cur = int(out[i, j])
        pool = [v for v in observed if v != cur]
        new = rng.choice(pool) if pool else cur + 1
        out[i, j] = new
        out[j, i] = new
    return out
