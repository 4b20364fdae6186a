"""Immutable incidence index over knowledge (hyper)graph tuples.

Entities and relations are dense 0-based integer ids assigned at ingest.
A fact is a relation applied to an ordered list of two or more entities;
arity-2 facts are ordinary knowledge-graph triples in the form r(h, t).
"""

from __future__ import annotations

from dataclasses import dataclass


class GraphError(Exception):
    """Base class for graph construction and lookup failures."""


class MalformedTupleError(GraphError):
    """A fact violates the arity >= 2 requirement."""


class UnknownIdError(GraphError):
    """An entity or relation id is outside the vocabulary bounds."""


@dataclass(frozen=True)
class Fact:
    """One ground tuple r(e_1, ..., e_n). Positions are significant."""

    relation: int
    entities: tuple[int, ...]

    @property
    def arity(self) -> int:
        return len(self.entities)


@dataclass(frozen=True)
class Query:
    """A fact with one entity position masked out for prediction.

    ``entities`` keeps the ground-truth entity in the masked slot so that
    downstream path grounding can pair it with the other endpoints.
    """

    relation: int
    entities: tuple[int, ...]
    masked_index: int
    split: str = "train"

    def __post_init__(self) -> None:
        if not 0 <= self.masked_index < len(self.entities):
            raise ValueError(f"masked_index {self.masked_index} out of range")

    @property
    def answer(self) -> int:
        return self.entities[self.masked_index]


class KnowledgeGraph:
    """Read-only incidence index; build via :func:`build_index`.

    Safe for concurrent readers: all indexes are materialized at build
    time and never mutated afterwards (incident-relation sets are cached
    lazily but the computation is idempotent).
    """

    def __init__(
        self,
        facts: tuple[Fact, ...],
        num_entities: int,
        num_relations: int,
        facts_of_entity: tuple[tuple[int, ...], ...],
        facts_of_relation: tuple[tuple[int, ...], ...],
        entities_of_relation: tuple[frozenset[int], ...],
        relations_of_entity: tuple[frozenset[int], ...],
    ):
        self.facts = facts
        self.num_entities = num_entities
        self.num_relations = num_relations
        self._facts_of_entity = facts_of_entity
        self._facts_of_relation = facts_of_relation
        self._entities_of_relation = entities_of_relation
        self._relations_of_entity = relations_of_entity
        self._fact_entity_sets = tuple(frozenset(f.entities) for f in facts)
        self._incident_cache: dict[int, frozenset[int]] = {}
        self._neighbor_cache: dict[int, frozenset[int]] = {}
        self._cooccurrence: tuple[dict[int, int], ...] | None = None

    # -- id validation -------------------------------------------------

    def _check_entity(self, e: int) -> None:
        if not 0 <= e < self.num_entities:
            raise UnknownIdError(f"entity id {e} out of range [0, {self.num_entities})")

    def _check_relation(self, r: int) -> None:
        if not 0 <= r < self.num_relations:
            raise UnknownIdError(f"relation id {r} out of range [0, {self.num_relations})")

    # -- incidence queries ---------------------------------------------

    def entities_of_relation(self, r: int) -> frozenset[int]:
        """All entities appearing in some fact with relation ``r``."""
        self._check_relation(r)
        return self._entities_of_relation[r]

    def relations_of_entity(self, e: int) -> frozenset[int]:
        """All relations of facts containing entity ``e``."""
        self._check_entity(e)
        return self._relations_of_entity[e]

    def facts_of_entity(self, e: int) -> tuple[int, ...]:
        """Indices into ``facts`` of facts containing ``e``, ascending."""
        self._check_entity(e)
        return self._facts_of_entity[e]

    def facts_of_relation(self, r: int) -> tuple[int, ...]:
        self._check_relation(r)
        return self._facts_of_relation[r]

    def fact_entity_set(self, fact_index: int) -> frozenset[int]:
        return self._fact_entity_sets[fact_index]

    def neighbors(self, e: int) -> frozenset[int]:
        """Entities co-occurring with ``e`` in any fact, excluding ``e``."""
        self._check_entity(e)
        cached = self._neighbor_cache.get(e)
        if cached is None:
            out: set[int] = set()
            for fi in self._facts_of_entity[e]:
                out.update(self._fact_entity_sets[fi])
            out.discard(e)
            cached = frozenset(out)
            self._neighbor_cache[e] = cached
        return cached

    def cooccurrence_counts(self) -> tuple[dict[int, int], ...]:
        """Per entity: how many facts contain both it and each neighbor.

        Built lazily on first use; lets traversals skip an edge that only
        exists through one specific (excluded) fact.
        """
        if self._cooccurrence is None:
            counts: list[dict[int, int]] = [{} for _ in range(self.num_entities)]
            for es in self._fact_entity_sets:
                for u in es:
                    row = counts[u]
                    for v in es:
                        if v != u:
                            row[v] = row.get(v, 0) + 1
            self._cooccurrence = tuple(counts)
        return self._cooccurrence

    def incident_relations(self, r: int, exclude: frozenset[int] = frozenset()) -> frozenset[int]:
        """Relations r' != r with E(r') intersecting E(r), minus ``exclude``."""
        self._check_relation(r)
        base = self._incident_cache.get(r)
        if base is None:
            acc: set[int] = set()
            for e in self._entities_of_relation[r]:
                acc.update(self._relations_of_entity[e])
            acc.discard(r)
            base = frozenset(acc)
            self._incident_cache[r] = base
        if exclude:
            return base - exclude
        return base


def build_index(facts: list[Fact], num_entities: int, num_relations: int) -> KnowledgeGraph:
    """Build the read-only incidence index.

    Deterministic: internal orderings are ascending by id / fact position,
    independent of input permutation for all set-valued answers.
    """
    foe: list[list[int]] = [[] for _ in range(num_entities)]
    for_: list[list[int]] = [[] for _ in range(num_relations)]
    eor: list[set[int]] = [set() for _ in range(num_relations)]
    roe: list[set[int]] = [set() for _ in range(num_entities)]
    for i, f in enumerate(facts):
        if f.arity < 2:
            raise MalformedTupleError(f"tuple {i}: arity {f.arity} < 2")
        if not 0 <= f.relation < num_relations:
            raise UnknownIdError(f"tuple {i}: relation id {f.relation} out of range")
        for_[f.relation].append(i)
        seen_here: set[int] = set()
        for e in f.entities:
            if not 0 <= e < num_entities:
                raise UnknownIdError(f"tuple {i}: entity id {e} out of range")
            if e not in seen_here:
                seen_here.add(e)
                foe[e].append(i)
        eor[f.relation].update(seen_here)
        for e in seen_here:
            roe[e].add(f.relation)
    return KnowledgeGraph(
        facts=tuple(facts),
        num_entities=num_entities,
        num_relations=num_relations,
        facts_of_entity=tuple(tuple(x) for x in foe),
        facts_of_relation=tuple(tuple(x) for x in for_),
        entities_of_relation=tuple(frozenset(s) for s in eor),
        relations_of_entity=tuple(frozenset(s) for s in roe),
    )
