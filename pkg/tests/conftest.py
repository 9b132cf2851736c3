import numpy as np
import pytest
from hypothesis import settings, strategies as st

from slplab.relalg import EntitySet, Relation, close_unary

settings.register_profile("slplab", database=None, derandomize=True,
                          deadline=None, max_examples=60)
settings.load_profile("slplab")


def relation_strategy(n: int):
    """Arbitrary relation over n entities, encoded by its bitset."""
    return st.integers(min_value=0, max_value=(1 << (n * n)) - 1).map(
        lambda bits: Relation(EntitySet.of_size(n), bits))


def proper_relation_strategy(n: int):
    """Neither empty nor full, so the unary closure has four distinct images."""
    return st.integers(min_value=1, max_value=(1 << (n * n)) - 2).map(
        lambda bits: Relation(EntitySet.of_size(n), bits))


@pytest.fixture(scope="session")
def algebra_3():
    """|E| = 3, one asymmetric base relation; closure size 4, 9 families."""
    entity_set = EntitySet.of_size(3)
    base = Relation.from_pairs(entity_set, [(0, 1), (1, 2)], "r0")
    return close_unary([base])


@pytest.fixture(scope="session")
def algebra_3x2():
    """|E| = 3, two base relations; closure size 8, 18 families."""
    entity_set = EntitySet.of_size(3)
    return close_unary([
        Relation.from_pairs(entity_set, [(0, 1), (1, 2)], "r0"),
        Relation.from_pairs(entity_set, [(0, 0), (2, 1)], "r1"),
    ])


@pytest.fixture(scope="session")
def algebra_2():
    """|E| = 2, one asymmetric base relation."""
    entity_set = EntitySet.of_size(2)
    base = Relation.from_pairs(entity_set, [(0, 1)], "r0")
    return close_unary([base])


def pairs_of(relation: Relation) -> set[tuple[int, int]]:
    """Set-semantics view, the independent oracle for bitset operations."""
    return set(relation.pairs())


def relation_from_set(entity_set: EntitySet, pair_set) -> Relation:
    return Relation.from_pairs(entity_set, sorted(pair_set))


def brute_negate(r: Relation) -> set[tuple[int, int]]:
    n = r.entity_set.n
    return {(h, t) for h in range(n) for t in range(n)} - pairs_of(r)


def brute_converse(r: Relation) -> set[tuple[int, int]]:
    return {(t, h) for h, t in pairs_of(r)}


def brute_compose(r: Relation, s: Relation) -> set[tuple[int, int]]:
    n = r.entity_set.n
    rs, ss = pairs_of(r), pairs_of(s)
    return {(h, t) for h in range(n) for t in range(n)
            if any((h, b) in rs and (b, t) in ss for b in range(n))}


def random_proper_relation(entity_set: EntitySet, rng: np.random.Generator,
                           density: float = 0.5, name: str | None = None) -> Relation:
    """Rejection-sample a relation that is neither empty nor full."""
    n = entity_set.n
    while True:
        bits = 0
        for p in range(n * n):
            if rng.random() < density:
                bits |= 1 << p
        if 0 < bits < (1 << (n * n)) - 1:
            return Relation(entity_set, bits, name)
