"""Shared fixture builders: tiny hand-made hierarchies and random ones."""

from __future__ import annotations

import pytest

from conceptdiff.membership import MembershipIndex
from conceptdiff.taxonomy import EdgeList, Interner, break_cycles, materialize_closure


def make_edge_list(pairs):
    """EdgeList from (child_iri, parent_iri) pairs, interning in order."""
    interner = Interner()
    edges = [(interner.intern(c), interner.intern(p)) for c, p in pairs]
    return EdgeList(concepts=interner, edges=edges)


def build_taxonomy(pairs):
    """(taxonomy, closure) from IRI edge pairs."""
    taxonomy = break_cycles(make_edge_list(pairs))
    return taxonomy, materialize_closure(taxonomy)


def build_membership(direct, taxonomy, closure):
    """MembershipIndex from {individual_iri: [concept_iri, ...]}."""
    individuals = Interner()
    pairs = []
    for ind in direct:
        iid = individuals.intern(ind)
        for concept in direct[ind]:
            pairs.append((iid, taxonomy.concepts.id_of(concept)))
    return MembershipIndex.from_pairs(pairs, individuals, closure)


def random_hierarchy(rng, n_concepts, n_extra_edges, cyclic=False):
    """Edge pairs with a tree skeleton plus random extras.

    With cyclic=False extra edges always point from a higher to a lower
    index, so the result is a DAG; otherwise direction is unconstrained.
    """
    name = [f"c{i:04d}" for i in range(n_concepts)]
    pairs = [(name[i], name[(i - 1) // 3]) for i in range(1, n_concepts)]
    for _ in range(n_extra_edges):
        a = int(rng.integers(1, n_concepts))
        if cyclic:
            b = int(rng.integers(0, n_concepts))
            if b == a:
                continue
            pairs.append((name[a], name[b]))
        else:
            b = int(rng.integers(0, a))
            pairs.append((name[a], name[b]))
    return pairs


def random_fixture(rng, n_concepts=80, n_individuals=25, max_direct=3):
    """Random taxonomy plus memberships; returns (taxonomy, closure, index)."""
    taxonomy, closure = build_taxonomy(
        random_hierarchy(rng, n_concepts, n_extra_edges=n_concepts // 2)
    )
    direct = {}
    for k in range(n_individuals):
        n_direct = int(rng.integers(1, max_direct + 1))
        concepts = rng.choice(n_concepts, size=n_direct, replace=False)
        direct[f"i{k:03d}"] = [taxonomy.concepts.iri_of(int(c)) for c in concepts]
    index = build_membership(direct, taxonomy, closure)
    return taxonomy, closure, index


def random_example_sets(rng, index, n_pos=6, n_neg=6):
    ids = rng.permutation(index.n_individuals)
    return list(map(int, ids[:n_pos])), list(map(int, ids[n_pos:n_pos + n_neg]))


SCENE_A_ITEMS = [f"kitchen_{i}" for i in range(8)]
SCENE_B_ITEMS = [f"park_{i}" for i in range(8)]


def separable_fixture(with_root=False):
    """Two crisply separated 8-item scenes; one concept per item plus groups.

    The positive group concept covers every positive and no negative, so the
    unshuffled top candidate reaches F1 = 1. Without a shared root no single
    concept covers both scenes.
    """
    pairs = []
    for i in range(8):
        pairs.append((f"kitchen_thing_{i}", "CookingGear"))
        pairs.append((f"park_thing_{i}", "OutdoorScenery"))
    if with_root:
        pairs.append(("CookingGear", "Anything"))
        pairs.append(("OutdoorScenery", "Anything"))
    taxonomy, closure = build_taxonomy(pairs)
    direct = {}
    for i, item in enumerate(SCENE_A_ITEMS):
        direct[item] = [f"kitchen_thing_{i}"]
    for i, item in enumerate(SCENE_B_ITEMS):
        direct[item] = [f"park_thing_{i}"]
    index = build_membership(direct, taxonomy, closure)
    positives = [index.individuals.id_of(x) for x in SCENE_A_ITEMS]
    negatives = [index.individuals.id_of(x) for x in SCENE_B_ITEMS]
    return taxonomy, closure, index, positives, negatives


@pytest.fixture
def chain_index():
    """Chain a -> b -> c with x directly in b and y directly in a."""
    taxonomy, closure = build_taxonomy([("a", "b"), ("b", "c")])
    index = build_membership({"x": ["b"], "y": ["a"]}, taxonomy, closure)
    return taxonomy, closure, index


def bfs_ancestors(pairs, iri):
    """Oracle: reflexive ancestor IRIs by breadth-first walk of raw pairs."""
    parents = {}
    for c, p in pairs:
        parents.setdefault(c, set()).add(p)
    seen = {iri}
    frontier = [iri]
    while frontier:
        node = frontier.pop()
        for parent in parents.get(node, ()):
            if parent not in seen:
                seen.add(parent)
                frontier.append(parent)
    return seen
