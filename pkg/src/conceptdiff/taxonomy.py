"""Class-hierarchy ingestion: cycle repair and ancestor materialization.

The hierarchy arrives as raw ``child<TAB>parent`` pairs. Crowd-sourced
hierarchies are dirty: duplicates, self-loops, and genuine cycles are all
expected, so :func:`break_cycles` repairs the input into a DAG with a fixed,
deterministic depth-first rule, and :func:`materialize_closure` precomputes
every concept's reflexive ancestor set so that subsumption queries and
coverage tests downstream are plain array lookups.

Conventions fixed here (and relied on by the rest of the package):

* DFS traverses child-to-parent edges. Forest roots are scanned in ascending
  lexicographic IRI order, and each node's parents are visited in ascending
  lexicographic IRI order. Removed edges are exactly the back edges of that
  traversal, plus all self-loops.
* ``topo_order`` lists parents before any of their children.
* Ancestor sets are reflexive (every concept is its own ancestor) and stored
  as sorted id arrays in one shared CSR layout. Memory for the closure is
  ``4 * total_entries + 8 * (n_concepts + 1)`` bytes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InternalInvariantError, ParseError, UnknownConceptError


class Interner:
    """Bijective mapping between opaque IRI strings and dense ids 0..n-1."""

    __slots__ = ("_iris", "_ids")

    def __init__(self, iris=()):
        self._iris: list[str] = []
        self._ids: dict[str, int] = {}
        for iri in iris:
            self.intern(iri)

    def intern(self, iri: str) -> int:
        ident = self._ids.get(iri)
        if ident is None:
            ident = len(self._iris)
            self._ids[iri] = ident
            self._iris.append(iri)
        return ident

    def id_of(self, iri: str) -> int:
        try:
            return self._ids[iri]
        except KeyError:
            raise UnknownConceptError(f"unknown identifier: {iri!r}") from None

    def get(self, iri: str):
        return self._ids.get(iri)

    def iri_of(self, ident: int) -> str:
        if not 0 <= ident < len(self._iris):
            raise UnknownConceptError(f"id out of range: {ident}")
        return self._iris[ident]

    def __len__(self) -> int:
        return len(self._iris)

    def __contains__(self, iri: str) -> bool:
        return iri in self._ids

    @property
    def iris(self) -> tuple[str, ...]:
        return tuple(self._iris)


@dataclass
class EdgeList:
    """Raw (child, parent) id pairs in file order; duplicates preserved."""

    concepts: Interner
    edges: list[tuple[int, int]]

    def __len__(self) -> int:
        return len(self.edges)


def load_edges(path) -> EdgeList:
    """Read a ``child<TAB>parent`` edge file.

    Lines starting with ``#`` and blank lines are ignored. Ids are assigned
    by first appearance (child before parent within a line). A line with the
    wrong field count, or an empty field, raises :class:`ParseError` carrying
    the line number. An empty file yields a valid empty edge list.
    """
    concepts = Interner()
    edges: list[tuple[int, int]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip() or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 2:
                raise ParseError(path, line_no, f"expected 2 tab-separated fields, got {len(fields)}")
            child, parent = fields
            if not child or not parent:
                raise ParseError(path, line_no, "empty field")
            edges.append((concepts.intern(child), concepts.intern(parent)))
    return EdgeList(concepts=concepts, edges=edges)


def _sorted_edge_array(pairs) -> np.ndarray:
    if not pairs:
        return np.empty((0, 2), dtype=np.int32)
    arr = np.array(sorted(pairs), dtype=np.int32)
    return arr


@dataclass
class Taxonomy:
    """Repaired hierarchy: acyclic edges plus the audit trail of the repair."""

    concepts: Interner
    dag_edges: np.ndarray       # (m, 2) int32 (child, parent), sorted by ids
    removed_edges: np.ndarray   # (r, 2) int32, back edges and self-loops
    topo_order: np.ndarray      # int32; every parent precedes its children
    duplicates_collapsed: int = 0
    # CSR adjacency over dag_edges: parents of concept c, sorted by id
    _parent_offsets: np.ndarray = field(default=None, repr=False)
    _parent_ids: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self._parent_offsets is None:
            self._parent_offsets, self._parent_ids = _adjacency(
                self.dag_edges, len(self.concepts)
            )

    def parents_of(self, concept_id: int) -> np.ndarray:
        lo = self._parent_offsets[concept_id]
        hi = self._parent_offsets[concept_id + 1]
        return self._parent_ids[lo:hi]

    @property
    def n_concepts(self) -> int:
        return len(self.concepts)


def _adjacency(edges: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """CSR rows of parent ids per child, built from a sorted edge array."""
    offsets = np.zeros(n + 1, dtype=np.int64)
    if len(edges) == 0:
        return offsets, np.empty(0, dtype=np.int32)
    counts = np.bincount(edges[:, 0], minlength=n)
    offsets[1:] = np.cumsum(counts)
    # edges are sorted by (child, parent), so parent runs are already sorted
    return offsets, np.ascontiguousarray(edges[:, 1], dtype=np.int32)


def break_cycles(raw: EdgeList) -> Taxonomy:
    """Repair a raw edge multiset into a DAG, deterministically.

    Duplicate edges collapse silently (the count is kept on the result).
    Self-loops are always removed. The remaining removals are exactly the
    back edges found by an iterative DFS over child-to-parent edges whose
    forest roots and successor lists are both ordered by ascending
    lexicographic IRI. The DFS finish sequence doubles as ``topo_order``
    (parents first), which is what lets the closure build run in one pass.
    """
    concepts = raw.concepts
    n = len(concepts)
    unique_edges = set(raw.edges)
    duplicates = len(raw.edges) - len(unique_edges)

    self_loops = {e for e in unique_edges if e[0] == e[1]}
    work_edges = unique_edges - self_loops

    # successor (parent) lists sorted by parent IRI
    succ: dict[int, list[int]] = {}
    for child, parent in work_edges:
        succ.setdefault(child, []).append(parent)
    iri = concepts.iri_of
    for child in succ:
        succ[child].sort(key=iri)

    order = sorted(range(n), key=iri)
    color = np.zeros(n, dtype=np.uint8)  # 0 white, 1 gray, 2 black
    removed: set[tuple[int, int]] = set(self_loops)
    finish: list[int] = []
    empty: list[int] = []

    for root in order:
        if color[root] != 0:
            continue
        stack = [(root, iter(succ.get(root, empty)))]
        color[root] = 1
        while stack:
            node, it = stack[-1]
            advanced = False
            for parent in it:
                c = color[parent]
                if c == 0:
                    color[parent] = 1
                    stack.append((parent, iter(succ.get(parent, empty))))
                    advanced = True
                    break
                if c == 1:
                    removed.add((node, parent))
                # black successors are forward/cross edges; kept
            if not advanced:
                color[node] = 2
                finish.append(node)
                stack.pop()

    dag = work_edges - removed
    return Taxonomy(
        concepts=concepts,
        dag_edges=_sorted_edge_array(dag),
        removed_edges=_sorted_edge_array(removed),
        topo_order=np.array(finish, dtype=np.int32),
        duplicates_collapsed=duplicates,
    )


class ClosureIndex:
    """Reflexive ancestor sets for every concept, in one CSR block.

    ``ancestors(c)`` is a sorted int32 array view. Subsumption is a binary
    search in the subclass's row. Immutable after construction, so instances
    are safe to share across threads.
    """

    def __init__(self, concepts: Interner, offsets: np.ndarray, ids: np.ndarray):
        self.concepts = concepts
        self._offsets = np.asarray(offsets, dtype=np.int64)
        self._ids = np.asarray(ids, dtype=np.int32)

    @property
    def n_concepts(self) -> int:
        return len(self._offsets) - 1

    @property
    def total_entries(self) -> int:
        return int(self._offsets[-1])

    @property
    def memory_bytes(self) -> int:
        return int(self._ids.nbytes + self._offsets.nbytes)

    @staticmethod
    def predicted_memory_bytes(n_concepts: int, total_entries: int) -> int:
        """Documented size formula: 4 bytes per entry, 8 per offset."""
        return 4 * total_entries + 8 * (n_concepts + 1)

    def _check(self, concept_id: int):
        if not 0 <= concept_id < self.n_concepts:
            raise UnknownConceptError(f"concept id out of range: {concept_id}")

    def ancestors(self, concept_id: int) -> np.ndarray:
        self._check(concept_id)
        lo = self._offsets[concept_id]
        hi = self._offsets[concept_id + 1]
        return self._ids[lo:hi]

    def subsumes(self, sub: int, superc: int) -> bool:
        """True iff `superc` is an ancestor of `sub` (reflexive)."""
        self._check(superc)
        row = self.ancestors(sub)
        pos = np.searchsorted(row, superc)
        return pos < len(row) and row[pos] == superc

    def union_ancestors(self, concept_ids) -> np.ndarray:
        """Sorted union of the ancestor rows of several concepts."""
        rows = [self.ancestors(c) for c in concept_ids]
        if not rows:
            return np.empty(0, dtype=np.int32)
        if len(rows) == 1:
            return rows[0].copy()
        return np.unique(np.concatenate(rows))

    def csr(self) -> tuple[np.ndarray, np.ndarray]:
        return self._offsets, self._ids


def materialize_closure(taxonomy: Taxonomy, n_concepts: int | None = None) -> ClosureIndex:
    """Build the reflexive-transitive ancestor closure of a repaired DAG.

    Rows are computed in topological order (parents first), each as the
    sorted union of its parents' rows plus the concept itself. Concepts
    interned after the taxonomy was built (hence absent from ``topo_order``
    and the edge set) get the reflexive singleton row.

    Raises :class:`InternalInvariantError` if the taxonomy's topo_order is
    inconsistent with its edges, which would indicate a residual cycle.
    """
    n = n_concepts if n_concepts is not None else len(taxonomy.concepts)
    if n < len(taxonomy.topo_order):
        raise ValueError("n_concepts smaller than the taxonomy's concept count")

    position = np.full(n, -1, dtype=np.int64)
    position[taxonomy.topo_order] = np.arange(len(taxonomy.topo_order))
    for child, parent in taxonomy.dag_edges:
        if position[parent] < 0 or position[parent] >= position[child]:
            raise InternalInvariantError(
                f"topo order violated for edge ({child}, {parent}); cycle suspected"
            )

    rows: list[np.ndarray | None] = [None] * n
    for c in range(n):
        rows[c] = np.array([c], dtype=np.int32)
    for c in taxonomy.topo_order:
        parents = taxonomy.parents_of(int(c))
        if len(parents) == 0:
            continue
        parts = [rows[int(p)] for p in parents]
        parts.append(np.array([c], dtype=np.int32))
        rows[int(c)] = np.unique(np.concatenate(parts))

    offsets = np.zeros(n + 1, dtype=np.int64)
    offsets[1:] = np.cumsum([len(r) for r in rows])
    ids = np.concatenate(rows) if n else np.empty(0, dtype=np.int32)
    return ClosureIndex(taxonomy.concepts, offsets, ids.astype(np.int32))


def subsumes(index: ClosureIndex, sub: int, superc: int) -> bool:
    """True iff concept `sub` is subsumed by (a descendant of) `superc`."""
    return index.subsumes(sub, superc)
