"""Individual-to-concept assignments and free-text label mapping.

Memberships are loaded from ``individual<TAB>concept`` TSV rows. Each
individual keeps its direct concepts and a materialized *inferred* set (the
union of the ancestors of the direct concepts), so coverage tests during
induction are lookups rather than reasoning.

Label mapping is offline-first: a local TSV mapfile is consulted before any
network, and results fetched from an annotate service are cached to a
sidecar file so reruns make zero calls.
"""

from __future__ import annotations

import json
import logging
import time
import urllib.error
import urllib.parse
import urllib.request
from dataclasses import dataclass

import numpy as np

from .errors import ParseError, UnknownIndividualError
from .taxonomy import ClosureIndex, Interner, Taxonomy, materialize_closure

logger = logging.getLogger(__name__)


class MembershipIndex:
    """Direct and inferred concept sets per individual (immutable after build)."""

    def __init__(self, individuals: Interner, closure: ClosureIndex,
                 direct_offsets, direct_ids, inferred_offsets, inferred_ids):
        self.individuals = individuals
        self.closure = closure
        self._d_off = np.asarray(direct_offsets, dtype=np.int64)
        self._d_ids = np.asarray(direct_ids, dtype=np.int32)
        self._i_off = np.asarray(inferred_offsets, dtype=np.int64)
        self._i_ids = np.asarray(inferred_ids, dtype=np.int32)

    @classmethod
    def from_pairs(cls, pairs, individuals: Interner, closure: ClosureIndex) -> "MembershipIndex":
        """Build from (individual_id, concept_id) pairs; duplicates collapse."""
        n = len(individuals)
        direct: list[set[int]] = [set() for _ in range(n)]
        for ind, con in pairs:
            direct[ind].add(int(con))
        d_rows = [np.array(sorted(s), dtype=np.int32) for s in direct]
        i_rows = [closure.union_ancestors(row) for row in d_rows]
        return cls(
            individuals,
            closure,
            _offsets_of(d_rows),
            _concat(d_rows),
            _offsets_of(i_rows),
            _concat(i_rows),
        )

    @property
    def n_individuals(self) -> int:
        return len(self._d_off) - 1

    def _check(self, individual_id: int):
        if not 0 <= individual_id < self.n_individuals:
            raise UnknownIndividualError(f"individual id out of range: {individual_id}")

    def direct_of(self, individual_id: int) -> np.ndarray:
        self._check(individual_id)
        return self._d_ids[self._d_off[individual_id]:self._d_off[individual_id + 1]]

    def inferred_of(self, individual_id: int) -> np.ndarray:
        self._check(individual_id)
        return self._i_ids[self._i_off[individual_id]:self._i_off[individual_id + 1]]

    def covers(self, concept_id: int, individual_id: int, missing_ok: bool = False) -> bool:
        """True iff `concept_id` is in the individual's inferred set.

        Unknown individuals raise unless ``missing_ok`` is set, in which case
        an absent individual covers nothing.
        """
        if not 0 <= individual_id < self.n_individuals:
            if missing_ok:
                return False
            raise UnknownIndividualError(f"individual id out of range: {individual_id}")
        row = self.inferred_of(individual_id)
        pos = np.searchsorted(row, concept_id)
        return pos < len(row) and row[pos] == concept_id

    def csr(self):
        return self._d_off, self._d_ids, self._i_off, self._i_ids


def _offsets_of(rows) -> np.ndarray:
    off = np.zeros(len(rows) + 1, dtype=np.int64)
    if rows:
        off[1:] = np.cumsum([len(r) for r in rows])
    return off


def _concat(rows) -> np.ndarray:
    if not rows:
        return np.empty(0, dtype=np.int32)
    return np.concatenate(rows).astype(np.int32) if any(len(r) for r in rows) else np.empty(0, dtype=np.int32)


def parse_membership_pairs(path, concepts: Interner, strict: bool = True):
    """Read ``individual<TAB>concept`` rows.

    Returns (individuals interner, list of (individual_id, concept_id)).
    With ``strict`` every concept must already be interned; otherwise new
    concepts are interned on the fly (they become isolated concepts whose
    only ancestor is themselves).
    """
    individuals = Interner()
    pairs: list[tuple[int, int]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip() or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 2:
                raise ParseError(path, line_no, f"expected 2 tab-separated fields, got {len(fields)}")
            ind_iri, con_iri = fields
            if not ind_iri or not con_iri:
                raise ParseError(path, line_no, "empty field")
            if strict:
                cid = concepts.get(con_iri)
                if cid is None:
                    raise ParseError(path, line_no, f"unknown concept {con_iri!r} (strict mode)")
            else:
                cid = concepts.intern(con_iri)
            pairs.append((individuals.intern(ind_iri), cid))
    return individuals, pairs


def load_memberships(path, taxonomy: Taxonomy, closure: ClosureIndex | None = None,
                     strict: bool = True) -> MembershipIndex:
    """Load a membership TSV against a taxonomy.

    When ``closure`` is omitted it is materialized here, which is also
    required when ``strict=False`` interns previously unseen concepts (the
    closure must cover them). Passing a stale closure raises ValueError.
    """
    individuals, pairs = parse_membership_pairs(path, taxonomy.concepts, strict=strict)
    if closure is None:
        closure = materialize_closure(taxonomy, n_concepts=len(taxonomy.concepts))
    elif closure.n_concepts < len(taxonomy.concepts):
        raise ValueError(
            "closure is stale (new concepts were interned); pass closure=None "
            "to rematerialize"
        )
    return MembershipIndex.from_pairs(pairs, individuals, closure)


def covers(index: MembershipIndex, concept_id: int, individual_id: int) -> bool:
    """Operation form of :meth:`MembershipIndex.covers` (strict)."""
    return index.covers(concept_id, individual_id)


@dataclass(frozen=True)
class LabelMapping:
    """Resolution of one free-text label to one or more concept IRIs."""

    label: str
    concepts: tuple[str, ...]
    source: str  # "file" or "service"


class AnnotateClient:
    """Client for a Spotlight-style annotate endpoint (HTTP GET + JSON).

    The endpoint is expected to accept the label under a single query
    parameter (default ``text``) and to answer with JSON containing a list
    of resource identifiers, either as plain strings or as objects carrying
    an ``@URI``/``uri``/``iri``/``id`` key (optionally nested under a
    ``Resources`` key, as the public DBpedia Spotlight API does).

    Requests are issued sequentially; ``politeness_delay`` seconds are slept
    between consecutive calls. ``calls`` counts requests actually sent.
    """

    def __init__(self, url: str, param: str = "text", timeout: float = 10.0,
                 politeness_delay: float = 0.0):
        self.url = url
        self.param = param
        self.timeout = timeout
        self.politeness_delay = politeness_delay
        self.calls = 0

    def annotate(self, label: str) -> list[str]:
        if self.calls and self.politeness_delay > 0:
            time.sleep(self.politeness_delay)
        self.calls += 1
        query = urllib.parse.urlencode({self.param: label})
        sep = "&" if "?" in self.url else "?"
        req = urllib.request.Request(
            f"{self.url}{sep}{query}", headers={"Accept": "application/json"}
        )
        with urllib.request.urlopen(req, timeout=self.timeout) as resp:
            body = json.loads(resp.read().decode("utf-8"))
        return _extract_resources(body)


def _extract_resources(body) -> list[str]:
    if isinstance(body, list):
        items = body
    elif isinstance(body, dict):
        items = None
        for key in ("Resources", "resources", "entities"):
            if key in body:
                items = body[key]
                break
        if items is None:
            items = []
    else:
        items = []
    out: list[str] = []
    for item in items:
        if isinstance(item, str):
            out.append(item)
        elif isinstance(item, dict):
            for key in ("@URI", "URI", "uri", "iri", "id"):
                if key in item:
                    out.append(str(item[key]))
                    break
    return out


def _read_label_tsv(path, n_fields: int):
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip() or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != n_fields:
                raise ParseError(path, line_no, f"expected {n_fields} tab-separated fields, got {len(fields)}")
            rows.append(fields)
    return rows


def map_labels(labels, mapfile, client: AnnotateClient | None = None,
               cache_path=None) -> tuple[list[LabelMapping], list[str]]:
    """Resolve labels to concept IRIs: mapfile first, then cache, then service.

    Returns (mappings, unmapped). Input labels are deduplicated preserving
    first-occurrence order. Service results, including empty ones, are
    appended to the cache sidecar so a warm rerun performs zero calls; a
    service failure only logs a warning and leaves the label unmapped.
    """
    seen: set[str] = set()
    ordered = []
    for lab in labels:
        lab = lab.strip()
        if lab and lab not in seen:
            seen.add(lab)
            ordered.append(lab)

    file_map: dict[str, list[str]] = {}
    for label, concept in _read_label_tsv(mapfile, 2):
        file_map.setdefault(label.strip(), []).append(concept)

    cache_map: dict[str, list[str]] = {}
    if cache_path is not None:
        try:
            cache_rows = _read_label_tsv(cache_path, 3)
        except FileNotFoundError:
            cache_rows = []
        for label, concept, _source in cache_rows:
            row = cache_map.setdefault(label.strip(), [])
            if concept:
                row.append(concept)

    mappings: list[LabelMapping] = []
    unmapped: list[str] = []
    new_cache_rows: list[tuple[str, str]] = []
    for label in ordered:
        if label in file_map:
            mappings.append(LabelMapping(label, tuple(file_map[label]), "file"))
            continue
        if label in cache_map:
            concepts = cache_map[label]
            if concepts:
                mappings.append(LabelMapping(label, tuple(concepts), "service"))
            else:
                unmapped.append(label)
            continue
        if client is None:
            unmapped.append(label)
            continue
        try:
            concepts = client.annotate(label)
        except (urllib.error.URLError, OSError, ValueError, json.JSONDecodeError) as exc:
            logger.warning("annotate service failed for %r: %s", label, exc)
            unmapped.append(label)
            continue
        if concepts:
            mappings.append(LabelMapping(label, tuple(concepts), "service"))
            new_cache_rows.extend((label, c) for c in concepts)
        else:
            unmapped.append(label)
            new_cache_rows.append((label, ""))

    if cache_path is not None and new_cache_rows:
        with open(cache_path, "a", encoding="utf-8") as fh:
            for label, concept in new_cache_rows:
                fh.write(f"{label}\t{concept}\tservice\n")

    return mappings, unmapped
