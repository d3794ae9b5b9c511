"""Versioned binary serialization of the built indexes.

Layout (all integers little-endian):

    magic   5 bytes  b"DXTX1"
    version u32
    counts  5 x u64: concepts, individuals, dag edges, removed edges,
            collapsed duplicates
    blobs   concept IRI table, individual IRI table (u64 byte length +
            newline-joined UTF-8)
    arrays  dag edges, removed edges, topo order, closure CSR, direct CSR,
            inferred CSR (each u64 element count + raw data)

The writer is deterministic: identical builds produce identical bytes.
The loader rejects wrong magic bytes and version mismatches.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import ConceptDiffError
from .membership import MembershipIndex
from .taxonomy import ClosureIndex, Interner, Taxonomy

MAGIC = b"DXTX1"
VERSION = 1


class StoreFormatError(ConceptDiffError):
    """The file is not a readable index of the supported version."""


@dataclass
class IndexBundle:
    taxonomy: Taxonomy
    closure: ClosureIndex
    membership: MembershipIndex


def _write_u64(fh, value: int):
    fh.write(struct.pack("<Q", value))


def _read_u64(fh) -> int:
    data = fh.read(8)
    if len(data) != 8:
        raise StoreFormatError("truncated index file")
    return struct.unpack("<Q", data)[0]


def _write_blob(fh, iris):
    blob = "\n".join(iris).encode("utf-8")
    _write_u64(fh, len(blob))
    fh.write(blob)


def _read_blob(fh, count: int) -> list[str]:
    length = _read_u64(fh)
    blob = fh.read(length)
    if len(blob) != length:
        raise StoreFormatError("truncated IRI table")
    if count == 0:
        return []
    iris = blob.decode("utf-8").split("\n")
    if len(iris) != count:
        raise StoreFormatError(f"IRI table has {len(iris)} entries, expected {count}")
    return iris


def _write_array(fh, arr: np.ndarray, dtype: str):
    arr = np.ascontiguousarray(arr, dtype=dtype)
    _write_u64(fh, arr.size)
    fh.write(arr.tobytes())


def _read_array(fh, dtype: str) -> np.ndarray:
    size = _read_u64(fh)
    itemsize = np.dtype(dtype).itemsize
    data = fh.read(size * itemsize)
    if len(data) != size * itemsize:
        raise StoreFormatError("truncated array block")
    return np.frombuffer(data, dtype=dtype).copy()


def save_index(path, taxonomy: Taxonomy, closure: ClosureIndex,
               membership: MembershipIndex) -> None:
    c_off, c_ids = closure.csr()
    d_off, d_ids, i_off, i_ids = membership.csr()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        _write_u64(fh, closure.n_concepts)
        _write_u64(fh, membership.n_individuals)
        _write_u64(fh, len(taxonomy.dag_edges))
        _write_u64(fh, len(taxonomy.removed_edges))
        _write_u64(fh, taxonomy.duplicates_collapsed)
        _write_blob(fh, (taxonomy.concepts.iri_of(i) for i in range(closure.n_concepts)))
        _write_blob(fh, (membership.individuals.iri_of(i) for i in range(membership.n_individuals)))
        _write_array(fh, taxonomy.dag_edges.reshape(-1), "<i4")
        _write_array(fh, taxonomy.removed_edges.reshape(-1), "<i4")
        _write_array(fh, taxonomy.topo_order, "<i4")
        _write_array(fh, c_off, "<i8")
        _write_array(fh, c_ids, "<i4")
        _write_array(fh, d_off, "<i8")
        _write_array(fh, d_ids, "<i4")
        _write_array(fh, i_off, "<i8")
        _write_array(fh, i_ids, "<i4")


def load_index(path) -> IndexBundle:
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise StoreFormatError(f"{path}: not an index file (bad magic {magic!r})")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != VERSION:
            raise StoreFormatError(
                f"{path}: unsupported index version {version} (expected {VERSION})"
            )
        n_concepts = _read_u64(fh)
        n_individuals = _read_u64(fh)
        n_dag = _read_u64(fh)
        n_removed = _read_u64(fh)
        duplicates = _read_u64(fh)
        concepts = Interner(_read_blob(fh, n_concepts))
        individuals = Interner(_read_blob(fh, n_individuals))
        dag = _read_array(fh, "<i4").reshape(-1, 2)
        removed = _read_array(fh, "<i4").reshape(-1, 2)
        topo = _read_array(fh, "<i4")
        c_off = _read_array(fh, "<i8")
        c_ids = _read_array(fh, "<i4")
        d_off = _read_array(fh, "<i8")
        d_ids = _read_array(fh, "<i4")
        i_off = _read_array(fh, "<i8")
        i_ids = _read_array(fh, "<i4")

    if len(dag) != n_dag or len(removed) != n_removed:
        raise StoreFormatError(f"{path}: edge counts disagree with header")
    if len(concepts) != n_concepts or len(individuals) != n_individuals:
        raise StoreFormatError(f"{path}: intern tables disagree with header")

    taxonomy = Taxonomy(
        concepts=concepts,
        dag_edges=dag,
        removed_edges=removed,
        topo_order=topo,
        duplicates_collapsed=int(duplicates),
    )
    closure = ClosureIndex(concepts, c_off, c_ids)
    membership = MembershipIndex(individuals, closure, d_off, d_ids, i_off, i_ids)
    return IndexBundle(taxonomy=taxonomy, closure=closure, membership=membership)
