"""Bounded class-expression search over positive/negative example sets.

Candidates are disjunctions of conjunctions of atomic concepts (an atom is
the one-disjunct, one-atom case; nesting never goes deeper than or-of-ands).
A candidate covers an individual when any of its conjunctions has every atom
in the individual's inferred concept set.

The search runs in three stages:

1. *Atoms*: every concept covering at least one positive (the union of the
   positives' inferred sets) is scored. Concepts covering no positive are
   never enumerated.
2. *Conjunctions* (``max_conjuncts > 1``): the ``beam_width`` best
   candidates of the previous size are each extended with a beam atom,
   skipping extensions where one atom subsumes another (the conjunction
   would collapse) and extensions that cover no positive.
3. *Disjunctions* (``max_disjuncts > 1``): starting from the best candidate
   so far, greedily union in further ranked candidates while recall strictly
   rises and the chosen metric does not fall.

The final ranking sorts by the chosen metric descending with a deterministic
tie-break: fewer atoms first, then lexicographic comparison of the
candidate's sorted atom IRIs. The ranking is therefore invariant to the
order in which examples or concepts were supplied. An empty result (nothing
covers any positive) is the explicit "no explanation" outcome.

:func:`exhaustive_induce` is the desk-scale oracle: a complete enumeration
of the same bounded space with per-individual coverage recounts, refusing
outright when the space exceeds its cap.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import comb

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_example_sets
from .errors import CandidateSpaceError, UnknownIndividualError
from .membership import MembershipIndex

METRICS = ("f1", "precision", "recall", "hybrid")


@dataclass(frozen=True)
class CandidateConcept:
    """Or-of-ands candidate; each disjunct is a sorted tuple of concept ids."""

    disjuncts: tuple[tuple[int, ...], ...]

    @classmethod
    def atom(cls, concept_id: int) -> "CandidateConcept":
        return cls(((int(concept_id),),))

    @classmethod
    def conjunction(cls, concept_ids) -> "CandidateConcept":
        return cls((tuple(sorted(int(c) for c in concept_ids)),))

    @classmethod
    def disjunction(cls, disjuncts) -> "CandidateConcept":
        return cls(tuple(sorted(set(tuple(d) for d in disjuncts))))

    @property
    def n_atoms(self) -> int:
        return sum(len(d) for d in self.disjuncts)

    @property
    def is_atom(self) -> bool:
        return len(self.disjuncts) == 1 and len(self.disjuncts[0]) == 1

    def render(self, concepts) -> str:
        """Human-readable label: atoms joined by " & ", disjuncts by " | ".

        Atoms and disjuncts are ordered by IRI so the label is invariant to
        the order concepts happened to be interned in.
        """
        parts = []
        for d in self.disjuncts:
            inner = " & ".join(sorted(concepts.iri_of(c) for c in d))
            parts.append(f"({inner})" if len(self.disjuncts) > 1 and len(d) > 1 else inner)
        return " | ".join(sorted(parts))


@dataclass(frozen=True)
class ScoreSet:
    """Coverage counts plus the derived ranking metrics."""

    tp: int
    fp: int
    fn: int
    tn: int
    precision: float
    recall: float
    f1: float
    hybrid: float

    @classmethod
    def from_counts(cls, tp: int, fp: int, fn: int, tn: int, alpha: float = 0.5) -> "ScoreSet":
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        hybrid = alpha * f1 + (1.0 - alpha) * precision
        return cls(tp, fp, fn, tn, precision, recall, f1, hybrid)

    def metric(self, name: str) -> float:
        if name not in METRICS:
            raise ValueError(f"unknown metric {name!r}; expected one of {METRICS}")
        return getattr(self, name)


@dataclass(frozen=True)
class ScoredConcept:
    candidate: CandidateConcept
    label: str
    scores: ScoreSet


def _require_known(index: MembershipIndex, ids) -> None:
    for i in ids:
        if not 0 <= i < index.n_individuals:
            raise UnknownIndividualError(
                f"individual id {i} is not in the membership index"
            )


def candidate_covers(cand: CandidateConcept, index: MembershipIndex, individual_id: int) -> bool:
    """Evaluate the candidate against one individual's inferred set."""
    return any(
        all(index.covers(c, individual_id) for c in disjunct)
        for disjunct in cand.disjuncts
    )


def score(cand: CandidateConcept, positives, negatives, index: MembershipIndex,
          alpha: float = 0.5) -> ScoreSet:
    """Score a candidate by per-individual coverage recount (the simple path)."""
    pos, neg = check_example_sets(positives, negatives)
    _require_known(index, sorted(pos) + sorted(neg))
    tp = sum(candidate_covers(cand, index, i) for i in pos)
    fp = sum(candidate_covers(cand, index, i) for i in neg)
    return ScoreSet.from_counts(tp, fp, len(pos) - tp, len(neg) - fp, alpha=alpha)


def _sort_key(index: MembershipIndex, metric: str):
    concepts = index.closure.concepts

    def key(sc: ScoredConcept):
        shape = tuple(
            sorted(tuple(sorted(concepts.iri_of(c) for c in d)) for d in sc.candidate.disjuncts)
        )
        return (-sc.scores.metric(metric), sc.candidate.n_atoms, shape)

    return key


def _comparable(closure, a: int, b: int) -> bool:
    return closure.subsumes(a, b) or closure.subsumes(b, a)


def induce(positives, negatives, index: MembershipIndex, *, metric: str = "f1",
           max_conjuncts: int = 2, max_disjuncts: int = 3, beam_width: int = 64,
           top_k: int = 7, alpha: float = 0.5) -> list[ScoredConcept]:
    """Run the staged search and return the ``top_k`` ranked candidates.

    Returns an empty list when no concept covers any positive (the explicit
    "no explanation" outcome). Raises :class:`UnknownIndividualError` for
    example individuals missing from the index: treating them as covering
    nothing would silently corrupt every score.
    """
    pos, neg = check_example_sets(positives, negatives)
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")
    if min(max_conjuncts, max_disjuncts, beam_width, top_k) < 1:
        raise ValueError("max_conjuncts, max_disjuncts, beam_width, top_k must be >= 1")

    pos_ids = sorted(pos)
    neg_ids = sorted(neg)
    _require_known(index, pos_ids + neg_ids)
    n_pos, n_neg = len(pos_ids), len(neg_ids)
    examples = pos_ids + neg_ids
    closure = index.closure
    concepts = closure.concepts

    # Stage 1: atoms from the union of the positives' inferred sets.
    pos_rows = [index.inferred_of(i) for i in pos_ids]
    atom_ids = np.unique(np.concatenate(pos_rows)) if pos_rows else np.empty(0, np.int32)
    if len(atom_ids) == 0:
        return []

    # coverage matrix: one row per atom, one column per example individual
    cov = np.zeros((len(atom_ids), len(examples)), dtype=bool)
    for j, ind in enumerate(examples):
        cov[:, j] = np.isin(atom_ids, index.inferred_of(ind), assume_unique=True)

    def make_scored(cand: CandidateConcept, row: np.ndarray) -> ScoredConcept:
        tp = int(row[:n_pos].sum())
        fp = int(row[n_pos:].sum())
        return ScoredConcept(
            candidate=cand,
            label=cand.render(concepts),
            scores=ScoreSet.from_counts(tp, fp, n_pos - tp, n_neg - fp, alpha=alpha),
        )

    atom_pos = {int(a): k for k, a in enumerate(atom_ids)}
    pool: dict[CandidateConcept, ScoredConcept] = {}
    cov_by_cand: dict[CandidateConcept, np.ndarray] = {}
    for k, a in enumerate(atom_ids):
        cand = CandidateConcept.atom(int(a))
        pool[cand] = make_scored(cand, cov[k])
        cov_by_cand[cand] = cov[k]

    key = _sort_key(index, metric)

    # Stage 2: beam-refined conjunctions.
    if max_conjuncts > 1:
        beam_atoms = sorted((pool[c] for c in pool), key=key)[:beam_width]
        beam_atom_ids = [sc.candidate.disjuncts[0][0] for sc in beam_atoms]
        frontier = [(tuple(sc.candidate.disjuncts[0]), cov_by_cand[sc.candidate])
                    for sc in beam_atoms]
        for _size in range(2, max_conjuncts + 1):
            produced: dict[tuple[int, ...], np.ndarray] = {}
            for conj, conj_row in frontier:
                for a in beam_atom_ids:
                    if a in conj:
                        continue
                    # a conjunction with comparable atoms collapses to fewer atoms
                    if any(_comparable(closure, a, x) for x in conj):
                        continue
                    new_conj = tuple(sorted(conj + (a,)))
                    if new_conj in produced:
                        continue
                    row = conj_row & cov[atom_pos[a]]
                    if not row[:n_pos].any():
                        continue
                    produced[new_conj] = row
            scored_level = []
            for conj, row in produced.items():
                cand = CandidateConcept((conj,))
                sc = make_scored(cand, row)
                pool[cand] = sc
                cov_by_cand[cand] = row
                scored_level.append(sc)
            if not scored_level:
                break
            scored_level.sort(key=key)
            frontier = [(sc.candidate.disjuncts[0], cov_by_cand[sc.candidate])
                        for sc in scored_level[:beam_width]]

    # Stage 3: greedy disjunctions over the ranked pool.
    if max_disjuncts > 1 and pool:
        ranked = sorted(pool.values(), key=key)
        current = ranked[0]
        cur_row = cov_by_cand[current.candidate]
        cur_disjuncts = set(current.candidate.disjuncts)
        for sc in ranked[1:]:
            if len(cur_disjuncts) >= max_disjuncts:
                break
            extra = set(sc.candidate.disjuncts) - cur_disjuncts
            if not extra:
                continue
            row = cur_row | cov_by_cand[sc.candidate]
            trial = CandidateConcept.disjunction(cur_disjuncts | extra)
            trial_sc = make_scored(trial, row)
            if trial_sc.scores.recall <= current.scores.recall:
                continue
            if trial_sc.scores.metric(metric) < current.scores.metric(metric):
                continue
            pool[trial] = trial_sc
            cov_by_cand[trial] = row
            current, cur_row, cur_disjuncts = trial_sc, row, set(trial.disjuncts)

    ranked = sorted(pool.values(), key=key)
    return ranked[:top_k]


def exhaustive_induce(positives, negatives, index: MembershipIndex, *,
                      metric: str = "f1", max_conjuncts: int = 2,
                      max_disjuncts: int = 1, top_k: int = 7,
                      alpha: float = 0.5, cap: int = 10 ** 6) -> list[ScoredConcept]:
    """Complete enumeration of the bounded candidate space (test oracle).

    Scores every candidate with per-individual coverage recounts, so it is
    deliberately slow and desk-scale only: if the candidate space upper
    bound exceeds ``cap`` it refuses with :class:`CandidateSpaceError`.
    Sorting and tie-breaking follow the same contract as :func:`induce`.
    """
    pos, neg = check_example_sets(positives, negatives)
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")
    pos_ids = sorted(pos)
    neg_ids = sorted(neg)
    _require_known(index, pos_ids + neg_ids)
    closure = index.closure

    atom_ids = sorted({int(c) for i in pos_ids for c in index.inferred_of(i)})
    if not atom_ids:
        return []

    n_conj_bound = sum(comb(len(atom_ids), k) for k in range(1, max_conjuncts + 1))
    space = n_conj_bound
    if max_disjuncts > 1:
        space += sum(comb(n_conj_bound, d) for d in range(2, max_disjuncts + 1))
    if space > cap:
        raise CandidateSpaceError(
            f"candidate space bound {space} exceeds cap {cap}; shrink the fixture"
        )

    def recount(cand: CandidateConcept) -> ScoreSet:
        tp = sum(candidate_covers(cand, index, i) for i in pos_ids)
        fp = sum(candidate_covers(cand, index, i) for i in neg_ids)
        return ScoreSet.from_counts(tp, fp, len(pos_ids) - tp, len(neg_ids) - fp, alpha=alpha)

    scored: list[ScoredConcept] = []
    conj_pool: list[CandidateConcept] = []
    for size in range(1, max_conjuncts + 1):
        for combo in combinations(atom_ids, size):
            if size > 1 and any(
                _comparable(closure, a, b) for a, b in combinations(combo, 2)
            ):
                continue
            cand = CandidateConcept.conjunction(combo)
            s = recount(cand)
            if s.tp == 0:
                continue
            conj_pool.append(cand)
            scored.append(ScoredConcept(cand, cand.render(closure.concepts), s))

    if max_disjuncts > 1:
        for d in range(2, max_disjuncts + 1):
            for combo in combinations(conj_pool, d):
                cand = CandidateConcept.disjunction(
                    dj for c in combo for dj in c.disjuncts
                )
                if len(cand.disjuncts) != d:
                    continue
                s = recount(cand)
                scored.append(ScoredConcept(cand, cand.render(closure.concepts), s))

    scored.sort(key=_sort_key(index, metric))
    return scored[:top_k]


class ConceptInducer(BaseEstimator):
    """Estimator facade over :func:`induce`.

    The membership index is a constructor parameter so that `fit` takes only
    the example sets; after fitting, ``ranking_`` holds the scored candidates
    and ``best_`` the top one (None when there is no explanation).
    """

    def __init__(self, index: MembershipIndex | None = None, metric: str = "f1",
                 max_conjuncts: int = 2, max_disjuncts: int = 3,
                 beam_width: int = 64, top_k: int = 7, alpha: float = 0.5):
        self.index = index
        self.metric = metric
        self.max_conjuncts = max_conjuncts
        self.max_disjuncts = max_disjuncts
        self.beam_width = beam_width
        self.top_k = top_k
        self.alpha = alpha

    def fit(self, positives, negatives):
        if self.index is None:
            raise ValueError("ConceptInducer requires index=MembershipIndex(...)")
        self.ranking_ = induce(
            positives, negatives, self.index, metric=self.metric,
            max_conjuncts=self.max_conjuncts, max_disjuncts=self.max_disjuncts,
            beam_width=self.beam_width, top_k=self.top_k, alpha=self.alpha,
        )
        self.best_ = self.ranking_[0] if self.ranking_ else None
        return self

    def predict(self, individual_ids) -> np.ndarray:
        """Coverage of the top-ranked candidate over the given individuals."""
        if not hasattr(self, "ranking_"):
            raise ValueError("ConceptInducer is not fitted")
        if self.best_ is None:
            return np.zeros(len(list(individual_ids)), dtype=bool)
        return np.array(
            [candidate_covers(self.best_.candidate, self.index, i) for i in individual_ids],
            dtype=bool,
        )
