"""Assembly of the three explanation kinds and the concreteness filter.

An explanation is an ordered list of at most seven unique concept labels.
Machine explanations come from an induction ranking; human gold-standard
explanations pool three raters' lists by agreement; semi-random baselines
reshuffle the two example sets before induction so the resulting explanation
is plausible but uninformative.
"""

from __future__ import annotations

import csv
import logging
import math
import re
from dataclasses import dataclass, replace

import numpy as np

from .errors import InsufficientConceptsError, ParseError

logger = logging.getLogger(__name__)

MAX_CONCEPTS = 7
KINDS = ("induced", "human_gold", "semi_random")

_WORD_RE = re.compile(r"[A-Za-z]+")


@dataclass(frozen=True)
class Explanation:
    """Up to seven unique concept labels plus provenance flags."""

    concepts: tuple[str, ...]
    kind: str
    metric: str | None = None
    seed: int | None = None
    filtered: bool = False
    alphabetized: bool = False
    short: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown explanation kind {self.kind!r}")
        if len(self.concepts) > MAX_CONCEPTS:
            raise ValueError(f"explanations carry at most {MAX_CONCEPTS} concepts")
        if len(set(self.concepts)) != len(self.concepts):
            raise ValueError("explanation labels must be unique")
        if self.alphabetized:
            low = [c.casefold() for c in self.concepts]
            if low != sorted(low):
                raise ValueError("alphabetized flag set but labels are not sorted")

    def to_line(self) -> str:
        metric = self.metric if self.metric is not None else "-"
        seed = str(self.seed) if self.seed is not None else "-"
        return f"{self.kind}\t{metric}\t{seed}\t" + ";".join(self.concepts)

    def to_json_obj(self) -> dict:
        return {
            "kind": self.kind,
            "metric": self.metric,
            "seed": self.seed,
            "filtered": self.filtered,
            "alphabetized": self.alphabetized,
            "short": self.short,
            "concepts": list(self.concepts),
        }


class ConcretenessTable:
    """Word -> concreteness rating, case-insensitive after trimming."""

    def __init__(self, ratings: dict[str, float]):
        self._ratings = {k.strip().casefold(): float(v) for k, v in ratings.items()}

    def __len__(self) -> int:
        return len(self._ratings)

    def lookup(self, word: str) -> float | None:
        return self._ratings.get(word.strip().casefold())

    def rating_for_label(self, label: str) -> float | None:
        """Rating for a label, averaging constituent words when needed.

        A label found directly uses its own rating. Otherwise its alphabetic
        tokens are looked up individually and the mean is returned only when
        every token is present; any miss makes the label unrated (None).
        """
        direct = self.lookup(label)
        if direct is not None:
            return direct
        words = _WORD_RE.findall(label)
        if not words:
            return None
        ratings = [self.lookup(w) for w in words]
        if any(r is None for r in ratings):
            return None
        return float(np.mean(ratings))


def load_concreteness(path) -> ConcretenessTable:
    """Load a ``word,rating`` CSV (header required; extra columns ignored).

    Duplicate words keep their first rating with a warning. A non-numeric or
    non-finite rating raises :class:`ParseError` naming the line.
    """
    ratings: dict[str, float] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(path, 1, "missing header row") from None
        cols = [h.strip().casefold() for h in header]
        if "word" not in cols or "rating" not in cols:
            raise ParseError(path, 1, "header must contain 'word' and 'rating' columns")
        wi, ri = cols.index("word"), cols.index("rating")
        for line_no, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) <= max(wi, ri):
                raise ParseError(path, line_no, f"expected at least {max(wi, ri) + 1} columns")
            word = row[wi].strip()
            try:
                rating = float(row[ri])
            except ValueError:
                raise ParseError(path, line_no, f"non-numeric rating {row[ri]!r}") from None
            if not math.isfinite(rating):
                raise ParseError(path, line_no, f"non-finite rating {row[ri]!r}")
            key = word.casefold()
            if key in ratings:
                logger.warning("%s:%d: duplicate word %r keeps first rating", path, line_no, word)
                continue
            ratings[key] = rating
    return ConcretenessTable(ratings)


def assemble_machine_explanation(ranked, k: int = MAX_CONCEPTS,
                                 table: ConcretenessTable | None = None,
                                 threshold: float = 3.5, kind: str = "induced",
                                 metric: str | None = None,
                                 seed: int | None = None) -> Explanation:
    """Take the first `k` unique surviving labels of a ranking.

    Walks the ranking in order, skipping labels already taken and, when a
    concreteness table is supplied, labels rated strictly below `threshold`
    or absent from the table (a rating of exactly `threshold` is kept).
    Survivor order is never changed. Raises
    :class:`InsufficientConceptsError` when nothing survives.
    """
    if not 1 <= k <= MAX_CONCEPTS:
        raise ValueError(f"k must be in 1..{MAX_CONCEPTS}")
    taken: list[str] = []
    seen: set[str] = set()
    for entry in ranked:
        label = getattr(entry, "label", entry)
        if label in seen:
            continue
        seen.add(label)
        if table is not None:
            rating = table.rating_for_label(label)
            if rating is None or rating < threshold:
                continue
        taken.append(label)
        if len(taken) == k:
            break
    if not taken:
        raise InsufficientConceptsError(
            "no concept survived deduplication and concreteness filtering"
        )
    return Explanation(
        concepts=tuple(taken),
        kind=kind,
        metric=metric,
        seed=seed,
        filtered=table is not None,
        short=len(taken) < k,
    )


def semi_random_baseline(set_a, set_b, seed: int) -> tuple[list, list]:
    """Reshuffle two item lists into new groups of the original sizes.

    The concatenation (A then B) is permuted with a seeded Fisher-Yates
    shuffle; the first |A| items become A' and the rest B', so the multiset
    union is preserved exactly.
    """
    a, b = list(set_a), list(set_b)
    if not a or not b:
        raise ValueError("both sets must be nonempty")
    combined = a + b
    rng = np.random.default_rng(seed)
    for i in range(len(combined) - 1, 0, -1):
        j = int(rng.integers(0, i + 1))
        combined[i], combined[j] = combined[j], combined[i]
    return combined[: len(a)], combined[len(a):]


@dataclass(frozen=True)
class RaterLists:
    """Three independent rater lists of 7 to 10 concept labels each."""

    lists: tuple[tuple[str, ...], ...]

    def __post_init__(self):
        if len(self.lists) != 3:
            raise ValueError("exactly three rater lists are required")
        for i, lst in enumerate(self.lists):
            if not 7 <= len(lst) <= 10:
                raise ValueError(f"rater {i + 1} supplied {len(lst)} concepts; expected 7..10")


def pool_gold_standard(raters: RaterLists, seed: int) -> Explanation:
    """Pool rater concepts by agreement into a gold-standard explanation.

    Tier 1 holds concepts named by all three raters, tier 2 those named by
    exactly two (both in lexicographic order), and the remainder is filled
    with seeded uniform draws without replacement from the concepts named
    once, until seven unique labels are reached. Label comparison is
    case-insensitive after trimming; the displayed spelling is the
    lexicographically smallest variant observed, so the result does not
    depend on the order in which the rater lists are supplied. With fewer
    than seven distinct concepts overall, all of them are returned and the
    explanation is flagged short.
    """
    per_rater = [
        {lab.strip().casefold() for lab in lst if lab.strip()} for lst in raters.lists
    ]
    display: dict[str, str] = {}
    for lst in raters.lists:
        for lab in lst:
            stripped = lab.strip()
            if not stripped:
                continue
            key = stripped.casefold()
            if key not in display or stripped < display[key]:
                display[key] = stripped

    counts = {key: sum(key in s for s in per_rater) for key in display}
    tier1 = sorted(k for k, c in counts.items() if c == 3)
    tier2 = sorted(k for k, c in counts.items() if c == 2)
    pool = sorted(k for k, c in counts.items() if c == 1)

    chosen = tier1 + tier2
    rng = np.random.default_rng(seed)
    remaining = list(pool)
    while len(chosen) < MAX_CONCEPTS and remaining:
        pick = int(rng.integers(0, len(remaining)))
        chosen.append(remaining.pop(pick))
    chosen = chosen[:MAX_CONCEPTS]
    return Explanation(
        concepts=tuple(display[k] for k in chosen),
        kind="human_gold",
        seed=seed,
        short=len(chosen) < MAX_CONCEPTS,
    )


def alphabetize(explanation: Explanation) -> Explanation:
    """Sort labels ascending case-insensitively and set the flag (idempotent)."""
    ordered = tuple(sorted(explanation.concepts, key=str.casefold))
    return replace(explanation, concepts=ordered, alphabetized=True)
