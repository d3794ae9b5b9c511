"""Statistical evaluation of explanation preferences and discrimination.

Two estimators live here:

* A Bradley-Terry fit of pairwise win counts. One item is pinned to ability
  zero as the reference; the remaining log-abilities maximize the likelihood
  P(a beats b) = sigma(lambda_a - lambda_b) via damped Newton iteration,
  optionally ridge-penalized to handle quasi-separated tallies.
* Point-estimate signal detection: d' = z(H) - z(F) and bias
  c = -(z(H) + z(F)) / 2, with the log-linear (+0.5 / +1) correction.

The normal quantile z is implemented with Wichura's AS 241 rational
approximations (absolute error well below 1e-9 in double precision).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from ._numeric import stable_sigmoid
from .errors import (
    ConvergenceError,
    DegenerateRateError,
    DisconnectedTallyError,
    ParseError,
    QuasiSeparationError,
    UnknownItemError,
)


@dataclass(frozen=True)
class PairwiseTally:
    """Win-count matrix: wins[a, b] = times item a was chosen over item b."""

    items: tuple[str, ...]
    wins: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.wins)
        n = len(self.items)
        if w.shape != (n, n):
            raise ValueError(f"wins must be {n}x{n}, got {w.shape}")
        if (w < 0).any():
            raise ValueError("win counts must be non-negative")
        if np.diagonal(w).any():
            raise ValueError("diagonal win counts must be zero")
        if len(set(self.items)) != n:
            raise ValueError("item names must be unique")

    @classmethod
    def from_pairs(cls, pairs) -> "PairwiseTally":
        """Build from (item_a, item_b, wins_a, wins_b) records (accumulating)."""
        names: list[str] = []
        index: dict[str, int] = {}
        for a, b, _, _ in pairs:
            for name in (a, b):
                if name not in index:
                    index[name] = len(names)
                    names.append(name)
        wins = np.zeros((len(names), len(names)), dtype=np.int64)
        for a, b, wa, wb in pairs:
            ia, ib = index[a], index[b]
            if ia == ib:
                raise ValueError(f"item {a!r} compared with itself")
            wins[ia, ib] += int(wa)
            wins[ib, ia] += int(wb)
        return cls(items=tuple(names), wins=wins)

    def index_of(self, item: str) -> int:
        try:
            return self.items.index(item)
        except ValueError:
            raise UnknownItemError(f"unknown item {item!r}") from None


@dataclass(frozen=True)
class BTFit:
    """Fitted log-abilities with the reference pinned at zero."""

    items: tuple[str, ...]
    abilities: np.ndarray
    reference: str
    converged: bool
    loglik: float
    n_iter: int

    def ability(self, item: str) -> float:
        try:
            return float(self.abilities[self.items.index(item)])
        except ValueError:
            raise UnknownItemError(f"unknown item {item!r}") from None


def _bt_loglik(lam: np.ndarray, wins: np.ndarray) -> float:
    diff = lam[:, None] - lam[None, :]
    # log sigma(diff) = -log(1 + exp(-diff)), summed over observed wins
    return float(np.sum(wins * -np.logaddexp(0.0, -diff)))


def _check_connected(tally: PairwiseTally, ref_idx: int):
    n = len(tally.items)
    paired = (tally.wins + tally.wins.T) > 0
    seen = np.zeros(n, dtype=bool)
    stack = [ref_idx]
    seen[ref_idx] = True
    while stack:
        node = stack.pop()
        for nb in np.flatnonzero(paired[node]):
            if not seen[nb]:
                seen[nb] = True
                stack.append(nb)
    if not seen.all():
        raise DisconnectedTallyError([tally.items[i] for i in np.flatnonzero(~seen)])


def _strongly_connected(beats: np.ndarray) -> bool:
    n = beats.shape[0]
    if n == 1:
        return True

    def reach(adj):
        seen = np.zeros(n, dtype=bool)
        seen[0] = True
        stack = [0]
        while stack:
            node = stack.pop()
            for nb in np.flatnonzero(adj[node]):
                if not seen[nb]:
                    seen[nb] = True
                    stack.append(nb)
        return seen.all()

    return reach(beats) and reach(beats.T)


def fit_bradley_terry(tally: PairwiseTally, reference: str, penalty: float = 0.0,
                      tol: float = 1e-8, max_iter: int = 10000) -> BTFit:
    """Maximize the Bradley-Terry likelihood with the reference pinned at 0.

    ``penalty`` adds a ridge term -(penalty/2) * sum(lambda^2) to the
    objective, which keeps quasi-separated tallies (some item never losing
    or never winning) finite. At penalty 0 such tallies have no finite
    maximizer, so they are rejected up front with
    :class:`QuasiSeparationError` (the existence condition is strong
    connectivity of the beats digraph). A disconnected comparison graph is
    rejected with the unreachable items listed. Convergence means the
    penalized score's infinity norm dropped below ``tol``.
    """
    if penalty < 0:
        raise ValueError("penalty must be non-negative")
    ref_idx = tally.index_of(reference)
    wins = np.asarray(tally.wins, dtype=np.float64)
    n = len(tally.items)
    _check_connected(tally, ref_idx)
    if penalty == 0.0 and not _strongly_connected(tally.wins > 0):
        raise QuasiSeparationError(
            "tally contains a zero win cell pattern with no finite maximum "
            "likelihood fit; rerun with penalty > 0"
        )

    free = np.array([i for i in range(n) if i != ref_idx])
    lam = np.zeros(n, dtype=np.float64)
    n_pair = wins + wins.T

    def penalized(l):
        return _bt_loglik(l, wins) - 0.5 * penalty * float(np.dot(l, l))

    obj = penalized(lam)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        p = stable_sigmoid(lam[:, None] - lam[None, :])
        grad = wins.sum(axis=1) - (n_pair * p).sum(axis=1) - penalty * lam
        g = grad[free]
        if float(np.max(np.abs(g))) < tol:
            converged = True
            break
        w = n_pair * p * (1.0 - p)
        hess = w.copy()
        np.fill_diagonal(hess, 0.0)
        diag = -w.sum(axis=1) - penalty
        np.fill_diagonal(hess, diag)
        h = hess[np.ix_(free, free)]
        try:
            direction = -np.linalg.solve(h, g)
        except np.linalg.LinAlgError:
            direction = g  # singular curvature; fall back to gradient ascent
        slope = float(g @ direction)
        if slope <= 0:  # not an ascent direction; use the gradient instead
            direction = g
            slope = float(g @ g)
        step = 1.0
        for _ in range(60):
            trial = lam.copy()
            trial[free] = lam[free] + step * direction
            obj_new = penalized(trial)
            if np.isfinite(obj_new) and obj_new >= obj + 1e-4 * step * slope:
                lam = trial
                obj = obj_new
                break
            step *= 0.5
        else:
            break  # no improving step at any damping; stalled

    if not converged:
        p = stable_sigmoid(lam[:, None] - lam[None, :])
        grad = wins.sum(axis=1) - (n_pair * p).sum(axis=1) - penalty * lam
        converged = float(np.max(np.abs(grad[free]))) < tol
    if not converged:
        has_zero_cell = bool((np.asarray(tally.wins)[n_pair > 0] == 0).any())
        hint = "; the tally has zero win cells, try a larger penalty" if has_zero_cell else ""
        raise ConvergenceError(
            f"Bradley-Terry fit did not converge within {max_iter} iterations{hint}"
        )

    return BTFit(
        items=tally.items,
        abilities=lam.copy(),
        reference=reference,
        converged=True,
        loglik=_bt_loglik(lam, wins),
        n_iter=it,
    )


def choice_probability(fit: BTFit, a: str, b: str) -> float:
    """Model probability that `a` is chosen over `b`."""
    return float(stable_sigmoid(np.array([fit.ability(a) - fit.ability(b)]))[0])


# --- signal detection -----------------------------------------------------

# Wichura (1988), algorithm AS 241, PPND16 coefficients.
_A = (3.3871328727963666080e0, 1.3314166789178437745e2, 1.9715909503065514427e3,
      1.3731693765509461125e4, 4.5921953931549871457e4, 6.7265770927008700853e4,
      3.3430575583588128105e4, 2.5090809287301226727e3)
_B = (1.0, 4.2313330701600911252e1, 6.8718700749205790830e2, 5.3941960214247511077e3,
      2.1213794301586595867e4, 3.9307895800092710610e4, 2.8729085735721942674e4,
      5.2264952788528545610e3)
_C = (1.42343711074968357734e0, 4.63033784615654529590e0, 5.76949722146069140550e0,
      3.64784832476320460504e0, 1.27045825245236838258e0, 2.41780725177450611770e-1,
      2.27238449892691845833e-2, 7.74545014278341407640e-4)
_D = (1.0, 2.05319162663775882187e0, 1.67638483018380384940e0, 6.89767334985100004550e-1,
      1.48103976427480074590e-1, 1.51986665636164571966e-2, 5.47593808499534494600e-4,
      1.05075007164441684324e-9)
_E = (6.65790464350110377720e0, 5.46378491116411436990e0, 1.78482653991729133580e0,
      2.96560571828504891230e-1, 2.65321895265761230930e-2, 1.24266094738807843860e-3,
      2.71155556874348757815e-5, 2.01033439929228813265e-7)
_F = (1.0, 5.99832206555887937690e-1, 1.36929880922735805310e-1, 1.48753612908506148525e-2,
      7.86869131145613259100e-4, 1.84631831751005468180e-5, 1.42151175831644588870e-7,
      2.04426310338993978564e-15)


def _poly(coefs, x: float) -> float:
    acc = 0.0
    for c in reversed(coefs):
        acc = acc * x + c
    return acc


def normal_quantile(p: float) -> float:
    """Inverse standard normal CDF on (0, 1), via AS 241 (|err| < 1e-9)."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie strictly inside (0, 1), got {p}")
    q = p - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        return q * _poly(_A, r) / _poly(_B, r)
    r = p if q < 0 else 1.0 - p
    r = math.sqrt(-math.log(r))
    if r <= 5.0:
        r -= 1.6
        val = _poly(_C, r) / _poly(_D, r)
    else:
        r -= 5.0
        val = _poly(_E, r) / _poly(_F, r)
    return -val if q < 0 else val


@dataclass(frozen=True)
class SDTEstimate:
    """Point estimates of discriminability d' and bias c."""

    d_prime: float
    c: float
    hits: int
    misses: int
    false_alarms: int
    correct_rejections: int
    corrected: bool


def sdt_estimate(hits: int, misses: int, false_alarms: int, correct_rejections: int,
                 correction: str = "loglinear") -> SDTEstimate:
    """Estimate d' and c from a 2x2 choice table.

    With ``correction="loglinear"`` every cell gains 0.5 and every
    denominator 1, which keeps the rates strictly inside (0, 1). With
    ``correction="none"`` raw rates are used, and a rate of exactly 0 or 1
    raises :class:`DegenerateRateError` since z would be infinite.
    """
    if correction not in ("loglinear", "none"):
        raise ValueError(f"unknown correction {correction!r}")
    counts = (hits, misses, false_alarms, correct_rejections)
    if any(c < 0 for c in counts):
        raise ValueError("counts must be non-negative")
    if hits + misses == 0 or false_alarms + correct_rejections == 0:
        raise ValueError("both signal and noise trials must be present")

    if correction == "loglinear":
        h = (hits + 0.5) / (hits + misses + 1.0)
        f = (false_alarms + 0.5) / (false_alarms + correct_rejections + 1.0)
        corrected = True
    else:
        h = hits / (hits + misses)
        f = false_alarms / (false_alarms + correct_rejections)
        if h in (0.0, 1.0) or f in (0.0, 1.0):
            raise DegenerateRateError(
                "a rate of exactly 0 or 1 is not invertible; "
                "use correction='loglinear'"
            )
        corrected = False

    zh = normal_quantile(h)
    zf = normal_quantile(f)
    return SDTEstimate(
        d_prime=zh - zf,
        c=-(zh + zf) / 2.0,
        hits=hits,
        misses=misses,
        false_alarms=false_alarms,
        correct_rejections=correct_rejections,
        corrected=corrected,
    )


# --- file formats ----------------------------------------------------------

def load_tally_rows(path) -> list[tuple[str, str, int, int]]:
    """Read a ``item_a,item_b,wins_a,wins_b`` CSV (header required)."""
    rows: list[tuple[str, str, int, int]] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(row for row in fh if not row.startswith("#"))
        try:
            header = [h.strip().casefold() for h in next(reader)]
        except StopIteration:
            raise ParseError(path, 1, "missing header row") from None
        expected = ["item_a", "item_b", "wins_a", "wins_b"]
        if header[:4] != expected:
            raise ParseError(path, 1, f"header must start with {','.join(expected)}")
        for line_no, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) < 4:
                raise ParseError(path, line_no, "expected 4 columns")
            a, b = row[0].strip(), row[1].strip()
            try:
                wa, wb = int(row[2]), int(row[3])
            except ValueError:
                raise ParseError(path, line_no, "win counts must be integers") from None
            if not a or not b:
                raise ParseError(path, line_no, "empty item name")
            rows.append((a, b, wa, wb))
    return rows


def split_components(rows) -> list[list[tuple[str, str, int, int]]]:
    """Group tally rows into connected components, in first-appearance order.

    A file may carry many independent tallies (one per comparison set); each
    component is fitted on its own.
    """
    parent: dict[str, str] = {}

    def find(x: str) -> str:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b, _, _ in rows:
        parent.setdefault(a, a)
        parent.setdefault(b, b)
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[rb] = ra

    order: dict[str, int] = {}
    grouped: dict[str, list] = {}
    for row in rows:
        root = find(row[0])
        if root not in order:
            order[root] = len(order)
            grouped[root] = []
        grouped[root].append(row)
    return [grouped[r] for r in sorted(order, key=order.get)]


def load_sdt_rows(path) -> list[tuple[int, int, int, int]]:
    """Read a ``hits,misses,false_alarms,correct_rejections`` CSV."""
    rows: list[tuple[int, int, int, int]] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(row for row in fh if not row.startswith("#"))
        try:
            header = [h.strip().casefold() for h in next(reader)]
        except StopIteration:
            raise ParseError(path, 1, "missing header row") from None
        expected = ["hits", "misses", "false_alarms", "correct_rejections"]
        if header[:4] != expected:
            raise ParseError(path, 1, f"header must start with {','.join(expected)}")
        for line_no, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) < 4:
                raise ParseError(path, line_no, "expected 4 columns")
            try:
                rows.append(tuple(int(v) for v in row[:4]))
            except ValueError:
                raise ParseError(path, line_no, "counts must be integers") from None
    return rows
