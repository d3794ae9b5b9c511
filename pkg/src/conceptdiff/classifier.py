"""Scene classifier whose errors get explained: binary logistic regression
over binary tag-presence vectors, k-fold evaluation, and confusion grouping.

The trainer is deliberately simple and fully deterministic: zero
initialization, full-batch gradient descent with Armijo backtracking, and a
gradient-infinity-norm stopping rule, so its numerics can be checked against
finite differences and its loss trajectory asserted monotone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin

from ._numeric import log1pexp, stable_sigmoid
from ._validation import check_aligned, check_binary_labels, check_binary_matrix
from .errors import ParseError, TrainingError


@dataclass(frozen=True)
class Item:
    """One classifiable item: id, scene label, and its object tags."""

    item_id: str
    label: str
    tags: tuple[str, ...]


def load_items(path) -> list[Item]:
    """Read ``item_id<TAB>scene_label<TAB>tag1;tag2;...`` lines."""
    items: list[Item] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip() or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise ParseError(path, line_no, f"expected 3 tab-separated fields, got {len(fields)}")
            item_id, label, tag_blob = fields
            if not item_id or not label:
                raise ParseError(path, line_no, "empty item id or label")
            tags = tuple(t for t in tag_blob.split(";") if t)
            items.append(Item(item_id, label, tags))
    return items


def prepare_dataset(items, target_label: str, min_tags: int = 6,
                    seed: int = 0) -> tuple[list[Item], np.ndarray]:
    """Filter sparse items and balance classes by seeded down-sampling.

    Items with fewer than ``min_tags`` tags are dropped. The majority side
    (target vs non-target) is down-sampled to the minority size with seeded
    uniform draws; survivors keep their original relative order. Raises
    :class:`TrainingError` when either class is empty after filtering.
    """
    kept = [it for it in items if len(it.tags) >= min_tags]
    pos_idx = [i for i, it in enumerate(kept) if it.label == target_label]
    neg_idx = [i for i, it in enumerate(kept) if it.label != target_label]
    if not pos_idx or not neg_idx:
        raise TrainingError(
            f"need both target and non-target items after the min_tags={min_tags} "
            f"filter (target={len(pos_idx)}, non-target={len(neg_idx)})"
        )
    rng = np.random.default_rng(seed)
    if len(pos_idx) > len(neg_idx):
        pos_idx = sorted(rng.choice(pos_idx, size=len(neg_idx), replace=False).tolist())
    elif len(neg_idx) > len(pos_idx):
        neg_idx = sorted(rng.choice(neg_idx, size=len(pos_idx), replace=False).tolist())
    chosen = sorted(pos_idx + neg_idx)
    selected = [kept[i] for i in chosen]
    y = np.array([1 if kept[i].label == target_label else 0 for i in chosen], dtype=np.int64)
    return selected, y


def build_vocabulary(tag_lists) -> dict[str, int]:
    """Dense index for every tag present, in sorted order (order-free)."""
    tags = sorted({t for tags in tag_lists for t in tags})
    return {t: i for i, t in enumerate(tags)}


def vectorize(tags, vocabulary: dict[str, int]) -> tuple[np.ndarray, int]:
    """Binary presence vector plus the number of unknown tags ignored.

    Duplicate tags set their bit once; idempotent by construction.
    """
    vec = np.zeros(len(vocabulary), dtype=np.float64)
    unknown = 0
    for t in set(tags):
        idx = vocabulary.get(t)
        if idx is None:
            unknown += 1
        else:
            vec[idx] = 1.0
    return vec, unknown


class TagVectorizer(BaseEstimator, TransformerMixin):
    """Fit a tag vocabulary, transform tag lists to binary matrices."""

    def fit(self, tag_lists, y=None):
        self.vocabulary_ = build_vocabulary(tag_lists)
        return self

    def transform(self, tag_lists):
        if not hasattr(self, "vocabulary_"):
            raise ValueError("TagVectorizer is not fitted")
        rows = []
        unknown = 0
        for tags in tag_lists:
            vec, miss = vectorize(tags, self.vocabulary_)
            rows.append(vec)
            unknown += miss
        self.unknown_tag_count_ = unknown
        if not rows:
            return np.zeros((0, len(self.vocabulary_)), dtype=np.float64)
        return np.vstack(rows)


def nll_loss_grad(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray,
                  l2: float) -> tuple[float, np.ndarray, float]:
    """Regularized negative log-likelihood and its gradient.

    loss = sum_i [log(1 + exp(z_i)) - y_i * z_i] + (l2 / 2) * ||w||^2
    with z = X @ w + b. The bias is not penalized.
    """
    z = X @ w + b
    loss = float(np.sum(log1pexp(z) - y * z) + 0.5 * l2 * np.dot(w, w))
    resid = stable_sigmoid(z) - y
    grad_w = X.T @ resid + l2 * w
    grad_b = float(np.sum(resid))
    return loss, grad_w, grad_b


class TagLogisticRegression(BaseEstimator, ClassifierMixin):
    """L2-regularized logistic regression, trained from scratch.

    Full-batch gradient descent from zero initialization with Armijo
    backtracking line search; stops when the gradient infinity norm drops
    below ``tol`` or after ``max_iter`` accepted steps. ``loss_curve_``
    records the regularized loss at every accepted iterate and is
    non-increasing by construction. Prediction thresholds probability at 0.5.
    """

    _ARMIJO = 1e-4
    _MIN_STEP = 1e-20

    def __init__(self, l2: float = 1.0, max_iter: int = 500, tol: float = 1e-8):
        self.l2 = l2
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, X, y):
        X = check_binary_matrix(X)
        y = check_binary_labels(y, n_rows=X.shape[0])
        if self.l2 < 0:
            raise ValueError("l2 must be non-negative")
        classes = np.unique(y)
        if len(classes) < 2:
            raise TrainingError("training data contains a single class")

        yf = y.astype(np.float64)
        w = np.zeros(X.shape[1], dtype=np.float64)
        b = 0.0
        loss, gw, gb = nll_loss_grad(w, b, X, yf, self.l2)
        if not np.isfinite(loss):
            raise TrainingError("non-finite loss at initialization")
        curve = [loss]
        converged = False
        steps = 0
        while steps < self.max_iter:
            gnorm = max(float(np.max(np.abs(gw))) if len(gw) else 0.0, abs(gb))
            if gnorm < self.tol:
                converged = True
                break
            gsq = float(np.dot(gw, gw) + gb * gb)
            step = 1.0
            while True:
                w_new = w - step * gw
                b_new = b - step * gb
                loss_new, gw_new, gb_new = nll_loss_grad(w_new, b_new, X, yf, self.l2)
                if np.isfinite(loss_new) and loss_new <= loss - self._ARMIJO * step * gsq:
                    break
                step *= 0.5
                if step < self._MIN_STEP:
                    break
            if step < self._MIN_STEP:
                break  # no acceptable descent step; stalled at numeric precision
            w, b, loss, gw, gb = w_new, b_new, loss_new, gw_new, gb_new
            curve.append(loss)
            steps += 1
        if not converged:
            gnorm = max(float(np.max(np.abs(gw))) if len(gw) else 0.0, abs(gb))
            converged = gnorm < self.tol

        self.coef_ = w
        self.intercept_ = b
        self.classes_ = np.array([0, 1])
        self.loss_curve_ = np.array(curve)
        self.n_iter_ = steps
        self.converged_ = converged
        return self

    def decision_function(self, X):
        X = check_binary_matrix(X)
        return X @ self.coef_ + self.intercept_

    def predict_proba(self, X):
        p1 = stable_sigmoid(self.decision_function(X))
        return np.column_stack([1.0 - p1, p1])

    def predict(self, X):
        return (stable_sigmoid(self.decision_function(X)) >= 0.5).astype(np.int64)


@dataclass(frozen=True)
class FoldPredictions:
    """Cross-validated per-item outputs, aligned to the input order."""

    proba: np.ndarray
    pred: np.ndarray
    fold: np.ndarray


def kfold_eval(X, y, k: int = 10, seed: int = 0, l2: float = 1.0,
               max_iter: int = 500, tol: float = 1e-8) -> FoldPredictions:
    """Evaluate with seeded k-fold cross-validation.

    Items are shuffled once under the seed and split into k near-equal folds
    (the first ``n mod k`` folds take one extra item). Each item is predicted
    exactly once, by the model trained on the other k-1 folds.
    """
    X = check_binary_matrix(X)
    y = check_binary_labels(y, n_rows=X.shape[0])
    n = X.shape[0]
    if k < 2:
        raise ValueError("k must be at least 2")
    if n < k:
        raise ValueError(f"{n} items cannot fill {k} folds; use a smaller k")

    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    base, extra = divmod(n, k)
    proba = np.full(n, np.nan)
    pred = np.full(n, -1, dtype=np.int64)
    fold_of = np.full(n, -1, dtype=np.int64)
    start = 0
    for f in range(k):
        size = base + (1 if f < extra else 0)
        test_idx = perm[start:start + size]
        start += size
        train_mask = np.ones(n, dtype=bool)
        train_mask[test_idx] = False
        model = TagLogisticRegression(l2=l2, max_iter=max_iter, tol=tol)
        model.fit(X[train_mask], y[train_mask])
        proba[test_idx] = model.predict_proba(X[test_idx])[:, 1]
        pred[test_idx] = model.predict(X[test_idx])
        fold_of[test_idx] = f
    return FoldPredictions(proba=proba, pred=pred, fold=fold_of)


@dataclass(frozen=True)
class ConfusionGroups:
    """TP/TN/FP/FN item-id partition of an evaluated set."""

    tp: frozenset
    tn: frozenset
    fp: frozenset
    fn: frozenset

    def as_dict(self) -> dict[str, frozenset]:
        return {"tp": self.tp, "tn": self.tn, "fp": self.fp, "fn": self.fn}


def confusion_groups(predictions, truths, ids=None) -> ConfusionGroups:
    """Partition items by prediction vs ground truth.

    ``ids`` names the items (defaults to positional indices); the four groups
    are disjoint and jointly cover every evaluated item.
    """
    pred, truth = check_aligned(predictions, truths, names=("predictions", "truths"))
    pred = check_binary_labels(pred, name="predictions")
    truth = check_binary_labels(truth, name="truths")
    if ids is None:
        ids = np.arange(len(pred))
    ids = list(ids)
    if len(ids) != len(pred):
        raise ValueError("ids must align with predictions")
    groups = {"tp": set(), "tn": set(), "fp": set(), "fn": set()}
    for item, p, t in zip(ids, pred, truth):
        if t == 1:
            groups["tp" if p == 1 else "fn"].add(item)
        else:
            groups["fp" if p == 1 else "tn"].add(item)
    return ConfusionGroups(
        tp=frozenset(groups["tp"]), tn=frozenset(groups["tn"]),
        fp=frozenset(groups["fp"]), fn=frozenset(groups["fn"]),
    )


def sample_group(group, cap: int = 9, seed: int = 0) -> list:
    """Up to ``cap`` members drawn uniformly without replacement, seeded.

    The group is sorted before drawing so the result does not depend on set
    iteration order; the returned list is in draw order.
    """
    members = sorted(group)
    if len(members) <= cap:
        take = len(members)
    else:
        take = cap
    if take == 0:
        return []
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(members), size=take, replace=False)
    return [members[i] for i in idx]
