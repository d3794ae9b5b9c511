"""Input-validation helpers shared by the estimators and operations."""

from __future__ import annotations

import numpy as np


def check_example_sets(positives, negatives):
    """Validate and freeze positive/negative example id sets.

    Both sets must be nonempty and disjoint. Returns them as frozensets.
    """
    p = frozenset(int(i) for i in positives)
    n = frozenset(int(i) for i in negatives)
    if not p:
        raise ValueError("positive example set is empty")
    if not n:
        raise ValueError("negative example set is empty")
    overlap = p & n
    if overlap:
        raise ValueError(f"positive and negative sets overlap: {sorted(overlap)[:5]}")
    return p, n


def check_binary_matrix(X, name="X"):
    """Coerce to a finite 2-D float64 array with entries in {0, 1}."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {X.shape}")
    if not np.isfinite(X).all():
        raise ValueError(f"{name} contains non-finite values")
    if not np.isin(X, (0.0, 1.0)).all():
        raise ValueError(f"{name} must contain only 0/1 entries")
    return X


def check_binary_labels(y, n_rows=None, name="y"):
    """Coerce to a 1-D int array of 0/1 labels, optionally length-checked."""
    y = np.asarray(y)
    if y.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {y.shape}")
    if not np.isin(y, (0, 1)).all():
        raise ValueError(f"{name} must contain only 0/1 labels")
    if n_rows is not None and len(y) != n_rows:
        raise ValueError(f"{name} has {len(y)} entries, expected {n_rows}")
    return y.astype(np.int64)


def check_aligned(a, b, names=("a", "b")):
    """Require two 1-D sequences of equal length; returns them as arrays."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(
            f"{names[0]} and {names[1]} must be 1-D and aligned, "
            f"got shapes {a.shape} and {b.shape}"
        )
    return a, b
