"""Deterministic reductions.

Every sum in the package goes through :func:`math.fsum`, which returns the
correctly rounded value of the exact sum. The result therefore does not
depend on summation order, chunking or thread count.
"""

from __future__ import annotations

import math
from collections.abc import Iterable

import numpy as np


def csum(values: Iterable[float] | np.ndarray) -> float:
    if isinstance(values, np.ndarray):
        values = values.ravel().tolist()
    return math.fsum(values)


def row_sums(matrix: np.ndarray, rows: range | None = None) -> list[float]:
    """Exactly rounded sums of each row of a 2-D array."""
    data = matrix.tolist() if rows is None else matrix[rows.start:rows.stop].tolist()
    return [math.fsum(r) for r in data]


def dot(a: np.ndarray, b: np.ndarray) -> float:
    return math.fsum((np.asarray(a, dtype=float) * np.asarray(b, dtype=float)).tolist())
