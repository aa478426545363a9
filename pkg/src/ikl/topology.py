"""Lazy infinite coupling matrices.

A coupling matrix is never materialized. Each family knows its entries,
row sums, tail sums and norms in closed form; finite blocks are built on
demand for a truncation size ``N``. Indices are 1-based throughout the
public API.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple, Union

import numpy as np
from scipy.special import zeta
from scipy.stats import qmc

from ._reduce import csum
from .errors import DivergentRow

DEFAULT_SENDER_EPSILON = 2.0**-20


def _check_index(*idx: int) -> None:
    for i in idx:
        if i < 1:
            raise IndexError(f"indices are 1-based, got {i}")


# ---------------------------------------------------------------------------
# positive sequences


@dataclass(frozen=True)
class Geometric:
    """a_i = scale * ratio**(i-1)."""

    ratio: float
    scale: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 < self.ratio < 1.0:
            raise ValueError(f"Geometric ratio must lie in (0, 1), got {self.ratio}")
        if not (self.scale > 0.0 and math.isfinite(self.scale)):
            raise ValueError(f"Geometric scale must be positive, got {self.scale}")

    support = None

    def term(self, i: int) -> float:
        _check_index(i)
        return self.scale * self.ratio ** (i - 1)

    def total(self) -> float:
        return self.scale / (1.0 - self.ratio)

    def tail(self, n: int) -> float:
        return self.scale * self.ratio**n / (1.0 - self.ratio)

    def max_term(self, n: int | None = None) -> float:
        return self.scale

    def power_total(self, p: float) -> float:
        return self.scale**p / (1.0 - self.ratio**p)

    def scaled(self, c: float) -> Geometric:
        return Geometric(self.ratio, self.scale * c)


@dataclass(frozen=True)
class PowerLaw:
    """a_i = scale * i**(-exponent), exponent > 1.

    Sums and tails use the Hurwitz zeta function, sum_{k>=0} (k+q)**(-s).
    """

    exponent: float
    scale: float = 1.0

    def __post_init__(self) -> None:
        if not self.exponent > 1.0:
            raise ValueError(f"PowerLaw exponent must exceed 1, got {self.exponent}")
        if not (self.scale > 0.0 and math.isfinite(self.scale)):
            raise ValueError(f"PowerLaw scale must be positive, got {self.scale}")

    support = None

    def term(self, i: int) -> float:
        _check_index(i)
        return self.scale * float(i) ** (-self.exponent)

    def total(self) -> float:
        return self.scale * float(zeta(self.exponent, 1.0))

    def tail(self, n: int) -> float:
        return self.scale * float(zeta(self.exponent, n + 1.0))

    def max_term(self, n: int | None = None) -> float:
        return self.scale

    def power_total(self, p: float) -> float:
        return self.scale**p * float(zeta(self.exponent * p, 1.0))

    def scaled(self, c: float) -> PowerLaw:
        return PowerLaw(self.exponent, self.scale * c)


@dataclass(frozen=True)
class Explicit:
    """Finitely many positive terms, zero beyond."""

    values: tuple[float, ...]

    def __post_init__(self) -> None:
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise ValueError("Explicit sequence needs at least one value")
        if not all(v > 0.0 and math.isfinite(v) for v in vals):
            raise ValueError("Explicit values must be finite and positive")
        object.__setattr__(self, "values", vals)

    @property
    def support(self) -> int:
        return len(self.values)

    def term(self, i: int) -> float:
        _check_index(i)
        return self.values[i - 1] if i <= len(self.values) else 0.0

    def total(self) -> float:
        return csum(self.values)

    def tail(self, n: int) -> float:
        return csum(self.values[n:])

    def max_term(self, n: int | None = None) -> float:
        vals = self.values if n is None else self.values[:n]
        return max(vals) if vals else 0.0

    def power_total(self, p: float) -> float:
        return csum([v**p for v in self.values])

    def scaled(self, c: float) -> Explicit:
        return Explicit(tuple(v * c for v in self.values))


PositiveSequence = Union[Geometric, PowerLaw, Explicit]


def sequence_terms(a: PositiveSequence, n: int) -> np.ndarray:
    """First ``n`` terms as an array (index 1 at position 0)."""
    return np.array([a.term(i) for i in range(1, n + 1)], dtype=float)


# ---------------------------------------------------------------------------
# coupling matrices


class LowerRowSum(NamedTuple):
    """inf_i of the row sums, plus whether (F3) fails on the infinite index set."""

    value: float
    f3_fails_in_limit: bool


class CouplingMatrix(ABC):
    """Nonnegative infinite matrix with finite sup row sum."""

    symmetric: bool = False
    summable: bool = False  # ||K||_{1,1} < inf

    @abstractmethod
    def entry(self, i: int, j: int) -> float: ...

    @abstractmethod
    def row_sum(self, i: int) -> float: ...

    @abstractmethod
    def row_tails(self, n: int) -> np.ndarray:
        """sum_{j>n} k_ij for i = 1..n."""

    @abstractmethod
    def norm_inf_one(self) -> float: ...

    @abstractmethod
    def norm_minus_inf_one(self, restrict_to: int | None = None) -> LowerRowSum: ...

    @abstractmethod
    def _norm_p_finite(self, p: float) -> float: ...

    def norm_p_one(self, p: float) -> float:
        if p < 1:
            raise ValueError(f"p must be >= 1, got {p}")
        if math.isinf(p):
            return self.norm_inf_one()
        return self._norm_p_finite(float(p))

    def tail_bound(self, n: int) -> float:
        """sup_i sum_{j>n} k_ij: RHS error from dropping indices beyond n.

        The supremum runs over every row, not only the retained ones, which
        keeps the bound nonincreasing in n.
        """
        if n < 1:
            raise ValueError("truncation must be >= 1")
        return float(np.max(self.row_tails(n)))

    def tilde_kappa(self) -> PositiveSequence | None:
        """Constructive (F2) witness, or ``None`` when none is known."""
        return None

    def block(self, n: int) -> np.ndarray:
        """Read-only n x n truncation."""
        return _block(self, n)

    def row_sums(self, n: int) -> np.ndarray:
        return np.array([self.row_sum(i) for i in range(1, n + 1)], dtype=float)


@lru_cache(maxsize=64)
def _block(k: CouplingMatrix, n: int) -> np.ndarray:
    out = np.array([[k.entry(i, j) for j in range(1, n + 1)] for i in range(1, n + 1)], dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class ProductSummable(CouplingMatrix):
    """k_ij = a_i * a_j with a summable."""

    a: PositiveSequence
    symmetric = True
    summable = True

    def entry(self, i: int, j: int) -> float:
        return self.a.term(i) * self.a.term(j)

    def row_sum(self, i: int) -> float:
        return self.a.term(i) * self.a.total()

    def row_tails(self, n: int) -> np.ndarray:
        return sequence_terms(self.a, n) * self.a.tail(n)

    def norm_inf_one(self) -> float:
        return self.a.max_term() * self.a.total()

    def norm_minus_inf_one(self, restrict_to: int | None = None) -> LowerRowSum:
        if restrict_to is None:
            return LowerRowSum(0.0, True)
        return LowerRowSum(float(np.min(sequence_terms(self.a, restrict_to))) * self.a.total(), True)

    def _norm_p_finite(self, p: float) -> float:
        return self.a.total() * self.a.power_total(p) ** (1.0 / p)

    def tail_bound(self, n: int) -> float:
        if n < 1:
            raise ValueError("truncation must be >= 1")
        return self.a.max_term() * self.a.tail(n)

    def tilde_kappa(self) -> PositiveSequence:
        return self.a.scaled(1.0 / (self.a.total() + 1.0))


@dataclass(frozen=True)
class GeometricCross(CouplingMatrix):
    """k_ij = base**(-(i+j)); row i sums to base**(-i) / (base - 1)."""

    base: float
    symmetric = True
    summable = True

    def __post_init__(self) -> None:
        if not self.base > 1.0:
            raise ValueError(f"GeometricCross base must exceed 1, got {self.base}")

    def entry(self, i: int, j: int) -> float:
        _check_index(i, j)
        return self.base ** (-(i + j))

    def row_sum(self, i: int) -> float:
        _check_index(i)
        return self.base ** (-i) / (self.base - 1.0)

    def row_tails(self, n: int) -> np.ndarray:
        b = self.base
        return np.array([b ** (-i) * b ** (-n) / (b - 1.0) for i in range(1, n + 1)])

    def norm_inf_one(self) -> float:
        return self.row_sum(1)

    def norm_minus_inf_one(self, restrict_to: int | None = None) -> LowerRowSum:
        if restrict_to is None:
            return LowerRowSum(0.0, True)
        return LowerRowSum(self.row_sum(restrict_to), True)

    def _norm_p_finite(self, p: float) -> float:
        q = self.base ** (-p)
        return (q / (1.0 - q)) ** (1.0 / p) / (self.base - 1.0)

    def tail_bound(self, n: int) -> float:
        if n < 1:
            raise ValueError("truncation must be >= 1")
        return self.base ** (-1 - n) / (self.base - 1.0)


@dataclass(frozen=True)
class Sender(CouplingMatrix):
    """k_ij = kappa_j: every row carries the same sender weights."""

    kappa: PositiveSequence
    normalized: bool = True
    epsilon: float = DEFAULT_SENDER_EPSILON
    weights: PositiveSequence = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not self.epsilon > 0.0:
            raise ValueError("sender epsilon must be positive")
        w = self.kappa.scaled(1.0 / self.kappa.total()) if self.normalized else self.kappa
        object.__setattr__(self, "weights", w)

    def entry(self, i: int, j: int) -> float:
        _check_index(i)
        return self.weights.term(j)

    def total_weight(self) -> float:
        return 1.0 if self.normalized else self.kappa.total()

    def row_sum(self, i: int) -> float:
        _check_index(i)
        return self.total_weight()

    def row_tails(self, n: int) -> np.ndarray:
        return np.full(n, self.weights.tail(n))

    def norm_inf_one(self) -> float:
        return self.total_weight()

    def norm_minus_inf_one(self, restrict_to: int | None = None) -> LowerRowSum:
        return LowerRowSum(self.total_weight(), False)

    def _norm_p_finite(self, p: float) -> float:
        return math.inf  # infinitely many equal rows

    def tail_bound(self, n: int) -> float:
        if n < 1:
            raise ValueError("truncation must be >= 1")
        return self.weights.tail(n)

    def tilde_kappa(self) -> PositiveSequence:
        return self.weights.scaled(1.0 / (self.norm_inf_one() + self.epsilon))


@dataclass(frozen=True)
class FiniteEmbedded(CouplingMatrix):
    """An n x n nonnegative block, zero outside."""

    entries: tuple[tuple[float, ...], ...]
    summable = True

    def __post_init__(self) -> None:
        rows = tuple(tuple(float(x) for x in r) for r in self.entries)
        n = len(rows)
        if n == 0 or any(len(r) != n for r in rows):
            raise ValueError("FiniteEmbedded entries must form a nonempty square block")
        if not all(x >= 0.0 and math.isfinite(x) for r in rows for x in r):
            raise ValueError("FiniteEmbedded entries must be finite and nonnegative")
        object.__setattr__(self, "entries", rows)

    @property
    def n(self) -> int:
        return len(self.entries)

    @property
    def symmetric(self) -> bool:  # type: ignore[override]
        e = self.entries
        return all(e[i][j] == e[j][i] for i in range(self.n) for j in range(i))

    def entry(self, i: int, j: int) -> float:
        _check_index(i, j)
        if i > self.n or j > self.n:
            return 0.0
        return self.entries[i - 1][j - 1]

    def row_sum(self, i: int) -> float:
        _check_index(i)
        return csum(self.entries[i - 1]) if i <= self.n else 0.0

    def row_tails(self, n: int) -> np.ndarray:
        return np.array(
            [csum(self.entries[i - 1][n:]) if i <= self.n else 0.0 for i in range(1, n + 1)]
        )

    def tail_bound(self, n: int) -> float:
        if n < 1:
            raise ValueError("truncation must be >= 1")
        return max(csum(row[n:]) for row in self.entries) if n < self.n else 0.0

    def norm_inf_one(self) -> float:
        return max(self.row_sum(i) for i in range(1, self.n + 1))

    def norm_minus_inf_one(self, restrict_to: int | None = None) -> LowerRowSum:
        if restrict_to is None:
            return LowerRowSum(0.0, True)
        return LowerRowSum(min(self.row_sum(i) for i in range(1, restrict_to + 1)), True)

    def _norm_p_finite(self, p: float) -> float:
        return csum([self.row_sum(i) ** p for i in range(1, self.n + 1)]) ** (1.0 / p)


@dataclass(frozen=True)
class UniformFinite(CouplingMatrix):
    """k_ij = strength / n on [n] x [n], zero outside."""

    n: int
    strength: float
    symmetric = True
    summable = True

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("UniformFinite needs n >= 1")
        if not (self.strength >= 0.0 and math.isfinite(self.strength)):
            raise ValueError("UniformFinite strength must be finite and nonnegative")

    def entry(self, i: int, j: int) -> float:
        _check_index(i, j)
        return self.strength / self.n if i <= self.n and j <= self.n else 0.0

    def row_sum(self, i: int) -> float:
        _check_index(i)
        return float(self.strength) if i <= self.n else 0.0

    def row_tails(self, n: int) -> np.ndarray:
        return np.array(
            [self.strength * max(self.n - n, 0) / self.n if i <= self.n else 0.0 for i in range(1, n + 1)]
        )

    def tail_bound(self, n: int) -> float:
        if n < 1:
            raise ValueError("truncation must be >= 1")
        return self.strength * max(self.n - n, 0) / self.n

    def norm_inf_one(self) -> float:
        return float(self.strength)

    def norm_minus_inf_one(self, restrict_to: int | None = None) -> LowerRowSum:
        if restrict_to is None:
            return LowerRowSum(0.0, True)
        return LowerRowSum(float(self.strength) if restrict_to <= self.n else 0.0, True)

    def _norm_p_finite(self, p: float) -> float:
        return self.n ** (1.0 / p) * self.strength


def block_norm_p_one(k: CouplingMatrix, n: int, p: float) -> float:
    """||K_N||_{p,1} of the n x n truncation."""
    sums = np.array([csum(row) for row in k.block(n)])
    if math.isinf(p):
        return float(np.max(sums))
    return csum(sums**p) ** (1.0 / p)


def check_row_sum(k: CouplingMatrix, i: int) -> float:
    s = k.row_sum(i)
    if not math.isfinite(s):
        raise DivergentRow(f"row {i} of {k!r} diverges")
    return s


# ---------------------------------------------------------------------------
# frameworks


@dataclass(frozen=True)
class FrameworkReport:
    f1_holds: bool
    initial_diameter: float
    f2_holds: bool
    witness: PositiveSequence | None
    witness_l1: float | None
    f3_holds: bool
    k_minus: float
    notes: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "f1_holds": self.f1_holds,
            "initial_diameter": self.initial_diameter,
            "f2_holds": self.f2_holds,
            "witness": repr(self.witness) if self.witness is not None else None,
            "witness_l1": self.witness_l1,
            "f3_holds": self.f3_holds,
            "k_minus": self.k_minus,
            "notes": list(self.notes),
        }


def sample_index_pairs(n: int, budget: int) -> list[tuple[int, int]]:
    """All pairs in [n]^2 if they fit the budget, else a Halton grid of ``budget`` pairs."""
    if n * n <= budget:
        return [(i, j) for i in range(1, n + 1) for j in range(1, n + 1)]
    pts = qmc.Halton(d=2, scramble=False).random(budget + 1)[1:]
    idx = np.minimum((pts * n).astype(int), n - 1) + 1
    return sorted({(int(i), int(j)) for i, j in idx})


def validate_framework(k: CouplingMatrix, theta_in, nu=None, sample_budget: int = 4096) -> FrameworkReport:
    """Check (F1)-(F3) on a truncated configuration; failures are reported, not raised."""
    phases = np.asarray(getattr(theta_in, "phases", theta_in), dtype=float)
    n = phases.size
    notes: list[str] = []

    d = float(np.max(phases) - np.min(phases))
    f1 = d < math.pi

    witness = k.tilde_kappa()
    witness_l1 = None
    f2 = False
    if witness is None:
        notes.append("no constructive (F2) witness for this family")
    else:
        witness_l1 = witness.total()
        f2 = witness_l1 <= 1.0
        if not f2:
            notes.append(f"witness l1 norm {witness_l1} exceeds 1")
        bad = []
        for i, j in sample_index_pairs(n, sample_budget):
            rs = k.row_sum(i)
            if not (rs > 0.0 and k.entry(i, j) / rs > witness.term(j)):
                bad.append((i, j))
        if bad:
            f2 = False
            notes.append(f"(F2) ratio inequality fails at {len(bad)} sampled pairs, first {bad[0]}")

    lower = k.norm_minus_inf_one()
    f3 = lower.value > 0.0 and not lower.f3_fails_in_limit
    if lower.f3_fails_in_limit:
        notes.append(
            "row sums are not bounded below on the infinite index set; "
            f"restricted to i <= {n} the infimum is {k.norm_minus_inf_one(restrict_to=n).value!r}"
        )
    return FrameworkReport(f1, d, f2, witness, witness_l1, f3, lower.value, tuple(notes))
