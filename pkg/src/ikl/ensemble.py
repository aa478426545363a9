"""Truncated phase configurations, natural frequencies and their statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from ._reduce import csum
from .errors import DimensionMismatch
from .topology import PositiveSequence, sequence_terms


@dataclass(frozen=True)
class Dropped:
    """Oscillators beyond the truncation are removed from every sum."""


@dataclass(frozen=True)
class Frozen:
    """Oscillators beyond the truncation sit at a fixed phase (exploratory only)."""

    tail_phase: float


TailModel = Union[Dropped, Frozen]
DROPPED = Dropped()


def _frozen_array(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float).reshape(-1)
    if arr.size == 0:
        raise ValueError(f"{name} must be nonempty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PhaseState:
    """Unwrapped phases of oscillators 1..N at a given time."""

    phases: np.ndarray
    time: float = 0.0
    tail_model: TailModel = DROPPED

    def __post_init__(self) -> None:
        object.__setattr__(self, "phases", _frozen_array(self.phases, "phases"))
        if not self.time >= 0.0:
            raise ValueError("time must be nonnegative")

    @property
    def truncation(self) -> int:
        return self.phases.size

    def with_phases(self, phases: np.ndarray, time: float) -> PhaseState:
        return PhaseState(phases, time, self.tail_model)


@dataclass(frozen=True, eq=False)
class FrequencyState:
    omegas: np.ndarray
    time: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "omegas", _frozen_array(self.omegas, "omegas"))


@dataclass(frozen=True, eq=False)
class FrequencyVector:
    """Natural frequencies: either one shared value or one value per oscillator."""

    nu: float = 0.0
    values: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.values is not None:
            object.__setattr__(self, "values", _frozen_array(self.values, "frequencies"))
        elif not math.isfinite(self.nu):
            raise ValueError("frequency must be finite")

    @classmethod
    def homogeneous(cls, nu: float = 0.0) -> FrequencyVector:
        return cls(nu=float(nu))

    @classmethod
    def per_index(cls, values) -> FrequencyVector:
        return cls(values=np.asarray(values, dtype=float))

    @property
    def is_homogeneous(self) -> bool:
        return self.values is None

    def vector(self, n: int) -> np.ndarray:
        if self.values is None:
            return np.full(n, self.nu)
        if self.values.size != n:
            raise DimensionMismatch(f"{self.values.size} frequencies for {n} oscillators")
        return np.array(self.values)

    def sup_norm(self, n: int) -> float:
        return float(np.max(np.abs(self.vector(n))))

    def diameter(self, n: int) -> float:
        v = self.vector(n)
        return float(np.max(v) - np.min(v))

    def lp_norm(self, n: int, p: float) -> float:
        return lp_norm(self.vector(n), p)


def _samples(theta: PhaseState | np.ndarray) -> np.ndarray:
    if isinstance(theta, PhaseState):
        if isinstance(theta.tail_model, Frozen):
            return np.append(theta.phases, theta.tail_model.tail_phase)
        return theta.phases
    return np.asarray(theta, dtype=float)


def extremals(theta: PhaseState | np.ndarray) -> tuple[float, float]:
    x = _samples(theta)
    return float(np.min(x)), float(np.max(x))


def diameter(theta: PhaseState | np.ndarray) -> float:
    lo, hi = extremals(theta)
    return hi - lo


def lp_norm(x, p: float) -> float:
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    a = np.abs(np.asarray(x, dtype=float))
    if a.size == 0:
        return 0.0
    if math.isinf(p):
        return float(np.max(a))
    if p == 1:
        return csum(a)
    if p == 2:
        return math.hypot(*a.tolist())
    m = float(np.max(a))
    if m == 0.0 or math.isinf(m):
        return m
    # scale by the largest entry so a**p neither underflows nor overflows
    return m * csum((a / m) ** p) ** (1.0 / p)


def weight_vector(kappa: PositiveSequence | np.ndarray, n: int) -> np.ndarray:
    if isinstance(kappa, np.ndarray) or isinstance(kappa, (list, tuple)):
        w = np.asarray(kappa, dtype=float)
        if w.size != n:
            raise DimensionMismatch(f"{w.size} weights for {n} oscillators")
        return w
    return sequence_terms(kappa, n)


def weighted_sum(theta: PhaseState | np.ndarray, kappa: PositiveSequence | np.ndarray) -> float:
    """sum_{k<=N} kappa_k theta_k, correctly rounded."""
    phases = theta.phases if isinstance(theta, PhaseState) else np.asarray(theta, dtype=float)
    w = weight_vector(kappa, phases.size)
    return csum(w * phases)


def gauge_shift(theta: PhaseState, nu: float, t: float) -> PhaseState:
    """Rotating-frame phases theta_i - nu * t."""
    tail = theta.tail_model
    if isinstance(tail, Frozen):
        tail = Frozen(tail.tail_phase - nu * t)
    return PhaseState(theta.phases - nu * t, theta.time, tail)


# ---------------------------------------------------------------------------
# initial data


def alternating(n: int, amplitude: float = math.pi / 3) -> np.ndarray:
    """theta_i = (-1)**i * amplitude."""
    return np.array([amplitude if i % 2 == 0 else -amplitude for i in range(1, n + 1)])


def seeded_uniform(seed: int, stream: int, n: int) -> np.ndarray:
    """Uniform [0, 1) draws keyed by (seed, stream, index).

    Draw i depends only on its key, so growing ``n`` extends the sample
    without changing earlier entries.
    """
    out = np.empty(n)
    for i in range(n):
        bg = np.random.Philox(key=seed, counter=[i, stream, 0, 0])
        out[i] = (int(bg.random_raw()) >> 11) * 2.0**-53
    return out


def uniform_in_arc(n: int, width: float, seed: int, center: float = 0.0, stream: int = 0) -> np.ndarray:
    """Seeded points in [center - width/2, center + width/2].

    Oscillators 1 and 2 are pinned to the two ends so the configuration's
    diameter equals ``width`` (up to rounding of the endpoints) whenever n >= 2.
    """
    if width < 0:
        raise ValueError("arc width must be nonnegative")
    lo, hi = center - width / 2.0, center + width / 2.0
    out = np.clip(lo + width * seeded_uniform(seed, stream, n), lo, hi)
    out[0] = lo
    if n >= 2:
        out[1] = hi
    return out
