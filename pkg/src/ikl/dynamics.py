"""Right-hand side evaluation and fixed-step integration of truncated systems."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from ._reduce import csum, row_sums
from .ensemble import (
    DROPPED,
    FrequencyState,
    FrequencyVector,
    Frozen,
    PhaseState,
    TailModel,
    lp_norm,
)
from .errors import DimensionMismatch, ValidationError, WrongFamily
from .results import CheckResult, Status, verdict
from .topology import CouplingMatrix, Sender, block_norm_p_one, sequence_terms

REL_SLACK = 2.0**-30


def step_bound(k: CouplingMatrix, nu_sup: float, safety: float = 0.1) -> float:
    """Largest admissible step: safety / (2 ||K||_{inf,1} + ||V||_inf)."""
    denom = 2.0 * k.norm_inf_one() + nu_sup
    return math.inf if denom == 0.0 else safety / denom


@dataclass(frozen=True)
class IntegratorConfig:
    t_end: float
    step: float | None = None
    method: str = "rk4"
    step_safety: float = 0.1

    def __post_init__(self) -> None:
        if not self.t_end > 0:
            raise ValidationError("t_end must be positive")
        if self.step is not None and not self.step > 0:
            raise ValidationError("step must be positive")
        if self.method != "rk4":
            raise ValidationError(f"unknown integration method {self.method!r}")
        if not 0.0 < self.step_safety <= 1.0:
            raise ValidationError("step_safety must lie in (0, 1]")

    def resolve(self, k: CouplingMatrix, nu_sup: float) -> tuple[float, int]:
        """Effective step and step count; the step divides t_end exactly."""
        bound = step_bound(k, nu_sup, self.step_safety)
        h = self.step
        if h is None:
            h = bound if math.isfinite(bound) else self.t_end / 100.0
        elif h > bound * (1.0 + 1e-12):
            raise ValidationError(f"step {h} exceeds the stability bound {bound}")
        n = self.t_end / h
        steps = max(round(n) if abs(n - round(n)) < 1e-9 * max(1.0, n) else math.ceil(n), 1)
        return self.t_end / steps, steps


# ---------------------------------------------------------------------------
# vector fields


class VectorField:
    """Truncated right-hand side f_i = nu_i + sum_{j<=N} k_ij sin(theta_j - theta_i).

    Row reductions are correctly rounded, so splitting rows across ``threads``
    workers leaves every bit of the result unchanged.
    """

    def __init__(
        self,
        k: CouplingMatrix,
        nu: FrequencyVector,
        n: int,
        tail_model: TailModel = DROPPED,
        threads: int = 1,
        fast_sender: bool = True,
    ):
        self.k = k
        self.n = n
        self.nu = nu.vector(n)
        self.tail_model = tail_model
        self.fast = fast_sender and isinstance(k, Sender)
        self.threads = max(1, int(threads))
        if self.fast:
            self.weights = sequence_terms(k.weights, n)
            self.tail_weight = k.weights.tail(n) if isinstance(tail_model, Frozen) else 0.0
        else:
            self.block = k.block(n)
            self.tail_mass = k.row_tails(n) if isinstance(tail_model, Frozen) else None
        self._pool = ThreadPoolExecutor(self.threads) if self.threads > 1 and not self.fast else None
        self._chunks = _partition(n, self.threads)

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def __call__(self, phases: np.ndarray) -> np.ndarray:
        if phases.size != self.n:
            raise DimensionMismatch(f"{phases.size} phases for truncation {self.n}")
        return self._sender(phases) if self.fast else self._direct(phases)

    def _direct(self, phases: np.ndarray) -> np.ndarray:
        terms = self.block * np.sin(phases[None, :] - phases[:, None])
        if self.tail_mass is not None:
            col = self.tail_mass * np.sin(self.tail_model.tail_phase - phases)
            terms = np.hstack([terms, col[:, None]])
        if self._pool is None:
            sums = row_sums(terms)
        else:
            parts = self._pool.map(lambda r: row_sums(terms, r), self._chunks)
            sums = [s for part in parts for s in part]
        return self.nu + np.array(sums)

    def _sender(self, phases: np.ndarray) -> np.ndarray:
        c, s = np.cos(phases), np.sin(phases)
        re, im = order_sum(self.weights, c, s)
        if self.tail_weight:
            re = csum([re, self.tail_weight * math.cos(self.tail_model.tail_phase)])
            im = csum([im, self.tail_weight * math.sin(self.tail_model.tail_phase)])
        return self.nu + (im * c - re * s)


def _partition(n: int, parts: int) -> list[range]:
    size = -(-n // parts)
    return [range(a, min(a + size, n)) for a in range(0, n, size)]


def order_sum(weights: np.ndarray, c: np.ndarray, s: np.ndarray) -> tuple[float, float]:
    """Real and imaginary parts of sum_k w_k exp(i theta_k)."""
    return csum(weights * c), csum(weights * s)


def _phases(theta: PhaseState | np.ndarray) -> np.ndarray:
    return theta.phases if isinstance(theta, PhaseState) else np.asarray(theta, dtype=float)


def _tail(theta) -> TailModel:
    return theta.tail_model if isinstance(theta, PhaseState) else DROPPED


def rhs(k: CouplingMatrix, nu: FrequencyVector, theta: PhaseState | np.ndarray, threads: int = 1) -> np.ndarray:
    """Direct O(N^2) evaluation, summing rows in ascending j."""
    ph = _phases(theta)
    f = VectorField(k, nu, ph.size, _tail(theta), threads=threads, fast_sender=False)
    try:
        return f(ph)
    finally:
        f.close()


def rhs_sender_fast(k: CouplingMatrix, nu: FrequencyVector, theta: PhaseState | np.ndarray) -> np.ndarray:
    """O(N) evaluation through the weighted centroid S = sum_k kappa_k exp(i theta_k)."""
    if not isinstance(k, Sender):
        raise WrongFamily("fast evaluation needs a sender network")
    ph = _phases(theta)
    return VectorField(k, nu, ph.size, _tail(theta))(ph)


def rk4(f: Callable[[np.ndarray], np.ndarray], y: np.ndarray, h: float, k1: np.ndarray | None = None) -> np.ndarray:
    if k1 is None:
        k1 = f(y)
    k2 = f(y + (0.5 * h) * k1)
    k3 = f(y + (0.5 * h) * k2)
    k4 = f(y + h * k3)
    # k1 plus the weighted corrections; the corrections vanish exactly for a constant field
    return y + h * (k1 + (2.0 * (k2 - k1) + 2.0 * (k3 - k1) + (k4 - k1)) / 6.0)


def step_rk4(k: CouplingMatrix, nu: FrequencyVector, theta: PhaseState, h: float) -> PhaseState:
    f = VectorField(k, nu, theta.truncation, theta.tail_model)
    return theta.with_phases(rk4(f, theta.phases, h), theta.time + h)


# ---------------------------------------------------------------------------
# second-order sender system


def second_order_init(k: CouplingMatrix, nu: FrequencyVector, theta_in: PhaseState) -> FrequencyState:
    """omega_i(0) = nu_i + sum_j kappa_j sin(theta_j - theta_i)."""
    if not isinstance(k, Sender):
        raise WrongFamily("the second-order system is defined for sender networks")
    return FrequencyState(rhs(k, nu, theta_in), theta_in.time)


def second_order_rhs(k: CouplingMatrix, theta: PhaseState | np.ndarray, omega: FrequencyState | np.ndarray) -> np.ndarray:
    """omega_dot_i = sum_j kappa_j cos(theta_i - theta_j) (omega_j - omega_i)."""
    if not isinstance(k, Sender):
        raise WrongFamily("the second-order system is defined for sender networks")
    ph = _phases(theta)
    om = omega.omegas if isinstance(omega, FrequencyState) else np.asarray(omega, dtype=float)
    if om.size != ph.size:
        raise DimensionMismatch(f"{om.size} frequencies for {ph.size} phases")
    w = sequence_terms(k.weights, ph.size)
    terms = w[None, :] * np.cos(ph[:, None] - ph[None, :]) * (om[None, :] - om[:, None])
    return np.array(row_sums(terms))


def second_derivative(k: CouplingMatrix, theta: np.ndarray, velocity: np.ndarray) -> np.ndarray:
    """theta_ddot_i = sum_j k_ij cos(theta_j - theta_i) (theta_dot_j - theta_dot_i)."""
    terms = k.block(theta.size) * np.cos(theta[None, :] - theta[:, None]) * (velocity[None, :] - velocity[:, None])
    return np.array(row_sums(terms))


# ---------------------------------------------------------------------------
# trajectories


@dataclass
class Trajectory:
    times: np.ndarray
    phases: np.ndarray  # (samples, N)
    velocities: np.ndarray  # right-hand side at each sample
    coupling: CouplingMatrix
    frequencies: FrequencyVector
    step: float
    tail_model: TailModel = DROPPED
    omegas: np.ndarray | None = None
    equilibrium: bool = False
    equilibrium_tol: float = 1e-6
    tail_certificate: float = 0.0
    diagnostics: list[Any] = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.phases.shape[1]

    @property
    def sample_times(self) -> np.ndarray:
        return self.times

    @property
    def states(self) -> list[PhaseState]:
        return [PhaseState(p, t, self.tail_model) for p, t in zip(self.phases, self.times)]

    @property
    def frequency_states(self) -> list[FrequencyState] | None:
        if self.omegas is None:
            return None
        return [FrequencyState(w, t) for w, t in zip(self.omegas, self.times)]

    def initial(self) -> PhaseState:
        return PhaseState(self.phases[0], float(self.times[0]), self.tail_model)

    def final(self) -> PhaseState:
        return PhaseState(self.phases[-1], float(self.times[-1]), self.tail_model)


def march(
    k: CouplingMatrix,
    nu: FrequencyVector,
    theta0: PhaseState,
    config: IntegratorConfig,
    stride: int = 1,
    second_order: bool = False,
    equilibrium_tol: float = 1e-6,
    threads: int = 1,
) -> Trajectory:
    """Fixed-step RK4 from t=0 to t_end, sampling every ``stride`` steps."""
    n = theta0.truncation
    if stride < 1:
        raise ValidationError("sample_stride must be >= 1")
    h, steps = config.resolve(k, nu.sup_norm(n))
    f = VectorField(k, nu, n, theta0.tail_model, threads=threads)
    try:
        y = np.array(theta0.phases)
        if second_order:
            if not isinstance(k, Sender):
                raise WrongFamily("the second-order system is defined for sender networks")
            om = f(y)
            state = np.concatenate([y, om])

            def g(z: np.ndarray) -> np.ndarray:
                return np.concatenate([z[n:], second_order_rhs(k, z[:n], z[n:])])

        times, ph, vel, oms = [], [], [], []
        k1 = f(y)
        for s in range(steps + 1):
            if s % stride == 0 or s == steps:
                times.append(s * h)
                ph.append(y.copy())
                vel.append(k1)
                if second_order:
                    oms.append(state[n:].copy())
            if s == steps:
                break
            if second_order:
                state = rk4(g, state, h)
                y = state[:n].copy()
            else:
                y = rk4(f, y, h, k1)
            k1 = f(y)
    finally:
        f.close()

    t_end = steps * h
    velocities = np.array(vel)
    return Trajectory(
        times=np.array(times),
        phases=np.array(ph),
        velocities=velocities,
        coupling=k,
        frequencies=nu,
        step=h,
        tail_model=theta0.tail_model,
        omegas=np.array(oms) if second_order else None,
        equilibrium=bool(np.max(np.abs(velocities[-1])) < equilibrium_tol),
        equilibrium_tol=equilibrium_tol,
        tail_certificate=t_end * k.tail_bound(n),
    )


def integrate(scenario, threads: int = 1) -> Trajectory:
    """Integrate a harness scenario and attach its per-sample diagnostics."""
    from .diagnostics import build_records

    traj = march(
        scenario.topology,
        scenario.frequency_vector(),
        scenario.initial_state(),
        scenario.integrator,
        stride=scenario.sample_stride,
        second_order="second_order" in scenario.diagnostics,
        equilibrium_tol=scenario.equilibrium_tol,
        threads=threads,
    )
    traj.diagnostics = build_records(traj, scenario.diagnostics, scenario.cross_ratio_tuples)
    return traj


# ---------------------------------------------------------------------------
# bounds as predicates


def lipschitz_check(
    k: CouplingMatrix,
    nu: FrequencyVector,
    theta_a: PhaseState | np.ndarray,
    theta_b: PhaseState | np.ndarray,
    p: float,
) -> CheckResult:
    """||F(a) - F(b)||_p <= 2 ||K_N||_{p,1} ||a - b||_p and ||F||_p <= ||V||_p + ||K_N||_{p,1}.

    ``K_N`` is the N x N truncation actually evaluated; its norm never exceeds
    the norm of the infinite matrix.
    """
    a, b = _phases(theta_a), _phases(theta_b)
    if a.size != b.size:
        raise DimensionMismatch("both states need the same truncation")
    n = a.size
    fa, fb = rhs(k, nu, a), rhs(k, nu, b)
    kn = block_norm_p_one(k, n, p)
    lhs = lp_norm(fa - fb, p)
    bound = 2.0 * kn * lp_norm(a - b, p)
    size_bound = nu.lp_norm(n, p) + kn
    size = max(lp_norm(fa, p), lp_norm(fb, p))
    ok = lhs <= bound * (1.0 + REL_SLACK) and size <= size_bound * (1.0 + REL_SLACK)
    return verdict("lipschitz", ok, p=p, lhs=lhs, rhs=bound, size=size, size_bound=size_bound)


def derivative_bounds_check(traj: Trajectory, k: CouplingMatrix | None = None, nu: FrequencyVector | None = None) -> CheckResult:
    """First and second derivative bounds, per oscillator, per row and pairwise, at every sample."""
    k = traj.coupling if k is None else k
    nu = traj.frequencies if nu is None else nu
    if len(traj.times) < 3:
        return CheckResult("derivative_bounds", Status.NOT_APPLICABLE, message="fewer than 3 samples")
    n = traj.n
    knorm = k.norm_inf_one()
    vsup, vdiam = nu.sup_norm(n), nu.diameter(n)
    nuv = nu.vector(n)
    rows = k.row_sums(n)
    b1 = vsup + knorm
    b2 = 2.0 * knorm * b1
    p1 = vdiam + 2.0 * knorm
    p2 = 2.0 * knorm * p1
    slack = 1.0 + REL_SLACK
    worst = {"first": -math.inf, "second": -math.inf, "row_first": -math.inf,
             "row_second": -math.inf, "pair_first": -math.inf, "pair_second": -math.inf}
    violations = 0
    for th, v in zip(traj.phases, traj.velocities):
        acc = second_derivative(k, th, v)
        ratios = {
            "first": np.max(np.abs(v)) / b1 if b1 else (0.0 if not np.any(v) else math.inf),
            "second": np.max(np.abs(acc)) / b2 if b2 else (0.0 if not np.any(acc) else math.inf),
            "row_first": _ratio(np.abs(v - nuv), rows),
            "row_second": _ratio(np.abs(acc), 2.0 * b1 * rows),
            "pair_first": (np.max(v) - np.min(v)) / p1 if p1 else (0.0 if np.ptp(v) == 0 else math.inf),
            "pair_second": (np.max(acc) - np.min(acc)) / p2 if p2 else (0.0 if np.ptp(acc) == 0 else math.inf),
        }
        for key, r in ratios.items():
            worst[key] = max(worst[key], float(r))
            if r > slack:
                violations += 1
    return verdict(
        "derivative_bounds",
        violations == 0,
        violations=violations,
        worst_ratio=worst,
        bounds={"first": b1, "second": b2, "pair_first": p1, "pair_second": p2},
    )


def _ratio(values: np.ndarray, bounds: np.ndarray) -> float:
    out = 0.0
    for x, b in zip(values, bounds):
        if b > 0:
            out = max(out, x / b)
        elif x > 0:
            return math.inf
    return out
