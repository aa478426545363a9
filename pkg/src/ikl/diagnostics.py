"""Observables along trajectories and checks of the synchronization estimates.

Floors and tolerances:

* ``R_FLOOR``: below this centroid modulus the centroid angle is undefined.
* ``GAP_FLOOR``: minimum chordal distance for a cross ratio to be evaluated.
* ``CLASSIFY_TOL``: distance to a candidate limit configuration, radians.
* ``GAMMA_SLACK``: finite-horizon allowance added to the practical bound.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from ._reduce import csum, dot
from .dynamics import Trajectory, rhs
from .ensemble import FrequencyVector, PhaseState, diameter, lp_norm, weight_vector
from .errors import DegenerateTuple, HypothesisViolated, NoEntranceTime, NotConverged, WrongFamily
from .results import CheckResult, Status, verdict
from .topology import CouplingMatrix, PositiveSequence, Sender, sequence_terms

R_FLOOR = 1e-9
GAP_FLOOR = 1e-6
CLASSIFY_TOL = 1e-3
GAMMA_SLACK = 0.05
ALL_TUPLES_MAX_N = 8  # beyond this, per-sample cross ratios need an explicit tuple list
_EPS = np.finfo(float).eps


def _phases(theta) -> np.ndarray:
    return theta.phases if isinstance(theta, PhaseState) else np.asarray(theta, dtype=float)


# ---------------------------------------------------------------------------
# order parameters


class OrderParameters(NamedTuple):
    r: float
    phi: float | None  # None when r < R_FLOOR


def order_parameters(theta, kappa: PositiveSequence | np.ndarray) -> OrderParameters:
    """Polar form of sum_k kappa_k exp(i theta_k)."""
    ph = _phases(theta)
    w = weight_vector(kappa, ph.size)
    re, im = csum(w * np.cos(ph)), csum(w * np.sin(ph))
    r = math.hypot(re, im)
    return OrderParameters(r, math.atan2(im, re) if r >= R_FLOOR else None)


def coherence_defect(theta, kappa: PositiveSequence | np.ndarray) -> float:
    """sum_k kappa_k sin^2(theta_k - phi), the growth rate of r."""
    ph = _phases(theta)
    op = order_parameters(ph, kappa)
    if op.phi is None:
        return 0.0
    w = weight_vector(kappa, ph.size)
    return csum(w * np.sin(ph - op.phi) ** 2)


def conserved_weights(k: CouplingMatrix, n: int) -> np.ndarray | None:
    """Weights whose weighted phase sum is a constant of motion of the truncated system."""
    if isinstance(k, Sender):
        return sequence_terms(k.weights, n)
    if k.symmetric:
        return np.ones(n)
    return None


# ---------------------------------------------------------------------------
# potential


def _require_gradient_family(k: CouplingMatrix) -> None:
    if not (k.symmetric and k.summable):
        raise WrongFamily("the potential needs a symmetric network with finite (1,1) norm")


def potential(theta, k: CouplingMatrix) -> float:
    """P = 1/2 sum_{i != j} k_ij (1 - cos(theta_i - theta_j))."""
    _require_gradient_family(k)
    ph = _phases(theta)
    terms = k.block(ph.size) * (1.0 - np.cos(ph[:, None] - ph[None, :]))
    np.fill_diagonal(terms, 0.0)
    return 0.5 * csum(terms)


def potential_gradient(theta, k: CouplingMatrix) -> np.ndarray:
    """Phi_k = -sum_j k_kj sin(theta_j - theta_k)."""
    _require_gradient_family(k)
    return -rhs(k, FrequencyVector.homogeneous(0.0), _phases(theta))


# ---------------------------------------------------------------------------
# cross ratios


def _chord(a: float, b: float) -> float:
    return 2.0 * abs(math.sin((a - b) / 2.0))


def cross_ratio(theta, i: int, j: int, k: int, l: int, gap_floor: float = GAP_FLOOR) -> complex:
    """(z_i - z_k)(z_j - z_l) / ((z_i - z_j)(z_k - z_l)) with z = exp(i theta), 1-based indices.

    Writing z_a - z_b = 2i sin((a-b)/2) exp(i(a+b)/2), the exponential factors
    cancel and the value is the real ratio of half-angle sines. That form
    avoids the cancellation in z_a - z_b when two points are close.
    """
    ph = _phases(theta)
    idx = (i, j, k, l)
    if len(set(idx)) != 4:
        raise ValueError("cross ratio needs four distinct indices")
    t = [float(ph[m - 1]) for m in idx]
    for a, b in itertools.combinations(t, 2):
        if _chord(a, b) < gap_floor:
            raise DegenerateTuple(f"indices {idx} have a chordal gap below {gap_floor}")
    ti, tj, tk, tl = t
    num = math.sin((ti - tk) / 2.0) * math.sin((tj - tl) / 2.0)
    den = math.sin((ti - tj) / 2.0) * math.sin((tk - tl) / 2.0)
    return complex(num / den, 0.0)


def all_tuples(n: int) -> list[tuple[int, int, int, int]]:
    return list(itertools.combinations(range(1, n + 1), 4))


# ---------------------------------------------------------------------------
# per-sample records


@dataclass(frozen=True)
class DiagnosticsRecord:
    time: float
    d_theta: float
    d_omega: float | None
    r: float | None
    phi: float | None
    potential_P: float | None
    weighted_S: float | None
    rhs_l2: float
    rhs_linf: float
    tail_certificate: float
    cross_ratios: tuple[tuple[tuple[int, int, int, int], complex | None], ...] | None = None

    CSV_COLUMNS = ("t", "d_theta", "d_omega", "r", "phi", "P", "S", "rhs_l2", "rhs_linf", "tail_cert")

    def csv_row(self) -> list[str]:
        vals = (self.time, self.d_theta, self.d_omega, self.r, self.phi, self.potential_P,
                self.weighted_S, self.rhs_l2, self.rhs_linf, self.tail_certificate)
        return ["" if v is None else repr(float(v)) for v in vals]


DIAGNOSTIC_SWITCHES = frozenset({"order_parameters", "potential", "weighted_sum", "cross_ratios", "second_order"})


def build_records(traj: Trajectory, switches=DIAGNOSTIC_SWITCHES, tuples=None) -> list[DiagnosticsRecord]:
    k, n = traj.coupling, traj.n
    eps_tail = k.tail_bound(n)
    sender = isinstance(k, Sender)
    weights = sequence_terms(k.weights, n) if sender else None
    cweights = conserved_weights(k, n) if "weighted_sum" in switches else None
    want_p = "potential" in switches and k.symmetric and k.summable
    if "cross_ratios" in switches and sender and n >= 4:
        if tuples is None:
            tuples = all_tuples(n) if n <= ALL_TUPLES_MAX_N else None
        else:
            tuples = [tuple(t) for t in tuples]
    else:
        tuples = None
    out = []
    for s, t in enumerate(traj.times):
        ph = traj.phases[s]
        state = PhaseState(ph, float(t), traj.tail_model)
        r = phi = None
        if sender and "order_parameters" in switches:
            r, phi = order_parameters(ph, weights)
        crs = None
        if tuples is not None:
            crs = tuple((tp, _safe_cross_ratio(ph, tp)) for tp in tuples)
        v = traj.velocities[s]
        out.append(
            DiagnosticsRecord(
                time=float(t),
                d_theta=diameter(state),
                d_omega=float(np.ptp(traj.omegas[s])) if traj.omegas is not None else None,
                r=r,
                phi=phi,
                potential_P=potential(ph, k) if want_p else None,
                weighted_S=csum(cweights * ph) if cweights is not None else None,
                rhs_l2=lp_norm(v, 2),
                rhs_linf=lp_norm(v, math.inf),
                tail_certificate=float(t) * eps_tail,
                cross_ratios=crs,
            )
        )
    return out


def _safe_cross_ratio(ph: np.ndarray, tp) -> complex | None:
    try:
        return cross_ratio(ph, *tp)
    except DegenerateTuple:
        return None


# ---------------------------------------------------------------------------
# diameter and synchronization checks


def _diameters(traj: Trajectory) -> np.ndarray:
    return np.array([diameter(s) for s in traj.states])


def constant_diameter_check(traj: Trajectory, target: float | None = None, tol: float = 1e-3) -> CheckResult:
    d = _diameters(traj)
    target = float(d[0]) if target is None else target
    dev = float(np.max(np.abs(d - target)))
    return verdict("constant_diameter", dev < tol, target=target, max_deviation=dev, tol=tol)


def diameter_monotone_check(traj: Trajectory, tol: float = 1e-9) -> CheckResult:
    d = _diameters(traj)
    inc = np.diff(d)
    worst = float(np.max(inc)) if inc.size else 0.0
    return verdict("diameter_monotone", worst <= tol, max_increase=worst,
                   violations=int(np.sum(inc > tol)), tol=tol)


def complete_sync_check(traj: Trajectory, tol: float = 1e-4) -> CheckResult:
    final = lp_norm(traj.velocities[-1] - traj.frequencies.vector(traj.n), 2)
    return verdict("complete_sync", final < tol, final_rhs_l2=final, tol=tol)


def weighted_sum_conservation_check(traj: Trajectory, tol: float = 1e-8) -> CheckResult:
    """Drift of sum w_k theta_k against its exact balance t * sum w_k nu_k."""
    w = conserved_weights(traj.coupling, traj.n)
    if w is None:
        return CheckResult("weighted_sum_conservation", Status.NOT_APPLICABLE, message="no conserved weights")
    s0 = csum(w * traj.phases[0])
    rate = dot(w, traj.frequencies.vector(traj.n))
    drift = max(abs(csum(w * ph) - s0 - t * rate) for ph, t in zip(traj.phases, traj.times))
    return verdict("weighted_sum_conservation", drift < tol, max_drift=float(drift), tol=tol)


def equilibrium_check(traj: Trajectory) -> CheckResult:
    final = float(np.max(np.abs(traj.velocities[-1])))
    return verdict("equilibrium", final < traj.equilibrium_tol, final_rhs_linf=final, tol=traj.equilibrium_tol)


# ---------------------------------------------------------------------------
# Lyapunov and gradient structure


def lyapunov_identity_check(
    traj: Trajectory,
    k: CouplingMatrix | None = None,
    min_fraction: float = 0.99,
    abs_tol: float = 1e-6,
    rel_tol: float = 1e-3,
) -> CheckResult:
    """Central-difference dP/dt against -||theta_dot - nu||_2^2, plus the size bounds on P' and P''."""
    k = traj.coupling if k is None else k
    if not (k.symmetric and k.summable):
        return CheckResult("lyapunov_identity", Status.NOT_APPLICABLE, message="needs a symmetric summable network")
    if not traj.frequencies.is_homogeneous:
        return CheckResult("lyapunov_identity", Status.NOT_APPLICABLE, message="needs homogeneous frequencies")
    if len(traj.times) < 3:
        return CheckResult("lyapunov_identity", Status.NOT_APPLICABLE, message="fewer than 3 samples")
    t = traj.times
    p = np.array([potential(ph, k) for ph in traj.phases])
    nu = traj.frequencies.nu
    speed2 = np.array([csum((v - nu) ** 2) for v in traj.velocities])
    dpdt = (p[2:] - p[:-2]) / (t[2:] - t[:-2])
    expect = -speed2[1:-1]
    err = np.abs(dpdt - expect)
    ok_pts = err <= np.maximum(abs_tol, rel_tol * np.abs(expect))
    fraction = float(np.mean(ok_pts))

    increases = int(np.sum(np.diff(p) > 1e-9))
    b1 = k.norm_p_one(2) ** 2
    b2 = 2.0 * k.norm_inf_one() ** 2 * k.norm_p_one(1)
    dt = np.diff(t)
    d2 = (p[2:] - 2.0 * p[1:-1] + p[:-2]) / (dt[1:] * dt[:-1])
    first_ok = bool(np.max(np.abs(dpdt)) <= b1)
    second_ok = bool(np.max(np.abs(d2)) <= b2)
    ok = fraction >= min_fraction and increases == 0 and first_ok and second_ok and p.min() >= 0.0
    return verdict(
        "lyapunov_identity",
        ok,
        fraction_within_tol=fraction,
        max_error=float(err.max()),
        potential_increases=increases,
        max_abs_dPdt=float(np.max(np.abs(dpdt))),
        dPdt_bound=b1,
        max_abs_d2Pdt2=float(np.max(np.abs(d2))),
        d2Pdt2_bound=b2,
    )


def gradient_check(
    theta,
    k: CouplingMatrix,
    h_fd: float = 2.0**-16,
    n_perturbations: int = 10,
    seed: int = 0,
) -> CheckResult:
    """Finite-difference gradient of P against -rhs, and the second-order remainder bound.

    Perturbations are drawn with norm in [0.01, 1/sqrt(2)).
    """
    if not 2.0**-20 <= h_fd <= 2.0**-10:
        raise ValueError("h_fd must lie in [2^-20, 2^-10]")
    _require_gradient_family(k)
    ph = np.array(_phases(theta), dtype=float)
    n = ph.size
    grad = potential_gradient(ph, k)
    k11 = k.norm_p_one(1)
    tol = max(1e-6, h_fd**2 * k11 * 4.0)
    fd = np.empty(n)
    for c in range(n):
        e = np.zeros(n)
        e[c] = h_fd
        fd[c] = (potential(ph + e, k) - potential(ph - e, k)) / (2.0 * h_fd)
    grad_err = float(np.max(np.abs(fd - grad)))

    rng = np.random.Generator(np.random.Philox(seed))
    block = k.block(n)
    p0 = potential(ph, k)
    worst_rem, worst_quad = 0.0, 0.0
    violations = 0
    for _ in range(n_perturbations):
        d = rng.standard_normal(n)
        h = d / lp_norm(d, 2) * rng.uniform(0.01, 1.0 / math.sqrt(2.0))
        hn2 = csum(h**2)
        rem = abs(potential(ph + h, k) - p0 - dot(grad, h))
        quad = 0.5 * csum(block * (h[:, None] - h[None, :]) ** 2)
        bound = k11 * hn2
        round_off = 64 * _EPS * max(1.0, p0)
        if rem > quad + round_off or quad > bound * (1.0 + 2.0**-30):
            violations += 1
        worst_rem = max(worst_rem, rem / quad if quad else 0.0)
        worst_quad = max(worst_quad, quad / bound if bound else 0.0)
    return verdict(
        "gradient",
        grad_err <= tol and violations == 0,
        max_gradient_error=grad_err,
        gradient_tol=tol,
        remainder_violations=violations,
        worst_remainder_ratio=worst_rem,
        worst_quadratic_ratio=worst_quad,
    )


# ---------------------------------------------------------------------------
# sender networks


def _sender_gate(traj: Trajectory, name: str) -> CheckResult | None:
    if not isinstance(traj.coupling, Sender):
        return CheckResult(name, Status.NOT_APPLICABLE, message="needs a sender network")
    if not traj.frequencies.is_homogeneous:
        return CheckResult(name, Status.NOT_APPLICABLE, message="needs homogeneous frequencies")
    return None


def r_monotonicity_check(traj: Trajectory, tol: float = 1e-9, defect_tol: float = 1e-6) -> CheckResult:
    """r nondecreasing between samples, then the two-branch dichotomy at the final time."""
    gate = _sender_gate(traj, "r_monotonicity")
    if gate:
        return gate
    w = sequence_terms(traj.coupling.weights, traj.n)
    r = np.array([order_parameters(ph, w).r for ph in traj.phases])
    drops = -np.diff(r)
    violations = int(np.sum(drops > tol))
    if r[0] < R_FLOOR:
        branch = "stationary"
        moved = float(np.max(np.abs(traj.phases - traj.phases[0])))
        dichotomy_ok = bool(np.all(r < R_FLOOR))
        measured = {"max_phase_change": moved}
    else:
        branch = "coherent"
        defect = coherence_defect(traj.phases[-1], w)
        dichotomy_ok = defect < defect_tol
        measured = {"final_defect": defect}
    return verdict(
        "r_monotonicity",
        violations == 0 and dichotomy_ok,
        r0=float(r[0]),
        r_final=float(r[-1]),
        max_drop=float(drops.max()) if drops.size else 0.0,
        violations=violations,
        branch=branch,
        **measured,
    )


def phase_quantization_check(traj: Trajectory, tol: float = CLASSIFY_TOL) -> CheckResult:
    """Every final pairwise difference sits within tol of an integer multiple of pi."""
    gate = _sender_gate(traj, "phase_quantization")
    if gate:
        return gate
    w = sequence_terms(traj.coupling.weights, traj.n)
    if order_parameters(traj.phases[0], w).r < R_FLOOR:
        return CheckResult("phase_quantization", Status.NOT_APPLICABLE, message="r(0) below floor")
    ph = traj.phases[-1]
    diff = ph[:, None] - ph[None, :]
    dist = np.abs(diff - math.pi * np.round(diff / math.pi))
    worst = float(dist.max())
    return verdict("phase_quantization", worst < tol, max_distance=worst, tol=tol)


@dataclass(frozen=True)
class AsymptoticClass:
    kind: str  # "FullSync" | "BiCluster" | "Unresolved"
    theta_limit: float | None = None
    outlier: int | None = None
    sign: int | None = None
    distances: dict | None = None


def classify_asymptotic(
    final_theta,
    kappa: PositiveSequence | np.ndarray,
    theta0: float,
    tol: float = CLASSIFY_TOL,
    equilibrium: bool = True,
) -> AsymptoticClass:
    """Match a final sender configuration against the candidate limit set.

    Candidates: everyone at theta0, or one oscillator j at
    theta0 + s(1 - kappa_j) pi with the rest at theta0 - s kappa_j pi.
    """
    if not equilibrium:
        raise NotConverged("run did not reach the equilibrium tolerance")
    ph = _phases(final_theta)
    w = weight_vector(kappa, ph.size)
    op = order_parameters(ph, w)
    full = float(np.max(np.abs(ph - theta0)))
    if op.r < R_FLOOR:
        return AsymptoticClass("Unresolved", distances={"r": op.r, "full_sync": full,
                                                         "reason": "stationary incoherent state"})
    if full < tol:
        return AsymptoticClass("FullSync", theta_limit=float(np.mean(ph)), distances={"full_sync": full})
    hits = []
    best = math.inf
    for j in range(ph.size):
        others = np.delete(ph, j)
        for s in (1, -1):
            dj = abs(ph[j] - (theta0 + s * (1.0 - w[j]) * math.pi))
            do = float(np.max(np.abs(others - (theta0 - s * w[j] * math.pi)))) if others.size else 0.0
            best = min(best, max(dj, do))
            if dj < tol and do < tol:
                hits.append((j + 1, s))
    if hits:
        # several hits describe the same configuration (e.g. N = 2); report the lightest outlier
        j, s = min(hits, key=lambda h: (w[h[0] - 1], h[0]))
        return AsymptoticClass("BiCluster", outlier=j, sign=s, distances={"bi_cluster": best, "full_sync": full})
    return AsymptoticClass("Unresolved", distances={"full_sync": full, "bi_cluster": best, "matches": len(hits)})


def classification_check(traj: Trajectory, tol: float = CLASSIFY_TOL) -> CheckResult:
    gate = _sender_gate(traj, "classification")
    if gate:
        return gate
    w = sequence_terms(traj.coupling.weights, traj.n)
    theta0 = csum(w * traj.phases[0])
    try:
        cls = classify_asymptotic(traj.phases[-1], w, theta0, tol, traj.equilibrium)
    except NotConverged as exc:
        return CheckResult("classification", Status.FLAGGED, message=str(exc))
    measured = {"kind": cls.kind, "theta0": theta0, **(cls.distances or {})}
    if cls.kind == "BiCluster":
        measured.update(outlier=cls.outlier, sign=cls.sign)
    if cls.kind == "Unresolved":
        return CheckResult("classification", Status.FLAGGED, measured, "no candidate limit matched")
    if cls.kind == "FullSync":
        measured["limit_error"] = abs(cls.theta_limit - theta0)
        return verdict("classification", measured["limit_error"] < tol, **measured)
    return verdict("classification", True, **measured)


def collision_avoidance_check(traj: Trajectory) -> CheckResult:
    """Initial ordering of distinct phases is kept, and the spread stays within 2 pi."""
    gate = _sender_gate(traj, "collision_avoidance")
    if gate:
        return gate
    order = np.argsort(traj.phases[0], kind="stable")
    if np.any(np.diff(traj.phases[0][order]) <= 0):
        return CheckResult("collision_avoidance", Status.NOT_APPLICABLE, message="initial phases not distinct")
    ordered = traj.phases[:, order]
    gaps = np.diff(ordered, axis=1)
    spread = ordered[:, -1] - ordered[:, 0]
    order_violations = int(np.sum(gaps < 0))
    # the 2 pi window is attained in the limit when clusters lock 2 pi apart
    allow = 16.0 * _EPS * max(1.0, float(np.max(np.abs(ordered))))
    window_violations = int(np.sum(spread > 2.0 * math.pi + allow))
    return verdict(
        "collision_avoidance",
        order_violations == 0 and window_violations == 0,
        order_violations=order_violations,
        window_violations=window_violations,
        min_gap=float(gaps.min()) if gaps.size else 0.0,
        max_spread=float(spread.max()),
    )


def cross_ratio_constancy_check(traj: Trajectory, tuples: Sequence[tuple[int, int, int, int]] | None = None,
                                rel_tol: float = 1e-6) -> CheckResult:
    """Max |C(t) - C(0)| per tuple; tuples that collapse below the gap floor are truncated and flagged."""
    gate = _sender_gate(traj, "cross_ratio_constancy")
    if gate:
        return gate
    tuples = all_tuples(traj.n) if tuples is None else [tuple(t) for t in tuples]
    if not tuples:
        return CheckResult("cross_ratio_constancy", Status.NOT_APPLICABLE, message="fewer than 4 oscillators")
    per_tuple = {}
    failed = flagged = 0
    for tp in tuples:
        try:
            c0 = cross_ratio(traj.phases[0], *tp)
        except DegenerateTuple:
            per_tuple[str(tp)] = {"status": "degenerate at t=0"}
            flagged += 1
            continue
        dev, cut = 0.0, None
        for s in range(1, len(traj.times)):
            try:
                c = cross_ratio(traj.phases[s], *tp)
            except DegenerateTuple:
                cut = float(traj.times[s - 1])
                break
            dev = max(dev, abs(c - c0))
        bad = dev >= rel_tol * (1.0 + abs(c0))
        failed += bad
        flagged += cut is not None and not bad
        per_tuple[str(tp)] = {"c0": c0.real, "max_deviation": dev, "truncated_at": cut}
    status = Status.FAIL if failed else (Status.FLAGGED if flagged else Status.PASS)
    return CheckResult("cross_ratio_constancy", status,
                       {"tuples": len(tuples), "failed": failed, "flagged": flagged, "per_tuple": per_tuple})


# ---------------------------------------------------------------------------
# practical synchronization and frequency decay


def practical_sync_gamma(d_nu: float, tilde_kappa_l1: float, k_minus: float) -> float:
    """gamma = arcsin(D(V) / (||tilde kappa||_1 ||K||_{-inf,1}))."""
    if not (tilde_kappa_l1 > 0.0 and k_minus > 0.0):
        raise HypothesisViolated("witness norm and lower row sum must be positive")
    if d_nu < 0.0:
        raise HypothesisViolated("frequency diameter must be nonnegative")
    ratio = d_nu / (tilde_kappa_l1 * k_minus)
    if ratio >= 1.0:
        raise HypothesisViolated(f"D(V) / (||tilde kappa||_1 k_minus) = {ratio} must be below 1")
    return math.asin(ratio)


def practical_sync_check(traj: Trajectory, gamma: float, window: float = 0.25, slack: float = GAMMA_SLACK) -> CheckResult:
    d0 = diameter(traj.initial())
    if not (gamma < d0 < math.pi - gamma) and d0 != 0.0:
        return CheckResult("practical_sync", Status.NOT_APPLICABLE,
                           {"initial_diameter": d0, "gamma": gamma}, "initial diameter outside (gamma, pi - gamma)")
    t = traj.times
    tail = t >= t[-1] * (1.0 - window)
    d = _diameters(traj)[tail]
    sup = float(d.max())
    return verdict("practical_sync", sup <= gamma + slack, tail_sup=sup, gamma=gamma, slack=slack, window=window)


def _tail_slope(t: np.ndarray, y: np.ndarray, floor: float) -> float | None:
    keep = y > floor
    tt, yy = t[keep], y[keep]
    if tt.size < 4:
        return None
    half = tt.size // 2
    return float(np.polyfit(tt[half:], np.log(yy[half:]), 1)[0])


def exponential_decay_check(traj: Trajectory, final_tol: float = 1e-6) -> CheckResult:
    """Homogeneous runs: log D(theta) decays with negative slope and the final diameter is tiny."""
    if not traj.frequencies.is_homogeneous:
        return CheckResult("exponential_decay", Status.NOT_APPLICABLE, message="needs homogeneous frequencies")
    d = _diameters(traj)
    floor = 1e3 * _EPS * max(1.0, float(np.max(np.abs(traj.phases))))
    slope = _tail_slope(traj.times, d, floor)
    ok = slope is not None and slope < 0.0 and d[-1] < final_tol
    return verdict("exponential_decay", ok, slope=slope, final_diameter=float(d[-1]), final_tol=final_tol)


def first_entrance_time(traj: Trajectory, margin: float = 0.1) -> int:
    """Index of the first sample with D(theta) < pi/2 - margin."""
    d = _diameters(traj)
    hit = np.nonzero(d < math.pi / 2.0 - margin)[0]
    if hit.size == 0:
        raise NoEntranceTime(f"D(theta) never fell below pi/2 - {margin}")
    return int(hit[0])


def frequency_decay_check(traj: Trajectory, k: CouplingMatrix | None = None, margin: float = 0.1,
                          max_slope: float = -1e-3) -> CheckResult:
    """Envelope D(W(t)) <= D(W(t0)) exp(-(3 ||K||_{inf,1} log 2 / 32)(t - t0) + 1) for t >= t0."""
    k = traj.coupling if k is None else k
    if not isinstance(k, Sender):
        return CheckResult("frequency_decay", Status.NOT_APPLICABLE, message="needs a sender network")
    if traj.omegas is None:
        return CheckResult("frequency_decay", Status.NOT_APPLICABLE, message="run without the second-order system")
    s0 = first_entrance_time(traj, margin)
    rate = 3.0 * k.norm_inf_one() * math.log(2.0) / 32.0
    t = traj.times[s0:]
    dw = np.ptp(traj.omegas[s0:], axis=1)
    envelope = dw[0] * np.exp(-rate * (t - t[0]) + 1.0)
    violations = int(np.sum(dw > envelope))
    floor = 1e3 * _EPS * max(1.0, float(np.max(np.abs(traj.omegas))))
    slope = _tail_slope(t, dw, floor)
    ok = violations == 0 and slope is not None and slope <= max_slope
    return verdict(
        "frequency_decay",
        ok,
        t0=float(t[0]),
        initial_frequency_diameter=float(dw[0]),
        envelope_violations=violations,
        theoretical_rate=-rate,
        fitted_slope=slope,
        max_slope=max_slope,
    )


# ---------------------------------------------------------------------------
# elementary inequalities


def trig_lemma_checks(sample_count: int = 100_000, seed: int = 0) -> CheckResult:
    """Sampled checks of two trigonometric inequalities.

    (i)  sin(c-a) + sin(a-b) + sin(b-c) <= 4 sin(e2/2) when 0 <= c-a <= pi-e1,
         a-e2 <= b <= c+e2 and 0 <= e2 <= e1.
    (ii) |2 sin(x + h/2) sin(h/2) - h sin x| <= h^2 when |h| < 1.

    Both sides are compared with a rounding allowance of a few ulps of the
    magnitudes involved.
    """
    rng = np.random.Generator(np.random.Philox(seed))
    m = sample_count + sample_count // 10 + 64  # oversample, keep the first valid ones
    e1 = math.pi * rng.random(m)
    e2 = e1 * rng.random(m)
    a = 2.0 * math.pi * rng.random(m)
    c = a + (math.pi - e1) * rng.random(m)
    b = (a - e2) + ((c + e2) - (a - e2)) * rng.random(m)
    # boundary corners: b at either end, c - a at its maximum, a = b = c
    q = m // 8
    b[:q] = a[:q] - e2[:q]
    b[q:2 * q] = c[q:2 * q] + e2[q:2 * q]
    c[2 * q:3 * q] = a[2 * q:3 * q] + (math.pi - e1[2 * q:3 * q])
    b[2 * q:3 * q] = np.minimum(b[2 * q:3 * q], c[2 * q:3 * q] + e2[2 * q:3 * q])
    b[3 * q:3 * q + 16] = a[3 * q:3 * q + 16]
    c[3 * q:3 * q + 16] = a[3 * q:3 * q + 16]
    valid = (c - a >= 0) & (c - a <= math.pi - e1) & (a - e2 <= b) & (b <= c + e2) & (e2 <= e1)
    a, b, c, e1, e2 = (v[valid][:sample_count] for v in (a, b, c, e1, e2))
    lhs1 = np.sin(c - a) + np.sin(a - b) + np.sin(b - c)
    rhs1 = 4.0 * np.sin(e2 / 2.0)
    allow1 = 8.0 * _EPS * (2.0 + np.abs(a) + np.abs(b) + np.abs(c))
    v1 = int(np.sum(lhs1 > rhs1 + allow1))

    m = sample_count
    x = 2.0 * math.pi * (rng.random(m) - 0.5)
    h = np.nextafter(1.0, 0.0) * (2.0 * rng.random(m) - 1.0)
    h[:16] = 0.0
    h[16:32] = np.nextafter(1.0, 0.0)
    lhs2 = np.abs(2.0 * np.sin(x + h / 2.0) * np.sin(h / 2.0) - h * np.sin(x))
    allow2 = 4.0 * _EPS * np.abs(h)
    v2 = int(np.sum(lhs2 > h**2 + allow2))
    return verdict(
        "trig_lemmas",
        v1 == 0 and v2 == 0,
        additive_samples=int(a.size),
        additive_violations=v1,
        additive_worst_margin=float(np.max(lhs1 - rhs1)),
        half_angle_samples=m,
        half_angle_violations=v2,
        half_angle_worst_ratio=float(np.max(lhs2[h != 0] / h[h != 0] ** 2)),
    )
