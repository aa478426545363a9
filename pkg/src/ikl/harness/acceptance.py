"""The acceptance suite: seventeen desk-scale scenarios with fixed tolerances.

Each criterion is a function returning ``(passed, measured)``. Runs shared
between criteria (for example the complete-synchronization runs reused by the
Lyapunov and derivative-bound criteria) are computed once per suite.
"""

from __future__ import annotations

import filecmp
import logging
import math
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .. import diagnostics as dg
from ..dynamics import Trajectory, derivative_bounds_check, lipschitz_check
from ..ensemble import FrequencyVector, seeded_uniform
from ..results import Status
from ..topology import FiniteEmbedded, Geometric, GeometricCross, PowerLaw, ProductSummable, Sender
from .runner import RunReport, run
from .scenario import scenario_from_dict

log = logging.getLogger(__name__)

SEEDS = range(20)
TAIL_LIMIT = 1e-4  # tail certificate x t_end for every acceptance run


def halving_weights(n: int) -> list[float]:
    """2^-j for j = 1..n; the sender family renormalizes them to total 1."""
    return [2.0**-j for j in range(1, n + 1)]


def _doc(name: str, topology: dict, n: int, initial: dict, t_end: float, **extra: Any) -> dict:
    doc = {
        "schema_version": 1,
        "name": name,
        "topology": topology,
        "truncation_N": n,
        "initial": initial,
        "integrator": {"t_end": t_end},
    }
    step = extra.pop("step", None)
    if step is not None:
        doc["integrator"]["step"] = step
    doc.update(extra)
    return doc


HALF_GEOMETRIC = {"kind": "geometric", "ratio": 0.5, "scale": 0.5}


def constant_diameter_doc() -> dict:
    return _doc("c01_constant_diameter", {"family": "geometric_cross", "base": 3.0}, 20,
                {"kind": "alternating", "amplitude": math.pi / 3}, 50.0, step=0.05,
                checks={"constant_diameter": {"target": 2.0 * math.pi / 3.0, "tol": 1e-3}})


def monotone_doc(seed: int) -> dict:
    return _doc("c02_diameter_monotone", {"family": "product_summable", "sequence": HALF_GEOMETRIC}, 32,
                {"kind": "uniform_arc", "width": 0.9 * math.pi}, 100.0, seed=seed,
                checks=["diameter_monotone"])


def complete_sync_doc(seed: int) -> dict:
    return _doc("c03_complete_sync", {"family": "product_summable", "sequence": HALF_GEOMETRIC}, 32,
                {"kind": "uniform_arc", "width": 0.9 * math.pi}, 200.0, seed=seed,
                checks=["complete_sync", "lyapunov_identity"])


def sender_doc(name: str, n: int, t_end: float, seed: int = 0, width: float = 1.5 * math.pi,
               frequencies: dict | None = None, **extra: Any) -> dict:
    topo = {"family": "sender", "weights": {"kind": "explicit", "values": halving_weights(n)}, "normalized": True}
    doc = _doc(name, topo, n, {"kind": "uniform_arc", "width": width, "center": math.pi}, t_end, seed=seed, **extra)
    if frequencies is not None:
        doc["frequencies"] = frequencies
    return doc


def practical_sync_doc() -> dict:
    return sender_doc("c13_practical_sync", 16, 300.0, width=2.0,
                      frequencies={"kind": "uniform", "spread": 0.05}, sample_stride=10,
                      checks=["practical_sync"])


# ---------------------------------------------------------------------------


@dataclass
class Context:
    threads: int = 1
    cache: dict = field(default_factory=dict)

    def run(self, key: Any, doc: dict) -> RunReport:
        if key not in self.cache:
            report = run(scenario_from_dict(doc), threads=self.threads, write=False)
            if report.error:
                raise RuntimeError(f"{doc['name']}: {report.error}")
            self.cache[key] = report
        return self.cache[key]

    def traj(self, key: Any, doc: dict) -> Trajectory:
        return self.run(key, doc).trajectory


def _tail_ok(reports: list[RunReport]) -> tuple[bool, float]:
    worst = max(r.tail_certificate for r in reports)
    return worst <= TAIL_LIMIT, worst


# ---------------------------------------------------------------------------
# criteria


def c01(ctx: Context) -> tuple[bool, dict]:
    rep = ctx.run("c01", constant_diameter_doc())
    chk = rep.checks["constant_diameter"]
    return chk.passed and _tail_ok([rep])[0], {**chk.measured, "tail_certificate": rep.tail_certificate}


def c02(ctx: Context) -> tuple[bool, dict]:
    reps = [ctx.run(("c02", s), monotone_doc(s)) for s in SEEDS]
    worst = max(r.checks["diameter_monotone"].measured["max_increase"] for r in reps)
    failed = [s for s, r in zip(SEEDS, reps) if not r.checks["diameter_monotone"].passed]
    tail_ok, tail = _tail_ok(reps)
    return not failed and tail_ok, {"max_increase": worst, "failed_seeds": failed, "tail_certificate": tail}


CRITERION3_SEEDS = range(4)


def c03(ctx: Context) -> tuple[bool, dict]:
    reps = [ctx.run(("c03", s), complete_sync_doc(s)) for s in CRITERION3_SEEDS]
    finals = [r.checks["complete_sync"].measured["final_rhs_l2"] for r in reps]
    tail_ok, tail = _tail_ok(reps)
    return all(r.checks["complete_sync"].passed for r in reps) and tail_ok, {
        "final_rhs_l2": finals, "tol": 1e-4, "tail_certificate": tail}


def c04(ctx: Context) -> tuple[bool, dict]:
    reps = [ctx.run(("c03", s), complete_sync_doc(s)) for s in CRITERION3_SEEDS]
    checks = [r.checks["lyapunov_identity"] for r in reps]
    return all(c.passed for c in checks), {
        "fraction_within_tol": [c.measured["fraction_within_tol"] for c in checks],
        "max_error": max(c.measured["max_error"] for c in checks),
    }


GRADIENT_N = 10


def c05(ctx: Context) -> tuple[bool, dict]:
    k = ProductSummable(Geometric(0.5, 0.5))
    worst_grad, violations, fails = 0.0, 0, 0
    for s in range(100):
        theta = 2.0 * math.pi * (seeded_uniform(s, 0, GRADIENT_N) - 0.5)
        res = dg.gradient_check(theta, k, n_perturbations=10, seed=s)
        worst_grad = max(worst_grad, res.measured["max_gradient_error"])
        violations += res.measured["remainder_violations"]
        fails += not res.passed
    return fails == 0 and worst_grad <= 1e-6, {
        "states": 100, "perturbations": 1000, "max_gradient_error": worst_grad,
        "remainder_violations": violations}


def lipschitz_families() -> dict[str, Any]:
    return {
        "product_summable": ProductSummable(Geometric(0.5, 0.5)),
        "power_law_product": ProductSummable(PowerLaw(2.0)),
        "geometric_cross": GeometricCross(3.0),
        "sender": Sender(Geometric(0.5, 0.5)),
        "finite_embedded": FiniteEmbedded(((0.0, 1.0, 0.5), (1.0, 0.0, 0.25), (0.5, 0.25, 0.0))),
    }


def c06(ctx: Context) -> tuple[bool, dict]:
    n = 12
    nu = FrequencyVector.per_index(np.linspace(-0.5, 0.5, n))
    violations: dict[str, int] = {}
    worst = 0.0
    for fi, (name, k) in enumerate(lipschitz_families().items()):
        bad = 0
        for pair in range(1000):
            a = 4.0 * math.pi * (seeded_uniform(pair, 10 + 2 * fi, n) - 0.5)
            b = a + 2.0 * (seeded_uniform(pair, 11 + 2 * fi, n) - 0.5) * 10.0 ** (-(pair % 7))
            for p in (1.0, 2.0, math.inf):
                res = lipschitz_check(k, nu, a, b, p)
                bad += not res.passed
                if res.measured["rhs"] > 0:
                    worst = max(worst, res.measured["lhs"] / res.measured["rhs"])
        violations[name] = bad
    return sum(violations.values()) == 0, {"violations": violations, "worst_ratio": worst, "pairs_per_family": 1000}


def c07(ctx: Context) -> tuple[bool, dict]:
    trajs = [("c01", ctx.traj("c01", constant_diameter_doc()))]
    trajs += [(f"c02/{s}", ctx.traj(("c02", s), monotone_doc(s))) for s in SEEDS]
    trajs += [(f"c03/{s}", ctx.traj(("c03", s), complete_sync_doc(s))) for s in CRITERION3_SEEDS]
    violations = {}
    for label, tr in trajs:
        violations[label] = derivative_bounds_check(tr).measured["violations"]
    total = sum(violations.values())
    return total == 0, {"runs": len(trajs), "violations": total}


def c08(ctx: Context) -> tuple[bool, dict]:
    doc = sender_doc("c08_sender_conservation", 24, 100.0, seed=7,
                     frequencies={"kind": "uniform", "spread": 0.2}, checks=["weighted_sum_conservation"])
    rep = ctx.run("c08", doc)
    chk = rep.checks["weighted_sum_conservation"]
    return chk.passed and _tail_ok([rep])[0], dict(chk.measured)


def _homogeneous_sender(seed: int) -> dict:
    # arcs shorter than pi: wider arcs may lock into clusters 2 pi apart, outside the candidate limit set
    return sender_doc("c09_sender_homogeneous", 24, 300.0, seed=seed, width=0.95 * math.pi, sample_stride=2,
                      checks=["r_monotonicity", "phase_quantization", "classification", "collision_avoidance"],
                      diagnostics=["order_parameters", "weighted_sum"])


def _antipodal_doc() -> dict:
    return _doc("c09_antipodal", {"family": "sender", "weights": {"kind": "explicit", "values": [0.25] * 4}}, 4,
                {"kind": "explicit", "values": [0.0, math.pi, 0.0, -math.pi]}, 50.0, checks=["r_monotonicity"])


def c09(ctx: Context) -> tuple[bool, dict]:
    reps = [ctx.run(("c09", s), _homogeneous_sender(s)) for s in SEEDS]
    coherent = [r for r in reps if r.checks["r_monotonicity"].measured["r0"] > 1e-3]
    bad = [s for s, r in zip(SEEDS, reps) if not r.checks["r_monotonicity"].passed]
    anti = ctx.run("c09_antipodal", _antipodal_doc()).checks["r_monotonicity"]
    anti_ok = anti.passed and anti.measured["r0"] == 0.0 and anti.measured["max_phase_change"] == 0.0
    return not bad and anti_ok and len(coherent) > 0, {
        "failed_seeds": bad,
        "coherent_runs": len(coherent),
        "max_r_drop": max(r.checks["r_monotonicity"].measured["max_drop"] for r in reps),
        "max_final_defect": max(r.checks["r_monotonicity"].measured.get("final_defect", 0.0) for r in reps),
        "antipodal_r0": anti.measured["r0"],
        "antipodal_max_phase_change": anti.measured["max_phase_change"],
    }


def c10(ctx: Context) -> tuple[bool, dict]:
    reps = [ctx.run(("c09", s), _homogeneous_sender(s)) for s in SEEDS]
    kinds, bad = {}, []
    for s, r in zip(SEEDS, reps):
        q, c = r.checks["phase_quantization"], r.checks["classification"]
        kinds[s] = c.measured.get("kind")
        if q.status is Status.NOT_APPLICABLE:
            continue
        if not (q.passed and c.passed and kinds[s] in ("FullSync", "BiCluster")):
            bad.append(s)
    return not bad, {"failed_seeds": bad, "classes": kinds,
                     "max_quantization_distance": max(r.checks["phase_quantization"].measured.get("max_distance", 0.0)
                                                      for r in reps)}


def c11(ctx: Context) -> tuple[bool, dict]:
    reps = [ctx.run(("c09", s), _homogeneous_sender(s)) for s in SEEDS]
    checks = [r.checks["collision_avoidance"] for r in reps]
    order = sum(c.measured.get("order_violations", 0) for c in checks)
    window = sum(c.measured.get("window_violations", 0) for c in checks)
    return all(c.passed for c in checks), {"order_violations": order, "window_violations": window,
                                           "min_gap": min(c.measured.get("min_gap", math.inf) for c in checks)}


def c12(ctx: Context) -> tuple[bool, dict]:
    six = sender_doc("c12_cross_ratio", 6, 60.0, seed=3, width=1.8 * math.pi,
                     checks=["cross_ratio_constancy"])
    chk = ctx.run("c12", six).checks["cross_ratio_constancy"]
    square = _doc("c12_cross_ratio_square", {"family": "sender", "weights": {"kind": "explicit", "values": [0.25] * 4}},
                  4, {"kind": "explicit", "values": [0.0, math.pi / 2, math.pi, 1.5 * math.pi]}, 50.0,
                  checks={"cross_ratio_constancy": {"rel_tol": 1e-8}})
    rep = ctx.run("c12_square", square)
    sq = rep.checks["cross_ratio_constancy"]
    c0 = dg.cross_ratio(rep.trajectory.phases[0], 1, 2, 3, 4).real
    dev = sq.measured["per_tuple"]["(1, 2, 3, 4)"]["max_deviation"]
    square_ok = abs(c0 - 2.0) < 1e-12 and dev < 1e-8
    return chk.status in (Status.PASS, Status.FLAGGED) and chk.measured["tuples"] == 15 and square_ok, {
        "tuples": chk.measured["tuples"], "failed": chk.measured["failed"], "flagged": chk.measured["flagged"],
        "status": chk.status.value, "square_value": c0, "square_deviation": dev}


def c13(ctx: Context) -> tuple[bool, dict]:
    rep = ctx.run("c13", practical_sync_doc())
    fw = rep.measured["framework"]
    chk = rep.checks["practical_sync"]
    hyp = fw["f1_holds"] and fw["f2_holds"] and fw["f3_holds"]
    return hyp and chk.passed and _tail_ok([rep])[0], {**chk.measured, "hypotheses": hyp}


def c14(ctx: Context) -> tuple[bool, dict]:
    doc = sender_doc("c14_exponential_decay", 16, 300.0, width=2.0, sample_stride=10, checks=["exponential_decay"])
    chk = ctx.run("c14", doc).checks["exponential_decay"]
    return chk.passed, dict(chk.measured)


def c15(ctx: Context) -> tuple[bool, dict]:
    doc = sender_doc("c15_frequency_decay", 8, 100.0, width=2.0, frequencies={"kind": "uniform", "spread": 0.1},
                     diagnostics=["order_parameters", "second_order"], checks=["frequency_decay"])
    chk = ctx.run("c15", doc).checks["frequency_decay"]
    return chk.passed, dict(chk.measured)


def c16(ctx: Context) -> tuple[bool, dict]:
    res = dg.trig_lemma_checks(100_000, seed=0)
    return res.passed, dict(res.measured)


def c17(ctx: Context) -> tuple[bool, dict]:
    same = {}
    with tempfile.TemporaryDirectory() as tmp:
        for label, doc in (("c01", constant_diameter_doc()), ("c13", practical_sync_doc())):
            paths = []
            for threads in (1, 8):
                scen = scenario_from_dict(doc)
                out = Path(tmp) / f"threads{threads}"
                rep = run(scen, out_dir=out, threads=threads)
                if rep.error:
                    raise RuntimeError(rep.error)
                paths.append(rep.csv_path)
            same[label] = filecmp.cmp(paths[0], paths[1], shallow=False)
    return all(same.values()), {"identical": same}


@dataclass(frozen=True)
class Criterion:
    number: int
    slug: str
    title: str
    fn: Callable[[Context], tuple[bool, dict]]
    runtime_limit: float | None = None

    @property
    def label(self) -> str:
        return f"c{self.number:02d}_{self.slug}"


CRITERIA = (
    Criterion(1, "constant_diameter", "constant diameter 2pi/3 for the 3^-(i+j) network", c01, 5.0),
    Criterion(2, "diameter_monotone", "diameter never increases, 20 seeds", c02, 30.0),
    Criterion(3, "complete_sync", "final ||theta_dot||_2 < 1e-4 at T=200", c03, 10.0),
    Criterion(4, "lyapunov_identity", "dP/dt = -||theta_dot||^2 along criterion-3 runs", c04),
    Criterion(5, "gradient_flow", "finite-difference gradient and quadratic remainder", c05, 10.0),
    Criterion(6, "lipschitz", "Lipschitz bounds over five families and p in {1,2,inf}", c06),
    Criterion(7, "derivative_bounds", "derivative bounds along criteria 1-3 runs", c07),
    Criterion(8, "sender_conservation", "weighted phase sum balance for a sender network", c08),
    Criterion(9, "order_parameter", "r nondecreasing, dichotomy, antipodal stationarity", c09),
    Criterion(10, "phase_quantization", "differences at multiples of pi, FullSync or BiCluster", c10),
    Criterion(11, "collision_avoidance", "ordering preserved, spread within 2pi", c11),
    Criterion(12, "cross_ratio", "cross ratio constancy, equally spaced value 2", c12, 5.0),
    Criterion(13, "practical_sync", "tail diameter below gamma + 0.05", c13, 10.0),
    Criterion(14, "exponential_decay", "homogeneous diameter decays exponentially", c14),
    Criterion(15, "frequency_decay", "frequency diameter under the exponential envelope", c15, 10.0),
    Criterion(16, "trig_lemmas", "two trigonometric inequalities on 1e5 samples", c16, 2.0),
    Criterion(17, "determinism", "byte-identical CSV for 1 and 8 threads", c17),
)


@dataclass
class CriterionResult:
    criterion: Criterion
    passed: bool
    runtime: float
    measured: dict = field(default_factory=dict)
    message: str = ""

    def line(self) -> str:
        c = self.criterion
        limit = f" (limit {c.runtime_limit:g}s)" if c.runtime_limit else ""
        tail = f" -- {self.message}" if self.message else ""
        return f"[{'PASS' if self.passed else 'FAIL'}] {c.label}: {c.title} [{self.runtime:.2f}s{limit}]{tail}"

    def to_dict(self) -> dict:
        return {"criterion": self.criterion.number, "name": self.criterion.label, "title": self.criterion.title,
                "passed": self.passed, "runtime_seconds": self.runtime,
                "runtime_limit_seconds": self.criterion.runtime_limit, "measured": self.measured,
                "message": self.message}


@dataclass
class SuiteReport:
    results: list[CriterionResult] = field(default_factory=list)
    warning: str | None = None

    @property
    def ok(self) -> bool:
        return all(r.passed for r in self.results)

    def to_dict(self) -> dict:
        return {"schema": "ikl.acceptance_report/1", "ok": self.ok, "warning": self.warning,
                "criteria": [r.to_dict() for r in self.results]}


def select(pattern: str | None) -> list[Criterion]:
    if not pattern:
        return list(CRITERIA)
    pat = pattern.lower()
    return [c for c in CRITERIA if pat in c.label or pat in c.title.lower() or pat == str(c.number)]


def evaluate(criterion: Criterion, ctx: Context) -> CriterionResult:
    t0 = time.perf_counter()
    try:
        passed, measured = criterion.fn(ctx)
        message = ""
    except Exception as exc:  # a broken criterion is a failed criterion
        passed, measured, message = False, {}, f"{type(exc).__name__}: {exc}"
    runtime = time.perf_counter() - t0
    if criterion.runtime_limit is not None and runtime >= criterion.runtime_limit:
        passed = False
        message = (message + "; " if message else "") + f"runtime {runtime:.2f}s over limit"
    return CriterionResult(criterion, bool(passed), runtime, measured, message)


def acceptance_suite(pattern: str | None = None, threads: int = 1,
                     on_result: Callable[[CriterionResult], None] | None = None) -> SuiteReport:
    """Run every criterion whose label or title contains ``pattern``."""
    chosen = select(pattern)
    report = SuiteReport()
    if not chosen:
        report.warning = f"no acceptance criterion matches {pattern!r}"
        log.warning(report.warning)
        return report
    ctx = Context(threads=threads)
    for c in chosen:
        res = evaluate(c, ctx)
        report.results.append(res)
        if on_result:
            on_result(res)
    return report
