"""Execute a scenario: integrate, stream diagnostics to CSV, write a JSON summary, run checks."""

from __future__ import annotations

import csv
import json
import math
import os
import time
import traceback
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .. import diagnostics as dg
from ..dynamics import Trajectory, derivative_bounds_check, integrate
from ..errors import HypothesisViolated, IklError, NoEntranceTime
from ..results import CheckResult, Status
from .scenario import Scenario

DEFAULT_OUT_DIR = "ikl_out"


def output_root(out: str | os.PathLike | None = None) -> Path:
    """--out beats IKL_OUT_DIR beats ./ikl_out."""
    return Path(out or os.environ.get("IKL_OUT_DIR") or DEFAULT_OUT_DIR)


@dataclass
class RunReport:
    scenario: str
    config_hash: str
    checks: dict[str, CheckResult] = field(default_factory=dict)
    measured: dict[str, Any] = field(default_factory=dict)
    tail_certificate: float = 0.0
    wall_clock: float = 0.0
    config: dict[str, Any] = field(default_factory=dict)
    csv_path: str | None = None
    json_path: str | None = None
    error: str | None = None
    trajectory: Trajectory | None = field(default=None, repr=False)

    @property
    def ok(self) -> bool:
        return self.error is None and all(c.status is not Status.FAIL for c in self.checks.values())

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema": "ikl.run_report/1",
            "scenario": self.scenario,
            "config_hash": self.config_hash,
            "ok": self.ok,
            "error": self.error,
            "tail_certificate": self.tail_certificate,
            "wall_clock_seconds": self.wall_clock,
            "measured": self.measured,
            "checks": {k: v.to_dict() for k, v in self.checks.items()},
            "config": self.config,
            "outputs": {"csv": self.csv_path, "json": self.json_path},
        }


def _jsonable(x: Any) -> Any:
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


def write_csv(path: Path, records: list[dg.DiagnosticsRecord]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(dg.DiagnosticsRecord.CSV_COLUMNS)
        for rec in records:
            w.writerow(rec.csv_row())


def practical_gamma(scenario: Scenario) -> float:
    """gamma for the scenario, or HypothesisViolated when the estimate does not apply."""
    fw = scenario.framework()
    if not (fw.f1_holds and fw.f2_holds and fw.f3_holds):
        raise HypothesisViolated(f"frameworks not satisfied: {fw.notes}")
    d_nu = scenario.frequency_vector().diameter(scenario.truncation_N)
    return dg.practical_sync_gamma(d_nu, fw.witness_l1, fw.k_minus)


def run_check(name: str, params: dict, scenario: Scenario, traj: Trajectory) -> CheckResult:
    params = dict(params)
    try:
        if name == "constant_diameter":
            return dg.constant_diameter_check(traj, **params)
        if name == "diameter_monotone":
            return dg.diameter_monotone_check(traj, **params)
        if name == "complete_sync":
            return dg.complete_sync_check(traj, **params)
        if name == "lyapunov_identity":
            return dg.lyapunov_identity_check(traj, **params)
        if name == "derivative_bounds":
            return derivative_bounds_check(traj)
        if name == "weighted_sum_conservation":
            return dg.weighted_sum_conservation_check(traj, **params)
        if name == "equilibrium":
            return dg.equilibrium_check(traj)
        if name == "r_monotonicity":
            return dg.r_monotonicity_check(traj, **params)
        if name == "phase_quantization":
            return dg.phase_quantization_check(traj, **params)
        if name == "classification":
            return dg.classification_check(traj, **params)
        if name == "collision_avoidance":
            return dg.collision_avoidance_check(traj)
        if name == "cross_ratio_constancy":
            return dg.cross_ratio_constancy_check(traj, tuples=params.pop("tuples", scenario.cross_ratio_tuples), **params)
        if name == "practical_sync":
            try:
                gamma = practical_gamma(scenario)
            except HypothesisViolated as exc:
                return CheckResult(name, Status.NOT_APPLICABLE, message=str(exc))
            return dg.practical_sync_check(traj, gamma, **params)
        if name == "exponential_decay":
            return dg.exponential_decay_check(traj, **params)
        if name == "frequency_decay":
            return dg.frequency_decay_check(traj, **params)
    except NoEntranceTime as exc:
        return CheckResult(name, Status.FLAGGED, message=str(exc))
    except (IklError, ValueError, TypeError, ArithmeticError) as exc:
        return CheckResult(name, Status.FAIL, message=f"{type(exc).__name__}: {exc}")
    raise KeyError(name)


def run(
    scenario: Scenario,
    out_dir: str | os.PathLike | None = None,
    threads: int = 1,
    write: bool = True,
) -> RunReport:
    """Run one scenario. Errors become a failed report rather than an exception."""
    t0 = time.perf_counter()
    report = RunReport(scenario.name, scenario.config_hash(), config=_jsonable(scenario.config),
                       tail_certificate=scenario.tail_certificate())
    try:
        traj = integrate(scenario, threads=threads)
        report.trajectory = traj
        recs = traj.diagnostics
        last = recs[-1]
        report.measured = _jsonable({
            "step": traj.step,
            "steps": int(round(traj.times[-1] / traj.step)),
            "samples": len(recs),
            "equilibrium": traj.equilibrium,
            "initial_diameter": recs[0].d_theta,
            "final_diameter": last.d_theta,
            "final_rhs_l2": last.rhs_l2,
            "final_rhs_linf": last.rhs_linf,
            "final_r": last.r,
            "tail_bound": scenario.topology.tail_bound(scenario.truncation_N),
            "tail_within_budget": report.tail_certificate <= scenario.tail_budget,
            "framework": scenario.framework().to_dict(),
        })
        for name, params in scenario.checks.items():
            res = run_check(name, params, scenario, traj)
            res.measured = _jsonable(res.measured)
            report.checks[name] = res
        if write:
            root = output_root(out_dir)
            csv_path = root / scenario.outputs["csv"]
            write_csv(csv_path, recs)
            report.csv_path = str(csv_path)
    except Exception as exc:  # a run never crashes the caller
        report.error = f"{type(exc).__name__}: {exc}"
        report.measured["traceback"] = traceback.format_exc(limit=5)
        for name in scenario.checks:
            report.checks.setdefault(name, CheckResult(name, Status.FAIL, message=f"run failed: {report.error}"))
    report.wall_clock = time.perf_counter() - t0
    if write:
        root = output_root(out_dir)
        json_path = root / scenario.outputs["json"]
        report.json_path = str(json_path)
        json_path.parent.mkdir(parents=True, exist_ok=True)
        json_path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    return report
