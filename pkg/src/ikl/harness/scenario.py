"""Scenario files: YAML with a versioned, closed schema.

Every section rejects unknown keys. Structural problems raise
:class:`ConfigError` naming the field (and its line when read from a file);
physically inconsistent values raise :class:`ValidationError`.
"""

from __future__ import annotations

import copy
import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from ..diagnostics import DIAGNOSTIC_SWITCHES
from ..dynamics import IntegratorConfig
from ..ensemble import (
    DROPPED,
    FrequencyVector,
    Frozen,
    PhaseState,
    alternating,
    seeded_uniform,
    uniform_in_arc,
)
from ..errors import ConfigError, ValidationError
from ..topology import (
    DEFAULT_SENDER_EPSILON,
    CouplingMatrix,
    Explicit,
    FiniteEmbedded,
    FrameworkReport,
    Geometric,
    GeometricCross,
    PositiveSequence,
    PowerLaw,
    ProductSummable,
    Sender,
    UniformFinite,
    validate_framework,
)

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
REQUIRED = object()

INITIAL_STREAM = 0
FREQUENCY_STREAM = 1

CHECK_NAMES = frozenset({
    "constant_diameter", "diameter_monotone", "complete_sync", "lyapunov_identity",
    "derivative_bounds", "weighted_sum_conservation", "equilibrium", "r_monotonicity",
    "phase_quantization", "classification", "collision_avoidance", "cross_ratio_constancy",
    "practical_sync", "exponential_decay", "frequency_decay",
})


class _Reader:
    """Typed access to a nested mapping with path-aware errors."""

    def __init__(self, lines: dict[str, int] | None = None):
        self.lines = lines or {}

    def fail(self, message: str, path: str) -> ConfigError:
        return ConfigError(message, field=path, line=self.lines.get(path))

    def section(self, data: Any, path: str, spec: dict[str, tuple[Any, Any]]) -> dict[str, Any]:
        if not isinstance(data, dict):
            raise self.fail("expected a mapping", path)
        unknown = sorted(set(data) - set(spec))
        if unknown:
            sub = f"{path}.{unknown[0]}" if path else str(unknown[0])
            raise self.fail(f"unknown key '{unknown[0]}'", sub)
        out = {}
        for key, (kind, default) in spec.items():
            sub = f"{path}.{key}" if path else key
            if key not in data:
                if default is REQUIRED:
                    raise self.fail("missing required key", sub)
                out[key] = copy.deepcopy(default)
                continue
            out[key] = self.coerce(data[key], kind, sub)
        return out

    def coerce(self, value: Any, kind: Any, path: str) -> Any:
        if value is None:
            return None
        if kind is float:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise self.fail(f"expected a number, got {value!r}", path)
            if not math.isfinite(value):
                raise self.fail("must be finite", path)
            return float(value)
        if kind is int:
            if isinstance(value, bool) or not isinstance(value, int):
                raise self.fail(f"expected an integer, got {value!r}", path)
            return value
        if kind is bool:
            if not isinstance(value, bool):
                raise self.fail(f"expected true/false, got {value!r}", path)
            return value
        if kind is str:
            if not isinstance(value, str):
                raise self.fail(f"expected a string, got {value!r}", path)
            return value
        if kind is list:
            if not isinstance(value, list):
                raise self.fail("expected a list", path)
            return value
        return value


def _line_map(text: str) -> dict[str, int]:
    """Dotted key path -> 1-based line number, for error messages."""
    out: dict[str, int] = {}

    def walk(node: yaml.Node, path: str) -> None:
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                sub = f"{path}.{k.value}" if path else str(k.value)
                out[sub] = k.start_mark.line + 1
                walk(v, sub)

    try:
        root = yaml.compose(text)
    except yaml.YAMLError:
        return out
    if root is not None:
        walk(root, "")
    return out


# ---------------------------------------------------------------------------
# sub-specifications


def _sequence(r: _Reader, data: Any, path: str) -> tuple[PositiveSequence, dict]:
    if not isinstance(data, dict) or "kind" not in data:
        raise r.fail("sequence needs a 'kind'", path)
    kind = data["kind"]
    try:
        if kind == "geometric":
            s = r.section(data, path, {"kind": (str, REQUIRED), "ratio": (float, REQUIRED), "scale": (float, 1.0)})
            return Geometric(s["ratio"], s["scale"]), s
        if kind == "power_law":
            s = r.section(data, path, {"kind": (str, REQUIRED), "exponent": (float, REQUIRED), "scale": (float, 1.0)})
            return PowerLaw(s["exponent"], s["scale"]), s
        if kind == "explicit":
            s = r.section(data, path, {"kind": (str, REQUIRED), "values": (list, REQUIRED)})
            vals = [r.coerce(v, float, f"{path}.values") for v in s["values"]]
            s["values"] = vals
            return Explicit(tuple(vals)), s
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ValidationError(f"{path}: {exc}") from exc
    raise r.fail(f"unknown sequence kind {kind!r}", f"{path}.kind")


def _topology(r: _Reader, data: Any) -> tuple[CouplingMatrix, dict]:
    path = "topology"
    if not isinstance(data, dict) or "family" not in data:
        raise r.fail("topology needs a 'family'", path)
    fam = data["family"]
    try:
        if fam == "product_summable":
            s = r.section(data, path, {"family": (str, REQUIRED), "sequence": (dict, REQUIRED)})
            seq, norm = _sequence(r, s["sequence"], f"{path}.sequence")
            s["sequence"] = norm
            return ProductSummable(seq), s
        if fam == "geometric_cross":
            s = r.section(data, path, {"family": (str, REQUIRED), "base": (float, REQUIRED)})
            return GeometricCross(s["base"]), s
        if fam == "sender":
            s = r.section(data, path, {"family": (str, REQUIRED), "weights": (dict, REQUIRED),
                                       "normalized": (bool, True), "epsilon": (float, DEFAULT_SENDER_EPSILON)})
            seq, norm = _sequence(r, s["weights"], f"{path}.weights")
            s["weights"] = norm
            return Sender(seq, s["normalized"], s["epsilon"]), s
        if fam == "finite_embedded":
            s = r.section(data, path, {"family": (str, REQUIRED), "entries": (list, REQUIRED)})
            rows = []
            for row in s["entries"]:
                if not isinstance(row, list):
                    raise r.fail("entries must be a list of rows", f"{path}.entries")
                rows.append([r.coerce(x, float, f"{path}.entries") for x in row])
            s["entries"] = rows
            return FiniteEmbedded(tuple(tuple(x) for x in rows)), s
        if fam == "uniform_finite":
            s = r.section(data, path, {"family": (str, REQUIRED), "n": (int, REQUIRED), "strength": (float, REQUIRED)})
            return UniformFinite(s["n"], s["strength"]), s
    except ValueError as exc:
        if isinstance(exc, (ConfigError, ValidationError)):
            raise
        raise ValidationError(f"{path}: {exc}") from exc
    raise r.fail(f"unknown topology family {fam!r}", f"{path}.family")


def _initial(r: _Reader, data: Any) -> dict:
    path = "initial"
    if not isinstance(data, dict) or "kind" not in data:
        raise r.fail("initial data needs a 'kind'", path)
    kind = data["kind"]
    specs = {
        "explicit": {"values": (list, REQUIRED)},
        "alternating": {"amplitude": (float, math.pi / 3)},
        "uniform_arc": {"width": (float, REQUIRED), "center": (float, 0.0), "seed": (int, None)},
        "constant": {"value": (float, 0.0)},
    }
    if kind not in specs:
        raise r.fail(f"unknown initial kind {kind!r}", f"{path}.kind")
    s = r.section(data, path, {"kind": (str, REQUIRED), **specs[kind]})
    if kind == "explicit":
        s["values"] = [r.coerce(v, float, f"{path}.values") for v in s["values"]]
    if kind == "uniform_arc" and s["width"] < 0:
        raise ValidationError("initial.width must be nonnegative")
    return s


def _frequencies(r: _Reader, data: Any) -> dict:
    path = "frequencies"
    if data is None:
        return {"kind": "zero"}
    if not isinstance(data, dict) or "kind" not in data:
        raise r.fail("frequencies need a 'kind'", path)
    kind = data["kind"]
    specs = {
        "zero": {},
        "constant": {"value": (float, REQUIRED)},
        "uniform": {"spread": (float, REQUIRED), "center": (float, 0.0), "seed": (int, None)},
        "explicit": {"values": (list, REQUIRED)},
    }
    if kind not in specs:
        raise r.fail(f"unknown frequency kind {kind!r}", f"{path}.kind")
    s = r.section(data, path, {"kind": (str, REQUIRED), **specs[kind]})
    if kind == "explicit":
        s["values"] = [r.coerce(v, float, f"{path}.values") for v in s["values"]]
    if kind == "uniform" and s["spread"] < 0:
        raise ValidationError("frequencies.spread must be nonnegative")
    return s


# ---------------------------------------------------------------------------
# scenario


@dataclass
class Scenario:
    name: str
    topology: CouplingMatrix
    truncation_N: int
    initial: dict
    frequencies: dict
    integrator: IntegratorConfig
    sample_stride: int = 1
    diagnostics: frozenset = DIAGNOSTIC_SWITCHES
    cross_ratio_tuples: list | None = None
    checks: dict = field(default_factory=dict)
    equilibrium_tol: float = 1e-6
    tail_budget: float = 1e-4
    tail_model: dict = field(default_factory=lambda: {"kind": "dropped"})
    seed: int = 0
    outputs: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)  # normalized document, defaults filled

    # -- derived data

    def initial_state(self) -> PhaseState:
        n, s = self.truncation_N, self.initial
        kind = s["kind"]
        if kind == "explicit":
            phases = np.array(s["values"], dtype=float)
        elif kind == "alternating":
            phases = alternating(n, s["amplitude"])
        elif kind == "uniform_arc":
            seed = self.seed if s["seed"] is None else s["seed"]
            phases = uniform_in_arc(n, s["width"], seed, s["center"], INITIAL_STREAM)
        else:
            phases = np.full(n, s["value"])
        tm = self.tail_model
        tail = Frozen(tm["tail_phase"]) if tm["kind"] == "frozen" else DROPPED
        return PhaseState(phases, 0.0, tail)

    def frequency_vector(self) -> FrequencyVector:
        s, n = self.frequencies, self.truncation_N
        kind = s["kind"]
        if kind == "zero":
            return FrequencyVector.homogeneous(0.0)
        if kind == "constant":
            return FrequencyVector.homogeneous(s["value"])
        if kind == "explicit":
            return FrequencyVector.per_index(s["values"])
        seed = self.seed if s["seed"] is None else s["seed"]
        spread, center = s["spread"], s["center"]
        u = seeded_uniform(seed, FREQUENCY_STREAM, n)
        vals = np.clip(center + spread * (u - 0.5), center - spread / 2.0, center + spread / 2.0)
        vals[0] = center - spread / 2.0
        if n >= 2:
            vals[1] = center + spread / 2.0
        return FrequencyVector.per_index(vals)

    def framework(self, sample_budget: int = 4096) -> FrameworkReport:
        return validate_framework(self.topology, self.initial_state(), self.frequency_vector(), sample_budget)

    @property
    def f1_holds(self) -> bool:
        return self.framework(sample_budget=1).f1_holds

    def tail_certificate(self) -> float:
        return self.integrator.t_end * self.topology.tail_bound(self.truncation_N)

    def step(self) -> float:
        return self.integrator.resolve(self.topology, self.frequency_vector().sup_norm(self.truncation_N))[0]

    def semantic_config(self) -> dict:
        return {k: v for k, v in self.config.items() if k not in ("name", "outputs")}

    def config_hash(self) -> str:
        blob = json.dumps(self.semantic_config(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def with_seed(self, seed: int) -> Scenario:
        doc = copy.deepcopy(self.config)
        doc["seed"] = seed
        return scenario_from_dict(doc)


def scenario_from_dict(data: Any, lines: dict[str, int] | None = None) -> Scenario:
    r = _Reader(lines)
    top = r.section(data, "", {
        "schema_version": (int, REQUIRED),
        "name": (str, REQUIRED),
        "topology": (dict, REQUIRED),
        "truncation_N": (int, REQUIRED),
        "tail_model": (dict, {"kind": "dropped"}),
        "initial": (dict, REQUIRED),
        "frequencies": (dict, {"kind": "zero"}),
        "integrator": (dict, REQUIRED),
        "sample_stride": (int, 1),
        "diagnostics": (list, sorted(DIAGNOSTIC_SWITCHES - {"second_order"})),
        "cross_ratio_tuples": (list, None),
        "checks": (None, {}),
        "equilibrium_tol": (float, 1e-6),
        "tail_budget": (float, 1e-4),
        "seed": (int, 0),
        "outputs": (dict, {}),
    })
    if top["schema_version"] != SCHEMA_VERSION:
        raise r.fail(f"unsupported schema_version {top['schema_version']}, expected {SCHEMA_VERSION}", "schema_version")
    if top["truncation_N"] < 1:
        raise ValidationError("truncation_N must be >= 1")
    if top["sample_stride"] < 1:
        raise ValidationError("sample_stride must be >= 1")
    if not 0 <= top["seed"] < 2**64:
        raise r.fail("seed must be an unsigned 64-bit integer", "seed")

    k, top["topology"] = _topology(r, top["topology"])
    top["initial"] = _initial(r, top["initial"])
    top["frequencies"] = _frequencies(r, top["frequencies"])
    n = top["truncation_N"]
    if top["initial"]["kind"] == "explicit" and len(top["initial"]["values"]) != n:
        raise r.fail(f"{len(top['initial']['values'])} initial phases for truncation_N={n}", "initial.values")
    if top["frequencies"]["kind"] == "explicit" and len(top["frequencies"]["values"]) != n:
        raise r.fail(f"{len(top['frequencies']['values'])} frequencies for truncation_N={n}", "frequencies.values")

    tm = r.section(top["tail_model"], "tail_model", {"kind": (str, REQUIRED), "tail_phase": (float, None)})
    if tm["kind"] not in ("dropped", "frozen"):
        raise r.fail(f"unknown tail model {tm['kind']!r}", "tail_model.kind")
    if tm["kind"] == "frozen" and tm["tail_phase"] is None:
        raise r.fail("frozen tail needs tail_phase", "tail_model.tail_phase")
    top["tail_model"] = tm

    integ = r.section(top["integrator"], "integrator", {
        "t_end": (float, REQUIRED), "step": (float, None), "method": (str, "rk4"), "step_safety": (float, 0.1),
    })
    top["integrator"] = integ
    cfg = IntegratorConfig(integ["t_end"], integ["step"], integ["method"], integ["step_safety"])

    switches = [r.coerce(s, str, "diagnostics") for s in top["diagnostics"]]
    bad = sorted(set(switches) - DIAGNOSTIC_SWITCHES)
    if bad:
        raise r.fail(f"unknown diagnostic switch {bad[0]!r}", "diagnostics")
    top["diagnostics"] = sorted(set(switches))

    tuples = top["cross_ratio_tuples"]
    if tuples is not None:
        for t in tuples:
            if not (isinstance(t, list) and len(t) == 4 and all(isinstance(i, int) and 1 <= i <= n for i in t)
                    and len(set(t)) == 4):
                raise r.fail(f"cross ratio tuple {t!r} must list four distinct indices in 1..{n}", "cross_ratio_tuples")

    checks = top["checks"]
    if isinstance(checks, list):
        checks = {c: {} for c in checks}
    if not isinstance(checks, dict):
        raise r.fail("checks must be a list of names or a mapping of name to parameters", "checks")
    for name, params in list(checks.items()):
        if name not in CHECK_NAMES:
            raise r.fail(f"unknown check {name!r}", f"checks.{name}")
        if params is None:
            checks[name] = {}
        elif not isinstance(params, dict):
            raise r.fail("check parameters must be a mapping", f"checks.{name}")
    top["checks"] = checks

    out = r.section(top["outputs"], "outputs", {"csv": (str, f"{top['name']}.csv"), "json": (str, f"{top['name']}.json")})
    top["outputs"] = out

    scenario = Scenario(
        name=top["name"],
        topology=k,
        truncation_N=n,
        initial=top["initial"],
        frequencies=top["frequencies"],
        integrator=cfg,
        sample_stride=top["sample_stride"],
        diagnostics=frozenset(top["diagnostics"]),
        cross_ratio_tuples=tuples,
        checks=checks,
        equilibrium_tol=top["equilibrium_tol"],
        tail_budget=top["tail_budget"],
        tail_model=tm,
        seed=top["seed"],
        outputs=out,
        config=top,
    )
    # physics checks that need the assembled scenario
    scenario.initial_state()
    nu = scenario.frequency_vector()
    scenario.integrator.resolve(k, nu.sup_norm(n))
    if scenario.tail_certificate() > scenario.tail_budget:
        log.warning("scenario %s: tail certificate %.3g exceeds budget %.3g",
                    scenario.name, scenario.tail_certificate(), scenario.tail_budget)
    return scenario


def parse_scenario(path: str | Path) -> Scenario:
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"invalid YAML: {exc}", line=mark.line + 1 if mark else None) from exc
    return scenario_from_dict(data, _line_map(text))
