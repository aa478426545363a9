"""Property tests for the invariants of each module."""

import math

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ikl import diagnostics as dg
from ikl.dynamics import IntegratorConfig, lipschitz_check, march, rhs, rhs_sender_fast
from ikl.ensemble import FrequencyVector, PhaseState, diameter, extremals, gauge_shift, lp_norm, weighted_sum
from ikl.harness import scenario_from_dict
from ikl.topology import (
    Explicit,
    FiniteEmbedded,
    Geometric,
    GeometricCross,
    PowerLaw,
    ProductSummable,
    Sender,
    UniformFinite,
    sequence_terms,
)

EPS = np.finfo(float).eps
SETTINGS = settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])

ratios = st.floats(0.05, 0.95)
scales = st.floats(0.01, 10.0)
exponents = st.floats(1.1, 4.0)
bases = st.floats(1.2, 6.0)
weights = st.lists(st.floats(0.01, 5.0), min_size=1, max_size=8)
sequences = st.one_of(
    st.builds(Geometric, ratios, scales),
    st.builds(PowerLaw, exponents, scales),
    weights.map(lambda w: Explicit(tuple(w))),
)
square = st.integers(1, 5).flatmap(
    lambda n: st.lists(st.lists(st.floats(0.0, 3.0), min_size=n, max_size=n), min_size=n, max_size=n)
)
families = st.one_of(
    st.builds(ProductSummable, sequences),
    st.builds(GeometricCross, bases),
    st.builds(Sender, sequences, st.booleans()),
    square.map(lambda m: FiniteEmbedded(tuple(tuple(r) for r in m))),
    st.builds(UniformFinite, st.integers(1, 6), st.floats(0.0, 4.0)),
)
indices = st.integers(1, 40)
phases = st.integers(1, 12).flatmap(lambda n: arrays(float, n, elements=st.floats(-20.0, 20.0)))


# ---------------------------------------------------------------------------
# topology


@SETTINGS
@given(families, indices, indices)
def test_entries_nonnegative_and_symmetric(k, i, j):
    assert k.entry(i, j) >= 0.0
    if k.symmetric:
        assert k.entry(i, j) == k.entry(j, i)


@SETTINGS
@given(families, indices)
def test_row_sum_between_norms(k, i):
    rs = k.row_sum(i)
    assert rs <= k.norm_inf_one() * (1 + 4 * EPS)
    assert k.norm_minus_inf_one().value <= rs * (1 + 4 * EPS)


@SETTINGS
@given(families, st.integers(1, 30))
def test_tail_bound_monotone(k, n):
    assert k.tail_bound(n + 1) <= k.tail_bound(n) * (1 + 4 * EPS)
    assert k.tail_bound(n) <= k.norm_inf_one() * (1 + 4 * EPS)


@SETTINGS
@given(sequences, indices, indices)
def test_product_summable_witness(a, i, j):
    k = ProductSummable(a)
    w = k.tilde_kappa()
    if k.row_sum(i) > 0 and w.term(j) > 0:
        assert k.entry(i, j) / k.row_sum(i) > w.term(j)
    assert w.total() <= 1.0


@SETTINGS
@given(families)
def test_witness_mass_at_most_one(k):
    w = k.tilde_kappa()
    if w is not None:
        assert w.total() <= 1.0


@SETTINGS
@given(st.one_of(st.builds(ProductSummable, sequences), st.builds(GeometricCross, bases),
                 square.map(lambda m: FiniteEmbedded(tuple(tuple(r) for r in m)))),
       st.floats(1.0, 8.0))
def test_norm_nesting(k, p):
    slack = 1 + 1e-12
    assert k.norm_inf_one() <= k.norm_p_one(p) * slack
    assert k.norm_p_one(p) <= k.norm_p_one(1.0) * slack


# ---------------------------------------------------------------------------
# ensemble


@SETTINGS
@given(phases, st.floats(-5.0, 5.0), st.floats(0.0, 50.0))
def test_gauge_shift_preserves_diameter(theta, nu, t):
    s = PhaseState(theta)
    shifted = gauge_shift(s, nu, t)
    scale = float(np.max(np.abs(theta))) + abs(nu * t)
    assert abs(diameter(shifted) - diameter(s)) <= 4 * EPS * scale


@SETTINGS
@given(phases)
def test_diameter_is_extremal_gap(theta):
    lo, hi = extremals(PhaseState(theta))
    assert diameter(PhaseState(theta)) == hi - lo


@SETTINGS
@given(phases, st.floats(1.0, 6.0), st.floats(1.0, 6.0))
def test_lp_norm_nonincreasing_in_p(x, p, q):
    p, q = min(p, q), max(p, q)
    slack = 1 + 8 * EPS
    assert lp_norm(x, q) <= lp_norm(x, p) * slack
    assert lp_norm(x, math.inf) <= lp_norm(x, q) * slack


@SETTINGS
@given(st.integers(1, 10).flatmap(lambda n: st.tuples(
    arrays(float, n, elements=st.floats(-10, 10)),
    arrays(float, n, elements=st.floats(-10, 10)),
    arrays(float, n, elements=st.floats(0.0, 1.0)),
)), st.floats(-3, 3), st.floats(-3, 3))
def test_weighted_sum_linear(data, alpha, beta):
    a, b, w = data
    lhs = weighted_sum(alpha * a + beta * b, w)
    rhs_ = alpha * weighted_sum(a, w) + beta * weighted_sum(b, w)
    scale = float(np.sum(w * (np.abs(alpha * a) + np.abs(beta * b))))
    assert abs(lhs - rhs_) <= 4 * EPS * scale + 1e-300


# ---------------------------------------------------------------------------
# dynamics


@SETTINGS
@given(sequences, st.integers(1, 30).flatmap(lambda n: arrays(float, n, elements=st.floats(-10, 10))),
       st.floats(-2, 2))
def test_fast_sender_matches_direct(seq, theta, nu0):
    k = Sender(seq)
    n = theta.size
    nu = FrequencyVector.per_index(nu0 + np.linspace(0, 1, n))
    fast, direct = rhs_sender_fast(k, nu, theta), rhs(k, nu, theta)
    scale = max(1.0, float(np.max(np.abs(nu.vector(n)))))
    assert np.max(np.abs(fast - direct)) <= 8 * EPS * n * scale


@SETTINGS
@given(families, st.integers(1, 8), st.floats(-5, 5))
def test_equilibria_are_fixed(k, n, c):
    tr = march(k, FrequencyVector.homogeneous(0.0), PhaseState(np.full(n, c)), IntegratorConfig(1.0))
    assert np.all(tr.phases == c)


@SETTINGS
@given(families, st.integers(1, 8).flatmap(lambda n: st.tuples(
    arrays(float, n, elements=st.floats(-7, 7)), arrays(float, n, elements=st.floats(-7, 7)))),
    st.sampled_from([1.0, 2.0, math.inf]))
def test_lipschitz_predicate(k, pair, p):
    a, b = pair
    nu = FrequencyVector.per_index(np.linspace(-1, 1, a.size))
    assert lipschitz_check(k, nu, a, b, p).passed


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32), st.floats(0.2, 2.5))
def test_diameter_monotone_under_frameworks(seed, width):
    doc = {
        "schema_version": 1, "name": "p",
        "topology": {"family": "product_summable", "sequence": {"kind": "geometric", "ratio": 0.5, "scale": 0.5}},
        "truncation_N": 10, "initial": {"kind": "uniform_arc", "width": width},
        "integrator": {"t_end": 10.0}, "seed": seed, "tail_budget": 1.0,
    }
    s = scenario_from_dict(doc)
    fw = s.framework()
    assert fw.f1_holds and fw.f2_holds
    tr = march(s.topology, s.frequency_vector(), s.initial_state(), s.integrator)
    d = np.ptp(tr.phases, axis=1)
    assert np.all(np.diff(d) <= 1e-9)
    p = np.array([dg.potential(ph, s.topology) for ph in tr.phases])
    assert np.all(p >= 0) and np.all(np.diff(p) <= 1e-9)


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 8).flatmap(lambda n: st.lists(st.floats(0.05, 1.0), min_size=n + 3, max_size=n + 3)),
       st.integers(0, 2**32))
def test_sender_run_invariants(w, seed):
    n = len(w)
    k = Sender(Explicit(tuple(w)))
    rng = np.random.Generator(np.random.Philox(seed))
    theta = np.sort(rng.uniform(0.0, 0.95 * math.pi, n))
    tr = march(k, FrequencyVector.homogeneous(0.0), PhaseState(theta), IntegratorConfig(20.0))
    assert dg.collision_avoidance_check(tr).status.value in ("Pass", "NotApplicable")
    assert dg.weighted_sum_conservation_check(tr).passed
    kw = sequence_terms(k.weights, n)
    r = np.array([dg.order_parameters(ph, kw).r for ph in tr.phases])
    assert np.all(r <= kw.sum() + 4 * EPS)
    assert np.all(np.diff(r) >= -1e-9)


# ---------------------------------------------------------------------------
# diagnostics


@SETTINGS
@given(arrays(float, 4, elements=st.floats(-10, 10)), st.floats(-10, 10))
def test_cross_ratio_rotation_invariant(theta, shift):
    try:
        a = dg.cross_ratio(theta, 1, 2, 3, 4, gap_floor=1e-3)
    except dg.DegenerateTuple:
        return
    b = dg.cross_ratio(theta + shift, 1, 2, 3, 4, gap_floor=1e-6)
    # conditioning: relative error grows like eps * |theta| / smallest chord
    chords = [2 * abs(math.sin((x - y) / 2)) for i, x in enumerate(theta) for y in theta[i + 1:]]
    cond = (float(np.max(np.abs(theta))) + abs(shift) + 1.0) / min(chords)
    assert abs(a - b) <= max(1e-12, 64 * EPS * cond) * abs(a)


@SETTINGS
@given(phases.filter(lambda x: x.size >= 2))
def test_potential_nonnegative(theta):
    assert dg.potential(theta, GeometricCross(3.0)) >= 0.0


# ---------------------------------------------------------------------------
# harness


def _hash_doc(seed, t_end, width, name):
    return {
        "schema_version": 1, "name": name,
        "topology": {"family": "sender", "weights": {"kind": "geometric", "ratio": 0.5, "scale": 0.5}},
        "truncation_N": 8, "initial": {"kind": "uniform_arc", "width": width},
        "integrator": {"t_end": t_end}, "seed": seed,
    }


@SETTINGS
@given(st.tuples(st.integers(0, 3), st.sampled_from([1.0, 2.0]), st.sampled_from([1.0, 1.5]), st.text(max_size=3)),
       st.tuples(st.integers(0, 3), st.sampled_from([1.0, 2.0]), st.sampled_from([1.0, 1.5]), st.text(max_size=3)))
def test_hash_tracks_semantic_fields(a, b):
    ha = scenario_from_dict(_hash_doc(*a)).config_hash()
    hb = scenario_from_dict(_hash_doc(*b)).config_hash()
    assert (ha == hb) == (a[:3] == b[:3])
