import math

import numpy as np
import pytest

from ikl.ensemble import (
    DROPPED,
    FrequencyVector,
    Frozen,
    PhaseState,
    alternating,
    diameter,
    extremals,
    gauge_shift,
    lp_norm,
    seeded_uniform,
    uniform_in_arc,
    weighted_sum,
)
from ikl.errors import DimensionMismatch
from ikl.topology import Explicit


def test_phase_state_is_immutable():
    s = PhaseState([0.0, 1.0])
    with pytest.raises(ValueError):
        s.phases[0] = 2.0
    assert s.truncation == 2 and s.tail_model is DROPPED


@pytest.mark.parametrize("bad", [[], [0.0, math.nan], [math.inf]])
def test_phase_state_rejects_bad_phases(bad):
    with pytest.raises(ValueError):
        PhaseState(bad)


class TestDiameter:
    def test_alternating_third_pi(self):
        for n in (2, 5, 20):
            assert diameter(PhaseState(alternating(n))) == pytest.approx(2 * math.pi / 3, abs=1e-15)

    def test_equal_phases(self):
        assert diameter(PhaseState([0.4] * 5)) == 0.0

    def test_by_inspection(self):
        assert diameter(PhaseState([0.0, math.pi / 2, math.pi / 4])) == math.pi / 2

    def test_frozen_tail_counts(self):
        assert diameter(PhaseState([0.0, 0.1], tail_model=Frozen(1.0))) == 1.0


class TestExtremals:
    def test_simple(self):
        assert extremals(PhaseState([0.1, -0.2, 0.3])) == (-0.2, 0.3)

    def test_single(self):
        assert extremals(PhaseState([0.7])) == (0.7, 0.7)

    def test_alternating(self):
        lo, hi = extremals(PhaseState(alternating(4)))
        assert lo == -math.pi / 3 and hi == math.pi / 3


class TestLpNorm:
    def test_values(self):
        assert lp_norm([3.0, 4.0], 2) == 5.0
        assert lp_norm([1.0, -1.0, 1.0], math.inf) == 1.0
        assert lp_norm([1.0, 1.0, 1.0, 1.0], 1) == 4.0
        assert lp_norm([1.0, 1.0], 3) == pytest.approx(2 ** (1 / 3))

    def test_p_below_one_rejected(self):
        with pytest.raises(ValueError):
            lp_norm([1.0], 0.5)


class TestWeightedSum:
    def test_two_terms(self):
        assert weighted_sum(PhaseState([0.0, math.pi]), Explicit((0.5, 0.5))) == math.pi / 2

    def test_zero(self):
        assert weighted_sum(PhaseState([0.0] * 3), Explicit((0.2, 0.3, 0.5))) == 0.0

    def test_weights_sum_to_one(self):
        assert weighted_sum(PhaseState([math.pi] * 3), Explicit((0.5, 0.25, 0.25))) == math.pi

    def test_length_mismatch(self):
        with pytest.raises(DimensionMismatch):
            weighted_sum(np.zeros(3), np.ones(2))


class TestGaugeShift:
    def test_identity(self):
        s = PhaseState([0.3, 0.4])
        np.testing.assert_array_equal(gauge_shift(s, 0.0, 5.0).phases, s.phases)

    def test_uniform_shift(self):
        s = gauge_shift(PhaseState([1.0, 2.0]), 1.0, 1.0)
        np.testing.assert_array_equal(s.phases, [0.0, 1.0])
        assert diameter(s) == 1.0

    def test_half_time(self):
        s = gauge_shift(PhaseState([0.0, math.pi / 2]), 2.0, 0.5)
        np.testing.assert_allclose(s.phases, [-1.0, math.pi / 2 - 1.0], rtol=0, atol=1e-15)


class TestFrequencyVector:
    def test_homogeneous(self):
        v = FrequencyVector.homogeneous(0.3)
        assert v.is_homogeneous and v.diameter(4) == 0.0 and v.sup_norm(4) == 0.3

    def test_per_index(self):
        v = FrequencyVector.per_index([0.1, -0.4])
        assert v.sup_norm(2) == 0.4
        assert v.diameter(2) == pytest.approx(0.5)
        with pytest.raises(DimensionMismatch):
            v.vector(3)


class TestSeededData:
    def test_prefix_stable(self):
        a = seeded_uniform(7, 0, 5)
        b = seeded_uniform(7, 0, 12)
        np.testing.assert_array_equal(a, b[:5])

    def test_streams_and_seeds_differ(self):
        assert not np.array_equal(seeded_uniform(7, 0, 5), seeded_uniform(7, 1, 5))
        assert not np.array_equal(seeded_uniform(7, 0, 5), seeded_uniform(8, 0, 5))

    def test_unit_interval(self):
        u = seeded_uniform(3, 0, 1000)
        assert u.min() >= 0.0 and u.max() < 1.0

    def test_arc_diameter_equals_width(self):
        x = uniform_in_arc(16, 2.0, seed=1, center=math.pi)
        assert diameter(PhaseState(x)) == pytest.approx(2.0, abs=4e-16)
        assert x.min() >= math.pi - 1.0 and x.max() <= math.pi + 1.0
