import math
from fractions import Fraction

import numpy as np
import pytest

from ikl.errors import DivergentRow
from ikl.topology import (
    Explicit,
    FiniteEmbedded,
    Geometric,
    GeometricCross,
    PowerLaw,
    ProductSummable,
    Sender,
    UniformFinite,
    block_norm_p_one,
    check_row_sum,
    sample_index_pairs,
    sequence_terms,
    validate_framework,
)

HALF = Geometric(0.5, 0.5)  # a_i = 2^-i
SWAP = FiniteEmbedded(((0.0, 1.0), (1.0, 0.0)))

# Oracle values below were computed once with exact rationals (fractions) or
# 30-digit mpmath and frozen here.
GEOMETRIC_CROSS_P2 = 0.176776695296636881100211090526  # sqrt(sum (3^-i / 2)^2)
ZETA2 = 1.64493406684822643647241516665
ZETA2_TAIL10 = 0.0951663356816857461222010069081  # sum_{i>10} i^-2


class TestSequences:
    def test_geometric_terms_and_sums(self):
        assert HALF.term(1) == 0.5
        assert HALF.term(3) == 0.125
        assert HALF.total() == 1.0
        assert HALF.tail(20) == 2.0**-20

    def test_power_law_closed_forms(self):
        p = PowerLaw(2.0)
        assert p.term(3) == pytest.approx(1 / 9, rel=1e-15)
        assert p.total() == pytest.approx(ZETA2, rel=1e-14)
        assert p.tail(10) == pytest.approx(ZETA2_TAIL10, rel=1e-13)

    def test_power_law_needs_summable_exponent(self):
        with pytest.raises(ValueError):
            PowerLaw(1.0)

    def test_explicit_pads_with_zeros(self):
        e = Explicit((0.5, 0.25))
        assert e.term(2) == 0.25
        assert e.term(3) == 0.0
        assert e.total() == 0.75
        assert e.tail(1) == 0.25
        assert e.tail(5) == 0.0

    def test_explicit_rejects_negative(self):
        with pytest.raises(ValueError):
            Explicit((0.5, -0.1))

    def test_tails_nonincreasing(self):
        for seq in (HALF, PowerLaw(1.5), Explicit((0.3, 0.2, 0.1))):
            tails = [seq.tail(n) for n in range(0, 12)]
            assert all(b <= a for a, b in zip(tails, tails[1:]))

    def test_sequence_terms(self):
        np.testing.assert_array_equal(sequence_terms(HALF, 3), [0.5, 0.25, 0.125])


class TestEntries:
    def test_geometric_cross_entry(self):
        assert GeometricCross(3.0).entry(1, 1) == pytest.approx(1 / 9, rel=1e-15)

    def test_finite_embedded_zero_outside(self):
        assert SWAP.entry(3, 1) == 0.0
        assert SWAP.entry(1, 2) == 1.0

    def test_product_summable_entry(self):
        assert ProductSummable(HALF).entry(2, 3) == 0.03125

    def test_indices_are_one_based(self):
        with pytest.raises(IndexError):
            SWAP.entry(0, 1)

    def test_entries_nonnegative(self):
        for k in (ProductSummable(HALF), GeometricCross(3.0), Sender(HALF), SWAP, UniformFinite(4, 2.0)):
            assert np.all(k.block(6) >= 0.0)

    def test_block_is_read_only(self):
        b = GeometricCross(3.0).block(4)
        with pytest.raises(ValueError):
            b[0, 0] = 1.0


class TestRowSums:
    def test_geometric_cross_row_sum(self):
        # brute-force partial sums with exact rationals
        oracle = float(sum(Fraction(1, 3 ** (1 + j)) for j in range(1, 200)))
        assert GeometricCross(3.0).row_sum(1) == pytest.approx(oracle, rel=1e-15)
        assert oracle == pytest.approx(1 / 6, rel=1e-15)

    def test_sender_rows_sum_to_one(self):
        k = Sender(HALF)
        assert all(k.row_sum(i) == 1.0 for i in (1, 5, 1000))

    def test_uniform_finite_row_sum(self):
        assert UniformFinite(4, 2.0).row_sum(2) == 2.0

    def test_check_row_sum_matches_closed_form(self):
        for k in (ProductSummable(HALF), GeometricCross(3.0), Sender(PowerLaw(2.0))):
            assert check_row_sum(k, 2) == pytest.approx(k.row_sum(2), rel=1e-12)

    def test_sender_normalization(self):
        k = Sender(PowerLaw(2.0))
        assert k.weights.total() == pytest.approx(1.0, rel=1e-14)


class TestNorms:
    def test_norm_inf_one(self):
        assert GeometricCross(3.0).norm_inf_one() == pytest.approx(1 / 6, rel=1e-15)
        assert Sender(HALF).norm_inf_one() == 1.0
        assert SWAP.norm_inf_one() == 1.0

    def test_norm_minus_inf_one(self):
        assert Sender(HALF).norm_minus_inf_one().value == 1.0
        low = ProductSummable(HALF).norm_minus_inf_one()
        assert low.value == 0.0 and low.f3_fails_in_limit
        assert UniformFinite(4, 2.0).norm_minus_inf_one(restrict_to=4).value == 2.0

    def test_norm_p_one(self):
        g = GeometricCross(3.0)
        oracle = float(sum(Fraction(1, 2 * 3**i) for i in range(1, 200)))
        assert g.norm_p_one(1) == pytest.approx(oracle, rel=1e-14)
        assert g.norm_p_one(2) == pytest.approx(GEOMETRIC_CROSS_P2, rel=1e-14)
        assert SWAP.norm_p_one(2) == pytest.approx(math.sqrt(2.0), rel=1e-15)

    def test_p_infinity_is_sup_norm(self):
        for k in (ProductSummable(HALF), GeometricCross(3.0), Sender(HALF), SWAP):
            assert k.norm_p_one(math.inf) == k.norm_inf_one()

    def test_sender_p_norms_diverge(self):
        assert Sender(HALF).norm_p_one(2) == math.inf

    def test_block_norm_bounded_by_full_norm(self):
        for k in (ProductSummable(HALF), GeometricCross(3.0), SWAP):
            for p in (1.0, 2.0, math.inf):
                assert block_norm_p_one(k, 8, p) <= k.norm_p_one(p) * (1 + 1e-15)


class TestTailBound:
    def test_geometric_cross(self):
        oracle = float(sum(Fraction(1, 3 ** (1 + j)) for j in range(11, 300)))
        assert GeometricCross(3.0).tail_bound(10) == pytest.approx(oracle, rel=1e-14)

    def test_sender(self):
        assert Sender(HALF).tail_bound(20) == pytest.approx(2.0**-20, rel=1e-15)

    def test_finite_block(self):
        assert FiniteEmbedded(((0.0, 0.3), (0.2, 0.0))).tail_bound(2) == 0.0

    def test_brute_force_tail(self):
        k = ProductSummable(HALF)
        brute = max(sum(k.entry(i, j) for j in range(9, 80)) for i in range(1, 9))
        assert k.tail_bound(8) == pytest.approx(brute, rel=1e-12)


class TestWitness:
    def test_product_summable(self):
        w = ProductSummable(HALF).tilde_kappa()
        assert w.term(3) == pytest.approx(2.0**-3 / 2, rel=1e-15)

    def test_sender(self):
        w = Sender(HALF).tilde_kappa()
        assert w.term(1) == pytest.approx(0.5 / (1 + 2.0**-20), rel=1e-15)

    def test_geometric_cross_unavailable(self):
        assert GeometricCross(3.0).tilde_kappa() is None


class TestFramework:
    def test_product_summable_quarter_alternating(self):
        theta = np.array([(-1) ** i * math.pi / 4 for i in range(1, 9)])
        rep = validate_framework(ProductSummable(HALF), theta)
        assert rep.f1_holds and rep.f2_holds and not rep.f3_holds
        assert rep.initial_diameter == pytest.approx(math.pi / 2)
        assert rep.witness_l1 <= 1.0

    def test_sender_f3(self):
        rep = validate_framework(Sender(HALF), np.array([0.0, 1.0, 2.0]))
        assert rep.f3_holds and rep.k_minus == 1.0

    def test_diameter_pi_fails_f1(self):
        rep = validate_framework(Sender(HALF), np.array([0.0, math.pi]))
        assert not rep.f1_holds

    def test_geometric_cross_has_no_witness(self):
        rep = validate_framework(GeometricCross(3.0), np.zeros(4))
        assert not rep.f2_holds and rep.witness is None

    def test_sample_pairs(self):
        assert len(sample_index_pairs(3, 100)) == 9
        pairs = sample_index_pairs(1000, 50)
        assert len(pairs) == 50 and all(1 <= i <= 1000 and 1 <= j <= 1000 for i, j in pairs)


def test_divergent_explicit_rows_rejected():
    with pytest.raises((DivergentRow, ValueError)):
        Geometric(1.5, 1.0)
