import numpy as np
import pytest

from shiftpress.errors import EnumerationCapError, PreconditionError
from shiftpress.sft import (
    Potential,
    SubshiftSpec,
    Word,
    d_phi_distance,
    disagreement_index,
    enumerate_words,
    primitivity,
)


@pytest.fixture
def full2():
    return SubshiftSpec.full_shift(2)


@pytest.fixture
def golden():
    return SubshiftSpec.golden_mean()


class TestSubshiftSpec:
    def test_rejects_dead_symbol(self):
        with pytest.raises(PreconditionError):
            SubshiftSpec([[1, 1], [0, 0]])

    def test_rejects_non_binary_entries(self):
        with pytest.raises(PreconditionError):
            SubshiftSpec([[1, 2], [1, 0]])

    def test_word_counts_follow_matrix_powers(self, golden):
        # count(n) equals the sum of entries of A^(n-1): Fibonacci here
        assert [golden.word_count(n) for n in range(1, 8)] == [2, 3, 5, 8, 13, 21, 34]


class TestPrimitivity:
    def test_full_shift_power_one(self, full2):
        assert primitivity(full2) == (True, 1)

    def test_golden_mean_power_two(self, golden):
        assert primitivity(golden) == (True, 2)

    def test_period_two_not_primitive(self):
        spec = SubshiftSpec([[0, 1], [1, 0]])
        assert primitivity(spec) == (False, None)


class TestEnumerateWords:
    def test_full_shift_counts(self, full2):
        assert len(enumerate_words(full2, 3)) == 8

    def test_golden_counts(self, golden):
        assert len(enumerate_words(golden, 3)) == 5
        assert len(enumerate_words(golden, 5)) == 13

    def test_lexicographic_and_admissible(self, golden):
        words = [str(w) for w in enumerate_words(golden, 3)]
        assert words == sorted(words)
        assert "011" not in words and "110" not in words

    def test_cap(self, full2):
        with pytest.raises(EnumerationCapError):
            enumerate_words(full2, 10, cap=100)


class TestWord:
    def test_rejects_forbidden_transition(self, golden):
        with pytest.raises(PreconditionError):
            Word.from_string(golden, "0110")

    def test_roundtrip(self, full2):
        assert str(Word.from_string(full2, "0101")) == "0101"

    def test_disagreement_index(self, full2):
        x = Word.from_string(full2, "0010")
        y = Word.from_string(full2, "0011")
        assert disagreement_index(x, y) == 4
        assert disagreement_index(x, Word.from_string(full2, "1010")) == 1
        assert disagreement_index(x, Word.from_string(full2, "00")) == 3


class TestPotential:
    def test_from_dict_requires_every_admissible_word(self, golden):
        with pytest.raises(PreconditionError):
            Potential.from_dict(golden, 2, {"00": 1.0, "01": 2.0})

    def test_from_dict_rejects_inadmissible_word(self, golden):
        with pytest.raises(PreconditionError):
            Potential.from_dict(golden, 2, {"00": 1.0, "01": 2.0, "10": 0.0, "11": 5.0})

    def test_indicator_of_empty_cylinder_is_zero(self, golden):
        f = Potential.indicator(golden, "11")
        assert f.max_value() == 0.0

    def test_lift_preserves_values(self, golden):
        f = Potential.indicator(golden, "1")
        lifted = f.lift(3)
        assert lifted.value([1, 0, 1]) == 1.0
        assert lifted.value([0, 1, 0]) == 0.0

    def test_arithmetic_aligns_depths(self, full2):
        f = Potential.indicator(full2, "1")
        g = Potential.indicator(full2, "01")
        combined = f + g
        assert combined.depth == 2
        assert combined.value([0, 1]) == 1.0
        assert combined.value([1, 1]) == 1.0
        assert combined.value([1, 0]) == 1.0  # f contributes through the lift


class TestDPhiDistance:
    def test_equal_words(self, full2):
        phi = Potential.constant(full2, np.log(2))
        x = Word.from_string(full2, "0101")
        assert d_phi_distance(x, x, phi) == 0.0

    def test_first_symbol_differs(self, full2):
        phi = Potential.constant(full2, np.log(2))
        assert d_phi_distance(
            Word.from_string(full2, "01"), Word.from_string(full2, "11"), phi
        ) == 1.0

    def test_constant_potential_matches_power(self, full2):
        # with phi = log Psi the metric is Psi^(-nu)
        psi = 3.0
        phi = Potential.constant(full2, np.log(psi))
        x = Word.from_string(full2, "00110")
        y = Word.from_string(full2, "00100")
        assert d_phi_distance(x, y, phi) == pytest.approx(psi ** -4, rel=1e-12)

    def test_rejects_nonpositive_potential(self, full2):
        phi = Potential.constant(full2, 0.0)
        with pytest.raises(PreconditionError):
            d_phi_distance(
                Word.from_string(full2, "01"), Word.from_string(full2, "00"), phi
            )

    def test_minimum_over_extensions(self, full2):
        # depth-2 potential: the free tail picks the cheapest admissible windows
        phi = Potential.from_dict(
            full2, 2, {"00": 0.5, "01": 1.0, "10": 1.5, "11": 2.0}
        )
        x = Word.from_string(full2, "000")
        y = Word.from_string(full2, "001")
        # nu = 3; windows (z1 z2), (z2 z3), (z3 z4) with z1 z2 = 00 fixed
        expected = np.exp(-(0.5 + 0.5 + 0.5))
        assert d_phi_distance(x, y, phi) == pytest.approx(expected, rel=1e-12)

    def test_ultrametric_inequality(self, golden):
        rng = np.random.default_rng(5)
        vals = {"00": 0.4, "01": 0.9, "10": 0.7}
        phi = Potential.from_dict(golden, 2, vals)
        words = enumerate_words(golden, 6)
        picks = rng.choice(len(words), size=(40, 3))
        for i, j, k in picks:
            x, y, z = words[i], words[j], words[k]
            dxz = d_phi_distance(x, z, phi)
            bound = max(d_phi_distance(x, y, phi), d_phi_distance(y, z, phi))
            assert dxz <= bound + 1e-12
