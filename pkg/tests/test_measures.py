import numpy as np
import pytest

from shiftpress.errors import PreconditionError
from shiftpress.measures import (
    DiracWord,
    EmpiricalMeasure,
    MarkovMeasure,
    birkhoff_average,
    empirical_measure,
    entropy,
    integrate,
    dense_family,
    family_depth,
    rho_distance,
    shifted_word,
    stationary_distribution,
)
from shiftpress.sft import Potential, SubshiftSpec, Word, enumerate_words


@pytest.fixture
def full2():
    return SubshiftSpec.full_shift(2)


@pytest.fixture
def golden():
    return SubshiftSpec.golden_mean()


class TestStationary:
    def test_symmetric(self):
        pi = stationary_distribution([[0.5, 0.5], [0.5, 0.5]])
        assert pi == pytest.approx([0.5, 0.5], abs=1e-13)

    def test_two_cycle(self):
        pi = stationary_distribution([[0.0, 1.0], [1.0, 0.0]])
        assert pi == pytest.approx([0.5, 0.5], abs=1e-13)

    def test_hand_computed(self):
        pi = stationary_distribution([[0.9, 0.1], [0.3, 0.7]])
        assert pi == pytest.approx([0.75, 0.25], abs=1e-12)

    def test_reducible_rejected(self):
        with pytest.raises(PreconditionError):
            stationary_distribution([[1.0, 0.0], [0.0, 1.0]])


class TestEntropy:
    def test_uniform_bernoulli(self, full2):
        mu = MarkovMeasure.bernoulli(full2, [0.5, 0.5])
        assert entropy(mu) == pytest.approx(np.log(2), abs=1e-14)

    def test_deterministic_cycle(self, golden):
        mu = MarkovMeasure.from_cycle(golden, Word.from_string(golden, "10"))
        assert entropy(mu) == pytest.approx(0.0, abs=1e-14)

    def test_parry_measure_golden(self, golden):
        phi = (1 + np.sqrt(5)) / 2
        p = np.array([[1 / phi, 1 / phi**2], [1.0, 0.0]])
        mu = MarkovMeasure.from_transition(golden, 1, p)
        assert entropy(mu) == pytest.approx(np.log(phi), abs=1e-10)

    def test_entropy_bounded_by_log_alphabet(self, full2):
        rng = np.random.default_rng(0)
        for _ in range(20):
            rows = rng.dirichlet([1.0, 1.0], size=2)
            mu = MarkovMeasure.from_transition(full2, 1, rows)
            assert entropy(mu) <= np.log(2) + 1e-12


class TestIntegrate:
    def test_constant(self, full2):
        mu = MarkovMeasure.bernoulli(full2, [0.3, 0.7])
        c = Potential.constant(full2, 2.5)
        assert integrate(c, mu) == pytest.approx(2.5, abs=1e-13)

    def test_symbol_marginal(self, full2):
        mu = MarkovMeasure.bernoulli(full2, [0.3, 0.7])
        f = Potential.indicator(full2, "1")
        assert integrate(f, mu) == pytest.approx(0.7, abs=1e-13)

    def test_word_probability_markov(self, full2):
        mu = MarkovMeasure.from_transition(full2, 1, [[0.9, 0.1], [0.3, 0.7]])
        f = Potential.indicator(full2, "11")
        assert integrate(f, mu) == pytest.approx(0.25 * 0.7, abs=1e-12)

    def test_deeper_than_order_uses_product_formula(self, full2):
        mu = MarkovMeasure.bernoulli(full2, [0.4, 0.6])
        f = Potential.indicator(full2, "111")
        assert integrate(f, mu) == pytest.approx(0.6**3, abs=1e-12)

    def test_integral_within_table_range(self, golden):
        rng = np.random.default_rng(1)
        phi = Potential.from_dict(golden, 2, {"00": -1.0, "01": 2.0, "10": 0.25})
        p = np.array([[0.6, 0.4], [1.0, 0.0]])
        mu = MarkovMeasure.from_transition(golden, 1, p)
        val = integrate(phi, mu)
        assert phi.min_value() - 1e-12 <= val <= phi.max_value() + 1e-12

    def test_lift_preserves_entropy_and_integrals(self, golden):
        p = np.array([[0.7, 0.3], [1.0, 0.0]])
        mu = MarkovMeasure.from_transition(golden, 1, p)
        lifted = mu.lift(3)
        phi = Potential.from_dict(golden, 2, {"00": 0.3, "01": -0.4, "10": 1.1})
        assert entropy(lifted) == pytest.approx(entropy(mu), abs=1e-10)
        assert integrate(phi, lifted) == pytest.approx(integrate(phi, mu), abs=1e-10)


class TestEmpirical:
    def test_depth1_counts(self, full2):
        x = Word.from_string(full2, "01010")
        emp = empirical_measure(x, 1, 4)
        assert emp.counts.tolist() == [2, 2]

    def test_depth2_counts(self, full2):
        emp = empirical_measure(Word.from_string(full2, "000"), 2, 2)
        assert emp.counts.tolist() == [2, 0, 0, 0]

    def test_sliding_window(self, full2):
        emp = empirical_measure(Word.from_string(full2, "0110"), 2, 3)
        # windows: 01, 11, 10
        assert emp.counts.tolist() == [0, 1, 1, 1]

    def test_too_short(self, full2):
        with pytest.raises(PreconditionError):
            empirical_measure(Word.from_string(full2, "01"), 2, 2)

    def test_marginalization_is_exact(self, full2):
        x = Word.from_string(full2, "011010011")
        deep = empirical_measure(x, 3, 5)
        shallow = empirical_measure(x, 1, 5)
        for s in range(2):
            assert deep.cylinder_probability([s]) == pytest.approx(
                shallow.cylinder_probability([s]), abs=1e-15
            )


class TestRho:
    def test_identity(self, full2):
        x = Word.from_string(full2, "0110100110")
        depth = family_depth(full2, 20)
        a = empirical_measure(x, depth, 6)
        assert rho_distance(a, a, full2).value == 0.0

    def test_bounded_by_one(self, full2):
        a = MarkovMeasure.bernoulli(full2, [1.0 - 1e-9, 1e-9])
        b = MarkovMeasure.bernoulli(full2, [1e-9, 1.0 - 1e-9])
        r = rho_distance(a, b, full2)
        assert r.value + r.tail_bound <= 1.0 + 1e-12

    def test_family_enumeration_order(self, golden):
        fam = dense_family(golden, 6)
        texts = ["".join(str(int(c)) for c in w) for w in fam]
        assert texts == ["0", "1", "00", "01", "10", "000"]

    def test_consecutive_empirical_bound(self, full2):
        rng = np.random.default_rng(3)
        for _ in range(50):
            n = int(rng.integers(1, 60))
            symbols = rng.integers(0, 2, size=n + 8)
            x = Word(full2, symbols)
            a = empirical_measure(x, 4, n)
            b = empirical_measure(x, 4, n + 1)
            r = rho_distance(a, b, full2)
            assert r.value <= 1.0 / (n + 1) + 1e-15

    def test_scaling_identity_with_dirac(self, full2):
        x = Word.from_string(full2, "01101001101101")
        n = 6
        a = empirical_measure(x, 4, n)
        b = empirical_measure(x, 4, n + 1)
        d = DiracWord(shifted_word(x, n))
        lhs = rho_distance(a, b, full2).value
        rhs = rho_distance(a, d, full2).value / (n + 1)
        assert lhs == pytest.approx(rhs, abs=1e-15)


class TestBirkhoff:
    def test_constant(self, full2):
        x = Word.from_string(full2, "0101010")
        c = Potential.constant(full2, 1.7)
        assert birkhoff_average(x, c, 6) == pytest.approx(1.7, abs=1e-14)

    def test_alternating(self, full2):
        x = Word.from_string(full2, "01010101")
        f = Potential.indicator(full2, "1")
        assert birkhoff_average(x, f, 6) == pytest.approx(0.5, abs=1e-15)

    def test_agrees_with_empirical_integral(self, golden):
        rng = np.random.default_rng(11)
        symbols = [0]
        while len(symbols) < 40:
            nxt = np.flatnonzero(golden.transfer[symbols[-1]])
            symbols.append(int(rng.choice(nxt)))
        x = Word(golden, np.array(symbols))
        phi = Potential.from_dict(golden, 2, {"00": 0.2, "01": -1.0, "10": 0.5})
        n = 30
        emp = empirical_measure(x, 2, n)
        direct = birkhoff_average(x, phi, n)
        via_counts = sum(
            emp.cylinder_probability(w.symbols) * phi.value(w.symbols)
            for w in enumerate_words(golden, 2)
        )
        assert direct == pytest.approx(via_counts, abs=1e-12)
