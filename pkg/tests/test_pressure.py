import numpy as np
import pytest

from shiftpress.errors import PreconditionError
from shiftpress.measures import entropy, integrate
from shiftpress.pressure import (
    cover_pressure,
    equilibrium_measure,
    spectral_pressure,
    variational_pressure,
)
from shiftpress.sft import Potential, SubshiftSpec, enumerate_words

GOLDEN_ENTROPY = np.log((1 + np.sqrt(5)) / 2)


@pytest.fixture
def full2():
    return SubshiftSpec.full_shift(2)


@pytest.fixture
def golden():
    return SubshiftSpec.golden_mean()


class TestSpectralPressure:
    def test_full_shift_zero_potential(self, full2):
        res = spectral_pressure(full2, Potential.constant(full2, 0.0))
        assert res.value == pytest.approx(np.log(2), abs=1e-12)
        assert res.method == "spectral"

    def test_golden_mean(self, golden):
        res = spectral_pressure(golden, Potential.constant(golden, 0.0))
        assert res.value == pytest.approx(GOLDEN_ENTROPY, abs=1e-12)

    def test_depth1_closed_form(self, full2):
        phi = Potential.from_dict(full2, 1, {"0": 0.4, "1": -1.1})
        res = spectral_pressure(full2, phi)
        assert res.value == pytest.approx(np.log(np.exp(0.4) + np.exp(-1.1)), abs=1e-12)

    def test_constant_shift_identity(self, golden):
        phi = Potential.from_dict(golden, 2, {"00": 0.3, "01": -0.2, "10": 0.9})
        base = spectral_pressure(golden, phi).value
        shifted = spectral_pressure(golden, phi + 1.234).value
        assert shifted == pytest.approx(base + 1.234, abs=1e-12)

    def test_convexity_in_tilt(self, full2):
        phi = Potential.constant(full2, 0.0)
        f = Potential.indicator(full2, "1")
        qs = np.linspace(-2.0, 2.0, 21)
        vals = [spectral_pressure(full2, phi + float(q) * f).value for q in qs]
        second = np.diff(vals, 2)
        assert second.min() >= -1e-8

    def test_requires_primitive(self):
        spec = SubshiftSpec([[0, 1], [1, 0]])
        with pytest.raises(PreconditionError):
            spectral_pressure(spec, Potential.constant(spec, 0.0))


class TestVariationalPressure:
    def test_agrees_with_spectral(self, golden):
        rng = np.random.default_rng(4)
        for _ in range(5):
            phi = Potential.from_dict(
                golden, 2, {"00": rng.normal(), "01": rng.normal(), "10": rng.normal()}
            )
            a = spectral_pressure(golden, phi).value
            b = variational_pressure(golden, phi).value
            assert abs(a - b) <= 1e-10

    def test_full_shift_witness_is_uniform(self, full2):
        res = variational_pressure(full2, Potential.constant(full2, 0.0))
        assert res.witness.stationary == pytest.approx([0.5, 0.5], abs=1e-10)

    def test_golden_witness_is_parry(self, golden):
        res = variational_pressure(golden, Potential.constant(golden, 0.0))
        phi = (1 + np.sqrt(5)) / 2
        expected = np.array([phi**2, 1.0]) / (phi**2 + 1.0)
        assert res.witness.stationary == pytest.approx(expected, abs=1e-10)

    def test_higher_order_keeps_value(self, golden):
        phi = Potential.from_dict(golden, 2, {"00": 0.1, "01": 0.7, "10": -0.3})
        base = variational_pressure(golden, phi)
        lifted = variational_pressure(golden, phi, order=3)
        assert lifted.value == pytest.approx(base.value, abs=1e-10)
        assert lifted.witness.order == 3


class TestEquilibriumMeasure:
    def test_tilted_bernoulli(self, full2):
        q = 0.8
        mu = equilibrium_measure(full2, Potential.indicator(full2, "1") * q)
        p = np.exp(q) / (1 + np.exp(q))
        assert mu.transition[0] == pytest.approx([1 - p, p], abs=1e-11)
        assert mu.transition[1] == pytest.approx([1 - p, p], abs=1e-11)

    def test_defining_identity(self, golden):
        phi = Potential.from_dict(golden, 2, {"00": -0.4, "01": 0.2, "10": 0.6})
        mu = equilibrium_measure(golden, phi)
        lhs = entropy(mu) + integrate(phi, mu)
        assert lhs == pytest.approx(spectral_pressure(golden, phi).value, abs=1e-10)


class TestCoverPressure:
    def test_full_shift_exact(self, full2):
        res = cover_pressure(full2, Potential.constant(full2, 0.0), 7)
        assert res.value == pytest.approx(np.log(2), abs=1e-10)

    def test_constant_shift(self, full2):
        res = cover_pressure(full2, Potential.constant(full2, 0.8), 6)
        assert res.value == pytest.approx(np.log(2) + 0.8, abs=1e-10)

    def test_golden_converges(self, golden):
        zero = Potential.constant(golden, 0.0)
        res = cover_pressure(golden, zero, 12)
        assert abs(res.value - GOLDEN_ENTROPY) <= 0.05

    def test_gap_shrinks_with_n(self, golden):
        zero = Potential.constant(golden, 0.0)
        gaps = [abs(cover_pressure(golden, zero, n).value - GOLDEN_ENTROPY) for n in (8, 11, 14)]
        assert gaps[0] > gaps[1] > gaps[2]

    def test_subcollection_monotone(self, golden):
        zero = Potential.constant(golden, 0.0)
        n = 8
        words = enumerate_words(golden, n)
        rng = np.random.default_rng(9)
        full_value = cover_pressure(golden, zero, n).value
        for _ in range(5):
            size = int(rng.integers(1, len(words)))
            sub = [words[i] for i in rng.choice(len(words), size=size, replace=False)]
            sub_value = cover_pressure(golden, zero, n, restrict_to=sub).value
            assert sub_value <= full_value + 1e-10

    def test_deeper_cylinders_same_transition(self, golden):
        zero = Potential.constant(golden, 0.0)
        base = cover_pressure(golden, zero, 9).value
        deeper = cover_pressure(golden, zero, 9, epsilon_index=2).value
        # deeper cylinders refine the cover; the n-term sum only grows
        assert deeper >= base - 1e-12
