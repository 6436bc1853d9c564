import numpy as np
import pytest

from shiftpress.errors import PreconditionError
from shiftpress.pressure import spectral_pressure
from shiftpress.sft import Potential, SubshiftSpec
from shiftpress.spectra import (
    EMPTY,
    LambdaEvaluator,
    ObservableSet,
    PressureBracket,
    TargetSet,
    bowen_root,
    bs_dimension_point,
    bs_dimension_set,
    feasible_domain,
    is_empty,
    lambda_direct,
    lambda_point,
    lambda_value,
    pressure_between,
    pressure_equ,
    pressure_sub,
    pressure_sup,
    relative_spectrum,
    spectrum_curve,
)


def binary_entropy(a):
    if a in (0.0, 1.0):
        return 0.0
    return -a * np.log(a) - (1 - a) * np.log(1 - a)


@pytest.fixture
def full2():
    return SubshiftSpec.full_shift(2)


@pytest.fixture
def golden():
    return SubshiftSpec.golden_mean()


@pytest.fixture
def obs_full(full2):
    return ObservableSet([Potential.indicator(full2, "1")])


@pytest.fixture
def zero_full(full2):
    return Potential.constant(full2, 0.0)


class TestFeasibleDomain:
    def test_full_shift_indicator(self, obs_full):
        dom = feasible_domain(obs_full)
        assert (dom.lo, dom.hi) == pytest.approx((0.0, 1.0), abs=1e-12)

    def test_golden_indicator(self, golden):
        dom = feasible_domain(ObservableSet([Potential.indicator(golden, "1")]))
        assert (dom.lo, dom.hi) == pytest.approx((0.0, 0.5), abs=1e-12)

    def test_empty_cylinder_degenerate(self, golden):
        dom = feasible_domain(ObservableSet([Potential.indicator(golden, "11")]))
        assert dom.is_degenerate()

    def test_two_observables_hull(self, full2):
        obs = ObservableSet(
            [Potential.indicator(full2, "1"), Potential.indicator(full2, "00")]
        )
        dom = feasible_domain(obs)
        assert dom.contains(np.array([1.0, 0.0]))
        assert dom.contains(np.array([0.0, 1.0]))
        assert not dom.contains(np.array([0.9, 0.9]))


class TestLambdaValue:
    def test_matches_binary_entropy(self, zero_full, obs_full):
        for a in (0.05, 0.2, 0.5, 0.9):
            assert lambda_value(a, zero_full, obs_full) == pytest.approx(
                binary_entropy(a), abs=1e-9
            )

    def test_constant_shift_passes_through(self, full2, obs_full):
        c = 0.77
        phi_c = Potential.constant(full2, c)
        for a in (0.25, 0.6):
            base = lambda_value(a, Potential.constant(full2, 0.0), obs_full)
            assert lambda_value(a, phi_c, obs_full) == pytest.approx(base + c, abs=1e-9)

    def test_outside_domain(self, zero_full, obs_full):
        assert lambda_value(1.5, zero_full, obs_full) == -np.inf
        assert lambda_value(-0.5, zero_full, obs_full) == -np.inf

    def test_boundary_fixed_point(self, zero_full, obs_full):
        point = lambda_point(1.0, zero_full, obs_full)
        assert point.value == pytest.approx(0.0, abs=1e-12)
        assert point.flag == "boundary"

    def test_boundary_golden_max_density(self, golden):
        # densest admissible 1-frequency is the 10-cycle: zero entropy there
        obs = ObservableSet([Potential.indicator(golden, "1")])
        zero = Potential.constant(golden, 0.0)
        point = lambda_point(0.5, zero, obs)
        assert point.flag == "boundary"
        assert point.value == pytest.approx(0.0, abs=1e-12)

    def test_boundary_golden_zero_density(self, golden):
        # forbidding 1s leaves the fixed point 0: entropy 0
        obs = ObservableSet([Potential.indicator(golden, "1")])
        zero = Potential.constant(golden, 0.0)
        assert lambda_value(0.0, zero, obs) == pytest.approx(0.0, abs=1e-12)

    def test_dominated_by_pressure(self, golden):
        rng = np.random.default_rng(17)
        obs = ObservableSet([Potential.indicator(golden, "1")])
        phi = Potential.from_dict(
            golden, 2, {"00": rng.normal(), "01": rng.normal(), "10": rng.normal()}
        )
        p = spectral_pressure(golden, phi).value
        for y in np.linspace(0.02, 0.48, 12):
            assert lambda_value(y, phi, obs) <= p + 1e-10

    def test_two_observable_newton(self, full2):
        obs = ObservableSet(
            [Potential.indicator(full2, "1"), Potential.indicator(full2, "11")]
        )
        zero = Potential.constant(full2, 0.0)
        # Bernoulli(0.5) has averages (0.5, 0.25): Lambda = log 2 at that point
        val = lambda_value(np.array([0.5, 0.25]), zero, obs)
        assert val == pytest.approx(np.log(2), abs=1e-8)
        # Markov chains with P(1|0)=a, P(1|1)=b realize other pairs
        val2 = lambda_value(np.array([0.5, 0.3]), zero, obs)
        assert np.isfinite(val2) and val2 < np.log(2)


class TestLambdaDirect:
    def test_oracle_gap_on_grid(self, zero_full, obs_full):
        for a in np.linspace(0.1, 0.9, 9):
            dual = lambda_value(a, zero_full, obs_full)
            primal = lambda_direct(a, zero_full, obs_full)
            assert abs(dual - primal) <= 1e-6

    def test_unconstrained_optimum(self, zero_full, obs_full):
        # y at the maximal-entropy average: primal reproduces log lambda
        assert lambda_direct(0.5, zero_full, obs_full) == pytest.approx(
            np.log(2), abs=1e-8
        )

    def test_higher_order(self, zero_full, obs_full):
        val = lambda_direct(0.3, zero_full, obs_full, order=2)
        assert val == pytest.approx(binary_entropy(0.3), abs=1e-6)


class TestConcavity:
    def test_midpoint_inequality(self, zero_full, obs_full):
        ev = LambdaEvaluator(zero_full, obs_full)
        ys = np.linspace(0.1, 0.9, 9)
        vals = {y: ev.value(np.array([y])).value for y in ys}
        for y1 in ys:
            for y2 in ys:
                if y2 <= y1:
                    continue
                for lam in (0.25, 0.5, 0.75):
                    mid = lam * y1 + (1 - lam) * y2
                    v = ev.value(np.array([mid])).value
                    assert v >= lam * vals[y1] + (1 - lam) * vals[y2] - 1e-8


class TestLevelSetPressure:
    def test_equ_singleton(self, zero_full, obs_full):
        val = pressure_equ(TargetSet.point(0.3), zero_full, obs_full)
        assert val == pytest.approx(binary_entropy(0.3), abs=1e-9)

    def test_equ_full_domain_is_zero(self, zero_full, obs_full):
        val = pressure_equ(TargetSet.interval(0.0, 1.0), zero_full, obs_full)
        assert val == pytest.approx(0.0, abs=1e-6)

    def test_equ_rejects_disconnected(self, zero_full, obs_full):
        assert is_empty(pressure_equ(TargetSet.points([[0.2], [0.5]]), zero_full, obs_full))

    def test_equ_rejects_outside(self, zero_full, obs_full):
        assert is_empty(pressure_equ(TargetSet.interval(0.5, 1.5), zero_full, obs_full))

    def test_sub_two_points(self, zero_full, obs_full):
        val = pressure_sub(TargetSet.points([[0.2], [0.4]]), zero_full, obs_full)
        assert val == pytest.approx(min(binary_entropy(0.2), binary_entropy(0.4)), abs=1e-9)

    def test_sub_hull_identity(self, zero_full, obs_full):
        pts = TargetSet.points([[0.2], [0.35], [0.6]])
        hull = TargetSet.interval(0.2, 0.6)
        a = pressure_sub(pts, zero_full, obs_full)
        b = pressure_sub(hull, zero_full, obs_full)
        assert abs(a - b) <= 1e-6

    def test_sub_equals_equ_on_singletons(self, zero_full, obs_full):
        c = TargetSet.point(0.41)
        assert pressure_sub(c, zero_full, obs_full) == pytest.approx(
            pressure_equ(c, zero_full, obs_full), abs=1e-12
        )

    def test_sup_covers_domain(self, zero_full, obs_full):
        val = pressure_sup(TargetSet.interval(-1.0, 2.0), zero_full, obs_full)
        assert val == pytest.approx(np.log(2), abs=1e-6)

    def test_sup_disjoint(self, zero_full, obs_full):
        assert pressure_sup(TargetSet.interval(1.2, 1.5), zero_full, obs_full) == -np.inf

    def test_between_empty_inner(self, zero_full, obs_full):
        val = pressure_between(None, TargetSet.interval(0.0, 1.0), zero_full, obs_full)
        assert val == pytest.approx(np.log(2), abs=1e-6)

    def test_between_hull_inside_component(self, zero_full, obs_full):
        val = pressure_between(
            TargetSet.points([[0.3], [0.5]]),
            TargetSet.interval(0.2, 0.6),
            zero_full,
            obs_full,
        )
        assert val == pytest.approx(binary_entropy(0.3), abs=1e-9)

    def test_between_split_components(self, zero_full, obs_full):
        outer = TargetSet.box_union([([0.1], [0.2]), ([0.6], [0.8])])
        inner = TargetSet.points([[0.15], [0.7]])
        assert is_empty(pressure_between(inner, outer, zero_full, obs_full))

    def test_between_bracket_two_dim(self, full2):
        # L-shaped outer region: the hull of the two inner corners escapes it
        obs = ObservableSet(
            [Potential.indicator(full2, "1"), Potential.indicator(full2, "11")]
        )
        zero = Potential.constant(full2, 0.0)
        outer = TargetSet.box_union(
            [
                ([0.30, 0.10], [0.55, 0.16]),
                ([0.50, 0.10], [0.55, 0.30]),
            ]
        )
        inner = TargetSet.points([[0.35, 0.13], [0.53, 0.28]])
        val = pressure_between(inner, outer, zero, obs)
        assert isinstance(val, PressureBracket)
        assert val.lower <= val.upper + 1e-12


class TestRelativeSpectrum:
    def test_constant_denominator(self, full2, obs_full, zero_full):
        f = Potential.indicator(full2, "1")
        one = Potential.constant(full2, 1.0)
        for a in (0.2, 0.5, 0.8):
            assert relative_spectrum(f, one, a, zero_full) == pytest.approx(
                binary_entropy(a), abs=1e-9
            )

    def test_equal_numerator_denominator(self, full2, zero_full):
        g = Potential.constant(full2, 1.0) + Potential.indicator(full2, "1")
        assert relative_spectrum(g, g, 1.0, zero_full) == pytest.approx(
            np.log(2), abs=1e-12
        )
        assert relative_spectrum(g, g, 0.5, zero_full) == -np.inf

    def test_rejects_zero_crossing_denominator(self, full2, zero_full):
        f = Potential.indicator(full2, "1")
        g = Potential.from_dict(full2, 1, {"0": -1.0, "1": 1.0})
        with pytest.raises(PreconditionError):
            relative_spectrum(f, g, 0.3, zero_full)


class TestBowenRoots:
    def test_constant_scale(self, full2, obs_full):
        psi = Potential.constant(full2, np.log(2))
        assert bs_dimension_point(0.5, psi, obs_full) == pytest.approx(1.0, abs=1e-10)

    def test_cantor_value(self, full2, obs_full):
        psi = Potential.constant(full2, np.log(3))
        assert bs_dimension_point(0.5, psi, obs_full) == pytest.approx(
            np.log(2) / np.log(3), abs=1e-10
        )

    def test_ratio_of_entropy_to_constant(self, full2, obs_full):
        psi = Potential.constant(full2, 1.3)
        for y in (0.2, 0.7):
            assert bs_dimension_point(y, psi, obs_full) == pytest.approx(
                binary_entropy(y) / 1.3, abs=1e-10
            )

    def test_scaling_relation(self, full2, obs_full):
        psi = Potential.constant(full2, np.log(2))
        base = bs_dimension_point(0.35, psi, obs_full)
        scaled = bs_dimension_point(0.35, psi * 2.5, obs_full)
        assert scaled == pytest.approx(base / 2.5, abs=1e-9)

    def test_set_modes(self, full2, obs_full):
        psi = Potential.constant(full2, np.log(3))
        full_dom = TargetSet.interval(0.0, 1.0)
        sup_val = bs_dimension_set(full_dom, psi, obs_full, "sup")
        assert sup_val == pytest.approx(bowen_root(full2, psi), abs=1e-9)
        assert is_empty(bs_dimension_set(TargetSet.interval(0.4, 1.2), psi, obs_full, "sub"))
        singleton = bs_dimension_set(TargetSet.point(0.5), psi, obs_full, "equ")
        assert singleton == pytest.approx(np.log(2) / np.log(3), abs=1e-9)

    def test_requires_positive_scale(self, full2, obs_full):
        psi = Potential.constant(full2, 0.0)
        with pytest.raises(PreconditionError):
            bs_dimension_point(0.5, psi, obs_full)


class TestSpectrumCurve:
    def test_peak_at_half(self, zero_full, obs_full):
        curve = spectrum_curve(zero_full, obs_full, grid=101)
        finite = np.isfinite(curve.values)
        peak = curve.grid[finite][np.argmax(curve.values[finite])]
        assert peak[0] == pytest.approx(0.5, abs=1e-9)
        assert curve.values[finite].max() == pytest.approx(np.log(2), abs=1e-9)

    def test_csv_headers_and_sentinels(self, zero_full, obs_full):
        curve = spectrum_curve(zero_full, obs_full, grid=11)
        text = curve.csv_text()
        lines = text.strip().split("\n")
        assert lines[0] == "y_1,lambda,dual_q_1,flags"
        assert len(lines) == 12
        assert "boundary" in text
