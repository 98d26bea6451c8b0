"""moments：盒子、曲面与核上的矩，拟合与解耦比值"""
import math

import numpy as np
import pytest

from lab.constructions import SequenceRecipe, spike
from lab.core import Coefficients, PhaseSystem, TorusBox
from lab.counting import circle_lattice
from lab.errors import DomainError, ResourceGuardError
from lab.expsum import GridSpec, modulated_coefficients, power_integral
from lab.measures import DecayKernel, GraphSurface, surface_fourier_coefficient
from lab.moments import (
    STATEMENTS,
    ExperimentConfig,
    QuadratureSpec,
    box_moment,
    case_ratio,
    conjecture3_normalized,
    decoupling_ratio,
    dyadic_majorant,
    exponent_fit_over_j,
    exponent_fit_over_N,
    grid_rule,
    holder_check,
    kernel_moment,
    lemma_a28_check,
    norm_power,
    stratified_uniform,
    surface_moment,
)

GRID = QuadratureSpec("grid")
EXACT = QuadratureSpec("exact")


class TestQuadratureSpec:

    def test_parse(self):
        assert QuadratureSpec.parse("grid:16,32").counts == (16, 32)
        assert QuadratureSpec.parse("mc:2000").samples == 2000
        assert QuadratureSpec.parse("exact").method == "exact"
        assert QuadratureSpec.parse(None).method == "auto"

    @pytest.mark.parametrize("text", ["mc:12", "bogus", "grid:a", "grid:0,4"])
    def test_parse_rejects(self, text):
        with pytest.raises(DomainError):
            QuadratureSpec.parse(text)

    def test_with_seed(self):
        q = QuadratureSpec("mc", samples=2048).with_seed(9)
        assert (q.method, q.samples, q.seed) == ("mc", 2048, 9)

    def test_latin_hypercube(self):
        U = stratified_uniform(64, 3, np.random.default_rng(0))
        for k in range(3):
            assert sorted(np.floor(U[:, k] * 64).astype(int)) == list(range(64))


class TestBoxMoment:

    def test_parseval_grid(self):
        a = Coefficients.on_interval(1, 32)
        result = box_moment(a, PhaseSystem.moment_curve(1), TorusBox.full(1), 2, GRID)
        assert result.value == pytest.approx(32.0, rel=1e-12)
        assert result.method == "grid"

    def test_auto_uses_counting(self):
        a = Coefficients.on_interval(1, 3)
        result = box_moment(a, PhaseSystem.moment_curve(2), TorusBox.full(2), 4)
        assert result.value == 15.0
        assert result.method == "exact-count"
        assert result.abs_error == 0.0

    def test_grid_matches_exact_on_subbox(self, random_coefficients):
        a = random_coefficients(1, 8, seed=12)
        sys_ = PhaseSystem.moment_curve(2)
        box = TorusBox.dyadic(2, 2)
        grid = box_moment(a, sys_, box, 4, GRID)
        exact = box_moment(a, sys_, box, 4, EXACT)
        assert exact.method == "exact-kernel"
        assert grid.value == pytest.approx(exact.value, abs=1e-8 * max(1.0, exact.value))
        assert grid.abs_error < 1e-6 * exact.value

    def test_full_torus_grid_is_exact(self, random_coefficients):
        a = random_coefficients(1, 6, seed=4)
        sys_ = PhaseSystem.moment_curve(3)
        grid = box_moment(a, sys_, TorusBox.full(3), 4, GRID)
        exact = box_moment(a, sys_, TorusBox.full(3), 4, EXACT)
        assert grid.value == pytest.approx(exact.value, rel=1e-10)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_translate_equals_modulated_coefficients(self, random_coefficients, seed):
        # ∫_{x₀+B}|S_a|^4 = ∫_B|S_b|^4，b_n = a_n e(φ(n)·x₀)
        a = random_coefficients(1, 6, seed=seed + 20)
        sys_ = PhaseSystem.moment_curve(2)
        x0 = np.random.default_rng(seed).random(2)
        base = TorusBox.from_sides((0.25, 0.125))
        moved = base.translate(x0)
        b = Coefficients.on_interval(1, 6, modulated_coefficients(a, sys_.frequencies(a), x0[None, :])[0])
        expected = box_moment(b, sys_, base, 4, EXACT).value
        assert box_moment(a, sys_, moved, 4, EXACT).value == pytest.approx(expected, rel=1e-10)
        assert box_moment(a, sys_, moved, 4, GRID).value == pytest.approx(expected, abs=1e-8 * max(1.0, expected))
        assert box_moment(b, sys_, base, 4, GRID).value == pytest.approx(expected, abs=1e-8 * max(1.0, expected))

    def test_mc_agrees_with_exact(self, random_coefficients):
        a = random_coefficients(1, 8, seed=2)
        sys_ = PhaseSystem.moment_curve(2)
        box = TorusBox.dyadic(2, 1)
        mc = box_moment(a, sys_, box, 4, QuadratureSpec("mc", samples=4000, seed=3))
        exact = box_moment(a, sys_, box, 4, EXACT)
        assert mc.method == "mc" and mc.seed == 3
        assert abs(mc.value - exact.value) <= 6 * mc.abs_error + 1e-9

    def test_mc_thread_independent(self, random_coefficients, pool, pool4):
        a = random_coefficients(1, 8, seed=2)
        sys_ = PhaseSystem.moment_curve(3)
        quad = QuadratureSpec("mc", samples=5000, seed=1)
        first = box_moment(a, sys_, TorusBox.dyadic(3, 1), 3, quad, pool)
        second = box_moment(a, sys_, TorusBox.dyadic(3, 1), 3, quad, pool4)
        assert first.value == second.value
        assert first.abs_error == second.abs_error

    def test_auto_falls_back_to_mc(self):
        a = Coefficients.on_interval(1, 8)
        result = box_moment(a, PhaseSystem.moment_curve(2), TorusBox.full(2), 3,
                            QuadratureSpec("auto", max_grid_points=100))
        assert result.method == "mc"

    def test_grid_too_coarse(self):
        a = Coefficients.on_interval(1, 8)
        with pytest.raises(ResourceGuardError) as info:
            box_moment(a, PhaseSystem.moment_curve(2), TorusBox.full(2), 4, QuadratureSpec("grid", counts=(4, 4)))
        assert info.value.details["required_counts"] == (15, 127)

    def test_grid_rule_marks_exactness(self):
        a = Coefficients.on_interval(1, 5)
        sys_ = PhaseSystem.moment_curve(2)
        assert grid_rule(a, sys_, TorusBox.full(2), 4)[1]
        assert not grid_rule(a, sys_, TorusBox.full(2), 3)[1]
        assert not grid_rule(a, sys_, TorusBox.dyadic(2, 1), 4)[1]

    def test_shifted_periodic_grid_stays_exact(self, random_coefficients, pool):
        a = random_coefficients(1, 5, seed=4)
        sys_ = PhaseSystem.moment_curve(2)
        box = TorusBox.full(2)
        rule, exact = grid_rule(a, sys_, box, 4, GridSpec((9, 49), (0.25, 0.5)))
        assert exact
        expected = box_moment(a, sys_, box, 4, EXACT).value
        assert power_integral(a, sys_, rule, 4, pool) == pytest.approx(expected, rel=1e-10)

    def test_equispaced_grid_on_half_period(self, pool):
        # 实系数时 |S(1−x)| = |S(x)|，半周期上的四次矩是整周期的一半
        a = Coefficients.on_interval(1, 4)
        sys_ = PhaseSystem.moment_curve(1)
        box = TorusBox.from_sides((0.5,))
        midpoint, exact = grid_rule(a, sys_, box, 4, GridSpec((256,), (0.5,)))
        gauss, _ = grid_rule(a, sys_, box, 4)
        assert not exact
        assert midpoint.axes[0].kind == "equispaced"
        assert power_integral(a, sys_, gauss, 4, pool) == pytest.approx(22.0, rel=1e-10)
        assert power_integral(a, sys_, midpoint, 4, pool) == pytest.approx(22.0, rel=1e-2)

    def test_equispaced_grid_too_coarse(self):
        a = Coefficients.on_interval(1, 4)
        with pytest.raises(ResourceGuardError):
            grid_rule(a, PhaseSystem.moment_curve(1), TorusBox.from_sides((0.5,)), 4, GridSpec((8,)))

    def test_domain_errors(self):
        a = Coefficients.on_interval(1, 4)
        with pytest.raises(DomainError):
            box_moment(a, PhaseSystem.moment_curve(2), TorusBox.full(2), 0)
        with pytest.raises(DomainError):
            box_moment(a, PhaseSystem.moment_curve(2), TorusBox.full(3), 2)
        with pytest.raises(DomainError):
            box_moment(a, PhaseSystem.moment_curve(2), TorusBox.full(2), 3, EXACT)

    def test_lattice_system_refuses_mc(self):
        shell = circle_lattice(25)
        a = Coefficients.from_points(shell.points)
        with pytest.raises(DomainError):
            box_moment(a, PhaseSystem.sphere(25), TorusBox.full(2), 4, QuadratureSpec("mc"))


class TestSurfaceMoment:

    def test_flat_parseval(self, random_coefficients):
        a = random_coefficients(1, 10, seed=5)
        result = surface_moment(a, PhaseSystem.moment_curve(2), GraphSurface.flat(2), 2, GRID)
        assert result.value == pytest.approx(10.0, rel=1e-10)

    def test_spike_on_circle(self):
        result = surface_moment(spike(3), PhaseSystem.moment_curve(2), GraphSurface.circle(), 6, GRID)
        assert result.value == pytest.approx(2 * math.pi, rel=1e-12)

    def test_square_surface_quadratic_form(self):
        N = 8
        a = Coefficients.on_interval(1, N)
        result = surface_moment(a, PhaseSystem.moment_curve(2), GraphSurface.square(), 2, GRID)
        square = GraphSurface.square()
        expected = sum(surface_fourier_coefficient(square, (n - m, n * n - m * m)).real
                       for m in range(1, N + 1) for n in range(1, N + 1))
        assert result.value == pytest.approx(expected, rel=1e-6)

    def test_mc(self, random_coefficients):
        a = random_coefficients(1, 6, seed=1)
        sys_ = PhaseSystem.moment_curve(2)
        grid = surface_moment(a, sys_, GraphSurface.square(), 4, GRID)
        mc = surface_moment(a, sys_, GraphSurface.square(), 4, QuadratureSpec("mc", samples=8000, seed=2))
        assert abs(mc.value - grid.value) <= 6 * mc.abs_error

    def test_rejections(self):
        a = Coefficients.on_interval(1, 4)
        with pytest.raises(DomainError):
            surface_moment(a, PhaseSystem.moment_curve(2), GraphSurface.square(), 2, EXACT)
        with pytest.raises(DomainError):
            surface_moment(a, PhaseSystem.moment_curve(3), GraphSurface.square(), 2)
        with pytest.raises(ResourceGuardError):
            surface_moment(a, PhaseSystem.moment_curve(2), GraphSurface.square(), 2, QuadratureSpec("grid", counts=(2,)))


class TestKernelMoment:

    def test_constant_kernel(self, random_coefficients):
        a = random_coefficients(1, 7, seed=3)
        value = kernel_moment(a, PhaseSystem.moment_curve(2), DecayKernel(0.0), 1)
        assert value == pytest.approx(abs(complex(np.sum(a.values))) ** 2, rel=1e-12)

    def test_spike(self):
        assert kernel_moment(spike(4), PhaseSystem.moment_curve(3), DecayKernel(1.0), 2) == pytest.approx(1.0)

    def test_direct_double_sum(self, random_coefficients):
        a = random_coefficients(1, 6, seed=9)
        n = a.support
        v = a.values
        direct = sum((v[i] * np.conj(v[k]) * (1 + abs(int(n[i]) - int(n[k]))) ** -0.5).real
                     for i in range(6) for k in range(6))
        assert kernel_moment(a, PhaseSystem.moment_curve(1), DecayKernel(0.5), 1) == pytest.approx(direct, rel=1e-12)

    def test_guard(self):
        with pytest.raises(ResourceGuardError):
            kernel_moment(Coefficients.on_interval(1, 40), PhaseSystem.moment_curve(2), DecayKernel(1.0), 2,
                          max_pairs=10 ** 4)


class TestNormalizations:

    def test_norm_power(self):
        a = Coefficients.on_interval(1, 8)
        assert norm_power(a, 8, 6, "l2") == pytest.approx(512.0)
        assert norm_power(a, 8, 6, "l6") == pytest.approx(512.0)
        with pytest.raises(DomainError):
            norm_power(a, 8, 6, "l4")

    def test_conjecture_at_scale_zero(self, random_coefficients):
        assert conjecture3_normalized(random_coefficients(1, 9, seed=2), 2, 9, 0, 2) == pytest.approx(1.0)

    def test_case_ratio_unknown(self):
        with pytest.raises(DomainError):
            case_ratio(Coefficients.on_interval(1, 4), "d7p2", 4, 0)

    def test_dyadic_majorant_terms(self):
        total, terms = dyadic_majorant(Coefficients.on_interval(1, 4), 1, 4, 2)
        assert [j for j, _ in terms] == [0, 1, 2]
        assert terms[0][1] == pytest.approx(8.0)
        assert terms[1][1] == pytest.approx(4 * 2 ** 1)
        assert total == pytest.approx(sum(t for _, t in terms))


class TestProperties:

    def test_holder(self, random_coefficients):
        a = random_coefficients(1, 6, seed=7)
        check = holder_check(a, PhaseSystem.moment_curve(2), TorusBox.dyadic(2, 1), 2, 4, EXACT)
        assert check.holds and check.lhs <= check.rhs + 1e-9

    def test_positive_majorant(self, random_coefficients):
        a = random_coefficients(1, 6, seed=1)
        mu = {(1,): 0.5, (-1,): 0.5}
        nu = {(0,): 1.0, (1,): 0.5, (-1,): 0.5}
        assert lemma_a28_check(a, PhaseSystem.moment_curve(1), mu, nu, 4).holds

    def test_majorant_must_dominate(self):
        with pytest.raises(DomainError):
            lemma_a28_check(Coefficients.on_interval(1, 3), PhaseSystem.moment_curve(1), {(2,): 1.0}, {}, 4)


class TestExponentFits:

    def test_parseval_slope(self):
        config = ExperimentConfig(d=1, p=2, recipe=SequenceRecipe.constant())
        fit, results = exponent_fit_over_N(config, [8, 16, 32, 64])
        assert fit.slope == pytest.approx(1.0, abs=1e-9)
        assert [r.N for r in results] == [8, 16, 32, 64]

    def test_volume_slope_over_j(self):
        config = ExperimentConfig(d=2, p=4, recipe=SequenceRecipe.constant(), region="dyadic")
        fit, _ = exponent_fit_over_j(config, 1, [0, 1, 2, 3])
        assert fit.slope == pytest.approx(-2.0, abs=1e-9)

    def test_ladder_rules(self):
        config = ExperimentConfig(d=1, p=2, recipe=SequenceRecipe.constant())
        with pytest.raises(DomainError):
            exponent_fit_over_N(config, [8, 16, 32])
        with pytest.raises(DomainError):
            exponent_fit_over_N(config, [8, 16, 24, 32])
        with pytest.raises(DomainError):
            ExperimentConfig(d=1, p=2, recipe=SequenceRecipe.constant(), region="ball")


class TestDecoupling:

    def test_spike_ratio(self):
        result = decoupling_ratio("a11", 16, spike(8), QuadratureSpec("mc", samples=1000))
        assert result.ratio == pytest.approx(16.0 ** -4, rel=1e-9)

    def test_statements(self):
        assert set(STATEMENTS) == {"a10", "a11", "a32", "d32", "c7"}
        assert STATEMENTS["c7"].p == 18

    def test_infeasible_reports_largest_N(self):
        quad = QuadratureSpec("mc", samples=1000, max_grid_points=10 ** 6)
        with pytest.raises(ResourceGuardError) as info:
            decoupling_ratio("a10", 200, quad=quad)
        assert info.value.details["max_feasible_N"] == 4

    def test_rejections(self):
        with pytest.raises(DomainError):
            decoupling_ratio("b12", 16)
        with pytest.raises(DomainError):
            decoupling_ratio("a11", 1)
        with pytest.raises(DomainError):
            decoupling_ratio("a11", 16, Coefficients.on_interval(2, 16))

    def test_seed_reproducible(self, random_coefficients):
        a = random_coefficients(8, 16, seed=4)
        quad = QuadratureSpec("mc", samples=1000, seed=5)
        first = decoupling_ratio("a11", 16, a, quad)
        second = decoupling_ratio("a11", 16, a, quad)
        assert first.ratio == second.ratio and first.seed == 5
