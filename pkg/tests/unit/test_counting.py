"""counting：精确计数预言机"""
import itertools
import math

import numpy as np
import pytest

from lab.core import Coefficients, PhaseSystem, TorusBox
from lab.counting import (
    ZERO_BUCKET,
    _dyadic_bucket,
    arc_max_count,
    box_moment_exact,
    circle_lattice,
    convex_sum_bound,
    cor_cip_sup,
    dyadic_pair_profile,
    even_moment_count,
    f_c,
    fc_amax,
    fc_increment_check,
    l4_failure_ratio,
    l4_kernel_row,
    l4_kernel_sup,
    lemma_a35_check,
    pair_count_Ij,
    parab_kernel_bound,
    paraboloid_row_sup,
    power_sum_multiset,
    s_cd,
    sphere_l4_majorant,
    sumset,
)
from lab.errors import DomainError, ResourceGuardError


def brute_force_count(N: int, d: int, l: int) -> int:
    """#{2l 元组: Σ_{i≤l} n_i^k = Σ_{i>l} n_i^k, k=1..d}"""
    sums = {}
    for t in itertools.product(range(1, N + 1), repeat=l):
        key = tuple(sum(n ** k for n in t) for k in range(1, d + 1))
        sums[key] = sums.get(key, 0) + 1
    return sum(c * c for c in sums.values())


class TestEvenMoments:

    @pytest.mark.parametrize("N", [1, 2, 3, 10])
    def test_vinogradov_d2_l2(self, N):
        value = even_moment_count(Coefficients.on_interval(1, N), PhaseSystem.moment_curve(2), 2)
        assert value == 2 * N * N - N

    def test_parseval(self):
        assert even_moment_count(Coefficients.on_interval(1, 9), PhaseSystem.moment_curve(1), 1) == 9

    def test_d3_l3_against_sextuple_enumeration(self):
        value = even_moment_count(Coefficients.on_interval(1, 4), PhaseSystem.moment_curve(3), 3)
        assert value == brute_force_count(4, 3, 3)

    def test_multiset_mass(self, random_coefficients):
        a = random_coefficients(1, 6, seed=8)
        ms = power_sum_multiset(a, PhaseSystem.moment_curve(2), 2)
        assert ms.total_mass == pytest.approx(complex(np.sum(a.values)) ** 2, abs=1e-12)
        ms_abs = power_sum_multiset(a.abs(), PhaseSystem.moment_curve(2), 2)
        assert ms_abs.total_mass.real == pytest.approx(a.norm(1) ** 2)

    def test_thread_count_does_not_change_result(self, random_coefficients, pool, pool4):
        a = random_coefficients(1, 40, seed=6)
        sys_ = PhaseSystem.moment_curve(3)
        assert even_moment_count(a, sys_, 2, pool=pool) == even_moment_count(a, sys_, 2, pool=pool4)

    def test_tuple_guard(self):
        with pytest.raises(ResourceGuardError) as info:
            even_moment_count(Coefficients.on_interval(1, 100), PhaseSystem.moment_curve(2), 3, max_tuples=10 ** 5)
        assert info.value.details["required_tuples"] == 10 ** 6


class TestBoxMomentExact:

    def test_full_torus_equals_count(self, random_coefficients):
        a = random_coefficients(1, 7, seed=2)
        sys_ = PhaseSystem.moment_curve(2)
        assert box_moment_exact(a, sys_, TorusBox.full(2), 2) == pytest.approx(
            even_moment_count(a, sys_, 2), rel=1e-12)

    def test_half_interval(self):
        # ∫₀^{1/2} |e(x)+e(2x)|² dx = ∫₀^{1/2} 2 + 2cos(2πx) dx = 1
        a = Coefficients.on_interval(1, 2)
        box = TorusBox((0.0,), (0.5,))
        value = box_moment_exact(a, PhaseSystem.moment_curve(1), box, 1)
        assert value == pytest.approx(1.0, abs=1e-13)
        x = (np.arange(10 ** 6) + 0.5) / 10 ** 6 * 0.5
        fine = np.mean(np.abs(np.exp(2j * np.pi * x) + np.exp(4j * np.pi * x)) ** 2) * 0.5
        assert value == pytest.approx(fine, rel=1e-9)

    def test_spike_gives_volume(self):
        box = TorusBox((0.1, 0.2, 0.3), (0.5, 0.25, 0.125))
        value = box_moment_exact(Coefficients.on_interval(5, 5), PhaseSystem.moment_curve(3), box, 2)
        assert value == pytest.approx(box.volume, rel=1e-14)

    def test_translated_box(self, random_coefficients):
        a = random_coefficients(1, 5, seed=3)
        sys_ = PhaseSystem.moment_curve(1)
        # [0.75, 1.25] 与 [0.75,1] ∪ [0, 0.25] 相同
        whole = box_moment_exact(a, sys_, TorusBox((0.75,), (0.5,)), 2)
        parts = (box_moment_exact(a, sys_, TorusBox((0.75,), (0.25,)), 2)
                 + box_moment_exact(a, sys_, TorusBox((0.0,), (0.25,)), 2))
        assert whole == pytest.approx(parts, rel=1e-12)

    def test_pair_guard(self, random_coefficients):
        a = random_coefficients(1, 30, seed=1)
        with pytest.raises(ResourceGuardError):
            box_moment_exact(a, PhaseSystem.moment_curve(2), TorusBox.dyadic(2, 2), 2, max_pairs=1000)


class TestSumsets:

    def test_interval(self):
        for N in (1, 5, 12):
            assert sumset(range(1, N + 1), 1)[1] == 2 * N - 1
            assert sumset(range(1, N + 1), 2)[1] == max(1, 4 * N - 3)

    def test_small_set(self):
        values, size = sumset([1, 2, 4], 1)
        assert size == 7
        np.testing.assert_array_equal(values, np.arange(-3, 4))

    def test_symmetric_and_bounded(self):
        S = [0, 3, 7, 8]
        values, size = sumset(S, 2)
        np.testing.assert_array_equal(values, -values[::-1])
        assert size <= min(2 * 2 * 8 + 1, len(S) ** 4)

    def test_empty(self):
        with pytest.raises(DomainError):
            sumset([], 1)

    def test_full_interval_ratio(self, random_coefficients):
        a = random_coefficients(1, 6, seed=4)
        check = lemma_a35_check(range(1, 7), a, (0.0, 1.0), 1)
        assert check.ratio == pytest.approx(1.0 / 11)

    def test_random_subinterval(self):
        rng = np.random.default_rng(3)
        a = Coefficients.on_interval(1, 8, np.exp(2j * np.pi * rng.random(8)))
        assert lemma_a35_check(range(1, 9), a, (0.0, 0.25), 1).holds

    def test_shifted_support(self):
        check = lemma_a35_check(range(4, 9), Coefficients.on_interval(4, 8), (0.0, 1.0 / 64), 2)
        assert check.holds and check.ratio <= 1.0

    def test_support_must_equal_set(self):
        with pytest.raises(DomainError):
            lemma_a35_check([1, 2, 3], Coefficients.on_interval(1, 4), (0.0, 0.5), 1)


class TestParaboloidKernels:

    def test_single_point(self):
        value, _ = parab_kernel_bound(3, 1)
        assert value == 1.0

    def test_spike(self):
        N = 4
        values = np.zeros(N * N)
        values[5] = 1.0
        a = Coefficients.from_points([[i, j] for i in range(1, N + 1) for j in range(1, N + 1)], values)
        assert parab_kernel_bound(3, N, a=a)[0] == pytest.approx(1.0)

    def test_matches_direct_double_sum(self):
        N, beta = 5, 0.5
        pts = [(m, m * m) for m in range(1, N + 1)]
        direct = sum((1 + math.dist(p, q)) ** -beta for p in pts for q in pts)
        value, normalized = parab_kernel_bound(2, N, beta)
        assert value == pytest.approx(direct, rel=1e-12)
        # d=2 时归一化因子为 1，只除以 ‖a‖² = N
        assert normalized == pytest.approx(direct / N, rel=1e-12)

    def test_row_sup_at_most_total(self):
        value, _ = paraboloid_row_sup(3, 6)
        total, _ = parab_kernel_bound(3, 6)
        assert 1.0 <= value <= total

    def test_guard(self):
        with pytest.raises(ResourceGuardError):
            parab_kernel_bound(3, 40, max_pairs=10 ** 5)

    @pytest.mark.slow
    def test_d3_log_band(self):
        scaled = [parab_kernel_bound(3, N)[0] / (N * N * math.log(N)) for N in (8, 16, 32, 64)]
        assert max(scaled) / min(scaled) <= 3.0


class TestFC:

    def test_maximum(self):
        assert fc_amax(4000) == pytest.approx(10.0)
        assert f_c(4000, 10.0) == pytest.approx(173.2050808, rel=1e-9)

    def test_boundary_zero(self):
        C = 4000.0
        assert f_c(C, C ** (1 / 3) - 1e-9) <= 1.0

    def test_domain(self):
        with pytest.raises(DomainError):
            f_c(1000, 2.0)
        with pytest.raises(DomainError):
            f_c(4000, 20.0)
        with pytest.raises(DomainError):
            f_c(4000, 0.0)

    def test_increment_is_quadratic(self):
        lo, hi, ok = fc_increment_check(1e6, [1, 2, 4, 8])
        assert ok and 1 / 20 <= lo <= hi <= 20

    def test_cip_large_D(self):
        C, D, beta = 4000.0, 200.0, 0.7
        result = cor_cip_sup(C, D, beta)
        assert result.sup <= math.floor(fc_amax(C)) * D ** -beta
        assert result.lemma_holds

    def test_cip_lemma_bound_counts_j0(self):
        C, D, beta = 4000.0, 2.0, 0.7
        A = math.floor(fc_amax(C))
        f = np.concatenate([[0.0], f_c(C, np.arange(1, A + 1, dtype=np.float64)) / D])
        terms = 4.0 / ((f[-1] - f) ** beta + 1.0)
        result = cor_cip_sup(C, D, beta)
        assert result.lemma.bound == pytest.approx(2.0 + terms.sum(), rel=1e-12)
        assert result.lemma_j0_term == pytest.approx(terms[0], rel=1e-12)
        assert result.lemma_bound_without_j0 == pytest.approx(2.0 + terms[1:].sum(), rel=1e-12)
        assert result.lemma.grid_sup == pytest.approx(D ** beta * result.sup, rel=1e-12)

    def test_cip_grid_density_converges(self):
        coarse = cor_cip_sup(1001.0, 2.0, 0.8, density=4.0)
        fine = cor_cip_sup(1001.0, 2.0, 0.8, density=40.0)
        assert coarse.sup == pytest.approx(fine.sup, rel=0.05)

    def test_cip_domain(self):
        with pytest.raises(DomainError):
            cor_cip_sup(1e5, 4.0, 0.5)
        with pytest.raises(DomainError):
            cor_cip_sup(1e5, 4.0, 0.7, density=2.0)

    def test_convex_sequence_bound(self):
        f = np.sqrt(np.arange(0, 50, dtype=float))
        assert convex_sum_bound(f, 0.75).holds
        with pytest.raises(DomainError):
            convex_sum_bound([0.0, 1.0, 3.0], 0.75)

    def test_s_cd_positive_and_monotone_in_truncation(self):
        assert 0 < s_cd(1e4, 30.0, 0.8, b_max=50) <= s_cd(1e4, 30.0, 0.8, b_max=100)


class TestL4Kernel:

    def test_trivial_N(self):
        assert l4_kernel_sup(1, 1.0) == 0.0

    def test_N2_against_enumeration(self):
        best = 0.0
        for n1, n3 in itertools.product((1, 2), repeat=2):
            total = 0.0
            for n2, n4 in itertools.product((1, 2), repeat=2):
                if n2 == n4:
                    continue
                total += 1.0 / (abs(n1 ** 2 + n2 ** 2 - n3 ** 2 - n4 ** 2)
                                + abs(n1 ** 3 + n2 ** 3 - n3 ** 3 - n4 ** 3) + 1.0)
            best = max(best, total)
        assert l4_kernel_sup(2, 1.0) == pytest.approx(best, rel=1e-10)

    def test_symmetric_rows(self):
        for n1, n3 in [(1, 5), (2, 9), (4, 7)]:
            assert l4_kernel_row(12, 0.7, n1, n3) == pytest.approx(l4_kernel_row(12, 0.7, n3, n1), rel=1e-14)

    def test_sup_is_max_row(self):
        N, beta = 9, 0.8
        rows = [l4_kernel_row(N, beta, n1, n3) for n1 in range(1, N + 1) for n3 in range(1, N + 1)]
        assert l4_kernel_sup(N, beta) == pytest.approx(max(rows), rel=1e-12)

    def test_guard(self):
        with pytest.raises(ResourceGuardError):
            l4_kernel_sup(513, 1.0)

    def test_failure_ratio_grows_below_two_thirds(self):
        low = [l4_failure_ratio(j, 0.3) for j in (6, 9, 12)]
        assert low[0] < low[1] < low[2]

    @pytest.mark.slow
    def test_growth_below_two_thirds(self):
        from lab.core import fit_loglog

        Ns = [16, 32, 64, 128]
        fit = fit_loglog(Ns, [l4_kernel_sup(N, 0.6) for N in Ns])
        assert fit.slope >= 0.05


class TestCircleLattice:

    def test_shell_25(self):
        shell = circle_lattice(25)
        assert set(shell.points) == {(-5, 0), (-4, 3), (-3, 4), (0, 5), (3, 4), (4, 3), (5, 0)}
        assert shell.size == 7

    def test_without_endpoints(self):
        assert circle_lattice(25, include_endpoints=False).size == 5

    def test_non_representable(self):
        assert circle_lattice(3).size == 0
        with pytest.raises(DomainError):
            arc_max_count(3, 0.4)

    def test_points_exact(self):
        for N in (1, 2, 5, 65, 1105, 5 ** 6):
            for x, y in circle_lattice(N).points:
                assert x * x + y * y == N and y >= 0

    def test_domain(self):
        with pytest.raises(DomainError):
            circle_lattice(0)
        with pytest.raises(ResourceGuardError):
            circle_lattice(10 ** 8 + 1)

    def test_arc_count(self):
        # 弧长 N^{γ/2} ≥ 半周长时覆盖全部点
        assert arc_max_count(25, 2.0) == 7
        assert 1 <= arc_max_count(1105, 0.4) <= circle_lattice(1105).size

    def test_dyadic_bucket(self):
        q = np.array([1, 3, 4, 15, 16, 63, 64])
        np.testing.assert_array_equal(_dyadic_bucket(q), [0, 0, 1, 1, 2, 2, 3])

    def test_pair_profile(self):
        profile = dyadic_pair_profile(25)
        assert profile[ZERO_BUCKET] >= 2
        assert all(0 < c <= 49 for c in profile.values())
        assert pair_count_Ij(25, None) == profile[ZERO_BUCKET]
        assert pair_count_Ij(25, 40) == 0

    def test_majorant_counts_zero_bucket(self):
        profile = dyadic_pair_profile(25)
        assert sphere_l4_majorant(25, 50.0) == pytest.approx(profile[ZERO_BUCKET] + profile.get(0, 0), rel=1e-9)
