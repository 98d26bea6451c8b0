"""measures：曲面测度的 Fourier 系数"""
import math

import numpy as np
import pytest
from scipy import integrate, special

from lab.counting import circle_lattice
from lab.errors import DomainError, ResourceGuardError
from lab.measures import (
    DecayKernel,
    GraphSurface,
    bessel_j0,
    bessel_oracle,
    decay_fit,
    fit_containment,
    flat_surface,
    fourier_table,
    herz_amplitude,
    herz_residual,
    sphere_bilinear_form,
    surface_fourier_coefficient,
    surface_fourier_estimate,
    surface_mass,
    write_fourier_table,
)
from lab.tables import read_rows


class TestBessel:

    def test_against_scipy(self):
        z = np.linspace(0.0, 60.0, 601)
        np.testing.assert_allclose(bessel_j0(z), special.j0(z), atol=1e-9)

    def test_around_cutoff(self):
        z = np.array([11.9, 12.0, 12.0001, 12.1])
        np.testing.assert_allclose(bessel_j0(z), special.j0(z), atol=1e-9)

    def test_even(self):
        assert bessel_j0(-3.5) == pytest.approx(bessel_j0(3.5))

    def test_oracle_at_origin(self):
        assert bessel_oracle(1.5, (0, 0)) == pytest.approx(2 * math.pi * 1.5)
        with pytest.raises(DomainError):
            bessel_oracle(0.0, (1, 0))


class TestSurfaceCoefficients:

    def test_circle_matches_bessel(self):
        for xi in [(3, 4), (0, 1), (7, -2), (12, 5)]:
            value = surface_fourier_coefficient(GraphSurface.circle(), xi)
            assert value == pytest.approx(bessel_oracle(1.0, xi), abs=1e-10)

    def test_square_against_adaptive_quadrature(self):
        def part(f):
            return integrate.quad(lambda x: f(np.exp(-2j * np.pi * 7 * x * x)) * math.sqrt(1 + 4 * x * x),
                                  0.0, 1.0, limit=200, epsabs=1e-13)[0]

        value = surface_fourier_coefficient(GraphSurface.square(), (0, 7))
        assert value.real == pytest.approx(part(np.real), abs=1e-9)
        assert value.imag == pytest.approx(part(np.imag), abs=1e-9)

    def test_square_mass(self):
        expected = math.sqrt(5) / 2 + math.asinh(2) / 4
        assert surface_mass(GraphSurface.square()) == pytest.approx(expected, rel=1e-12)

    def test_circle_mass(self):
        assert surface_mass(GraphSurface.circle(2.0)) == pytest.approx(4 * math.pi, rel=1e-12)

    @pytest.mark.parametrize("surface", [GraphSurface.square(), GraphSurface.bilinear_d3(), GraphSurface.d4()])
    def test_hermitian_and_bounded(self, surface):
        rng = np.random.default_rng(11)
        mass = surface_mass(surface)
        for _ in range(3):
            xi = rng.integers(-6, 7, size=surface.d)
            v = surface_fourier_coefficient(surface, xi)
            w = surface_fourier_coefficient(surface, -xi)
            assert w == pytest.approx(v.conjugate(), abs=1e-11)
            assert abs(v) <= mass * (1 + 1e-12)

    def test_flat_surface_is_orthogonal(self):
        flat = flat_surface(3)
        assert surface_fourier_coefficient(flat, (0, 0, 9)) == pytest.approx(1.0, abs=1e-12)
        assert abs(surface_fourier_coefficient(flat, (2, -1, 5))) < 1e-10

    def test_general_four_is_d4(self):
        xi = (3, -2, 1, 5)
        assert surface_fourier_coefficient(GraphSurface.general(4), xi) == pytest.approx(
            surface_fourier_coefficient(GraphSurface.d4(), xi), abs=1e-13)

    def test_estimate_error_small(self):
        value, err = surface_fourier_estimate(GraphSurface.bilinear_d3(), (4, 0, 9))
        assert err < 1e-10
        assert value == pytest.approx(surface_fourier_coefficient(GraphSurface.bilinear_d3(), (4, 0, 9)), abs=1e-10)

    def test_too_few_panels(self):
        with pytest.raises(ResourceGuardError) as info:
            surface_fourier_coefficient(GraphSurface.square(), (0, 7), panels=4)
        assert info.value.details["required_counts"] == (30,)

    def test_bad_frequency(self):
        with pytest.raises(DomainError):
            surface_fourier_coefficient(GraphSurface.square(), (0.5, 1))
        with pytest.raises(DomainError):
            surface_fourier_coefficient(GraphSurface.square(), (1, 2, 3))

    def test_grid_guard(self):
        with pytest.raises(ResourceGuardError):
            surface_fourier_coefficient(GraphSurface.d5(), (50, 50, 50, 50, 50), max_grid_points=10 ** 4)


class TestHerzAsymptotics:

    def test_amplitude(self):
        assert herz_amplitude(1.0) == pytest.approx(2.0, rel=1e-3)
        assert herz_amplitude(4.0) == pytest.approx(4.0, rel=1e-3)

    def test_residual_bounded(self):
        residuals = [herz_residual(1.0, (3 * k, 4 * k)) for k in (2, 4, 8, 16)]
        assert max(residuals) <= 1.0

    def test_small_frequency(self):
        with pytest.raises(DomainError):
            herz_residual(1.0, (3, 3))


class TestDecay:

    def test_kernel(self):
        K = DecayKernel(0.5)
        assert K(np.zeros(3)) == 1.0
        assert K(np.array([3.0, 4.0])) == pytest.approx(6 ** -0.5)
        with pytest.raises(DomainError):
            DecayKernel(-1.0)

    def test_circle_slope(self):
        fit = decay_fit(GraphSurface.circle(), [(1, 0), (3, 4), (5, 12)], [8, 16, 32, 64])
        assert fit.slope == pytest.approx(-0.5, abs=0.02)

    def test_square_slope(self):
        fit = decay_fit(GraphSurface.square(), [(0, 1), (0, -1), (1, 3)], [8, 16, 32, 64])
        assert fit.slope == pytest.approx(-0.5, abs=0.2)

    def test_needs_enough_samples(self):
        with pytest.raises(DomainError):
            decay_fit(GraphSurface.circle(), [(1, 0), (0, 1), (1, 1)], [8, 16, 32])
        with pytest.raises(DomainError):
            decay_fit(GraphSurface.circle(), [(1, 0), (0, 1)], [8, 16, 32, 64])
        with pytest.raises(DomainError):
            decay_fit(GraphSurface.circle(), [(1, 0), (0, 0), (1, 1)], [8, 16, 32, 64])


class TestMisc:

    def test_containment(self):
        sup, ok = fit_containment(GraphSurface.general(3), 8)
        assert sup == pytest.approx(2 / 3 * 8 ** -3)
        assert ok
        assert fit_containment(GraphSurface.square(), 8)[1]
        with pytest.raises(DomainError):
            fit_containment(GraphSurface.circle(), 8)

    def test_bilinear_single_point(self):
        value, normalized = sphere_bilinear_form([(1, 0)], [1.0])
        assert value == pytest.approx(2 * math.pi)
        assert normalized == pytest.approx(2 * math.pi)

    def test_bilinear_positive(self):
        shell = circle_lattice(65)
        rng = np.random.default_rng(5)
        a = np.exp(2j * np.pi * rng.random(shell.size))
        value, _ = sphere_bilinear_form(shell, a)
        assert value >= -1e-9

    def test_from_name(self):
        assert GraphSurface.from_name("circle:2.5").radius == 2.5
        assert GraphSurface.from_name("bilinear-d3").d == 3
        assert GraphSurface.from_name("general", d=6).d == 6
        with pytest.raises(DomainError):
            GraphSurface.from_name("general")
        with pytest.raises(DomainError):
            GraphSurface.from_name("torus")

    def test_custom_surface(self):
        s = GraphSurface.custom(2, lambda x: x[:, 0] ** 3, lambda x: 3 * x[:, :1] ** 2)
        assert s.grad_bound[0] == pytest.approx(4.5)
        assert surface_mass(s) == pytest.approx(integrate.quad(lambda t: math.sqrt(1 + 9 * t ** 4), 0, 1)[0], rel=1e-10)

    def test_table_thread_independent(self, pool, pool4, tmp_path):
        xis = [(k, k * k) for k in range(-3, 4)]
        assert fourier_table(GraphSurface.square(), xis, pool) == fourier_table(GraphSurface.square(), xis, pool4)
        path = tmp_path / "sigma.csv"
        assert write_fourier_table(str(path), GraphSurface.square(), xis) == len(xis)
        header, rows = read_rows(str(path))
        assert header == ["xi_1", "xi_2", "re", "im", "abs"]
        assert len(rows) == len(xis)
