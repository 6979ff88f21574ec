"""Closed-form checks for the regular Sturm–Liouville solver."""

import cmath
import math

import numpy as np
import pytest
from scipy.optimize import brentq

from stringlab.core.errors import DomainError, NearSingularError
from stringlab.engine.fem_oracle import sl_oracle_eigenvalues
from stringlab.engine.quadrature import composite_gauss, panel_edges
from stringlab.engine.slsolve import (
    DIRICHLET,
    NEUMANN,
    DirichletValue,
    Robin,
    SLProblem,
    count_below,
    eigenfunction_at,
    eigenvalues,
    integrated_residual,
    solve_boundary,
    solve_nonhomogeneous,
)
from stringlab.models.coeffs import constant, piecewise, polynomial
from stringlab.models.grid import GridFunction

ZERO, ONE = constant(0.0), constant(1.0)


@pytest.fixture
def unit_dirichlet():
    return SLProblem(0.0, 1.0, ZERO, ONE, DIRICHLET, DIRICHLET, label="unit")


class TestQuadrature:
    """Composite Gauss–Legendre rules."""

    def test_panels_split_at_cuts(self):
        """Cuts outside the interval are ignored, inner ones become panel edges."""
        np.testing.assert_allclose(panel_edges(-1.0, 1.0, [-2.0, 0.0, 0.5, 1.0]), [-1.0, 0.0, 0.5, 1.0])

    def test_integrates_piecewise_smooth_function(self):
        """|x| is integrated exactly once 0 is a cut."""
        x, w = composite_gauss(-1.0, 2.0, 32, [0.0])
        assert np.sum(w * np.abs(x)) == pytest.approx(2.5, rel=1e-13)

    def test_minimum_nodes_per_panel(self):
        """Short panels still get min_panel_nodes points."""
        x, _ = composite_gauss(0.0, 1.0, 16, [1e-3], min_panel_nodes=8)
        assert np.sum(x < 1e-3) == 8


class TestEigenvalues:
    """Eigenvalues against closed forms."""

    def test_dirichlet_unit_interval(self, unit_dirichlet, settings):
        """−y'' = λy on (0, 1), Dirichlet: λ_n = (n+1)²π²."""
        lams = [p.lam for p in eigenvalues(unit_dirichlet, 6, settings)]
        np.testing.assert_allclose(lams, [(n * math.pi) ** 2 for n in range(1, 7)], rtol=1e-8)

    def test_neumann_has_zero_mode(self, settings):
        """Neumann ends on (−1, 1): λ_n = (nπ/2)², starting at 0."""
        p = SLProblem(-1.0, 1.0, ZERO, ONE, NEUMANN, NEUMANN)
        lams = [pair.lam for pair in eigenvalues(p, 5, settings)]
        assert abs(lams[0]) < 1e-9
        np.testing.assert_allclose(lams[1:], [(n * math.pi / 2) ** 2 for n in range(1, 5)], rtol=1e-8)

    def test_robin_end_gives_negative_eigenvalue(self, settings):
        """Neumann at 0, y cos β + y' sin β = 0 at 1 with β = 3π/4: λ₀ = −μ², μ tanh μ = 1."""
        p = SLProblem(0.0, 1.0, ZERO, ONE, NEUMANN, Robin.from_angle(3 * math.pi / 4))
        mu = brentq(lambda m: m * math.tanh(m) - 1.0, 0.5, 2.0, xtol=1e-14)
        lam0 = eigenvalues(p, 1, settings)[0].lam
        assert lam0 == pytest.approx(-(mu**2), rel=1e-8)

    def test_weight_scales_spectrum(self, unit_dirichlet, settings):
        """A constant weight 4 divides every eigenvalue by 4."""
        heavy = SLProblem(0.0, 1.0, ZERO, constant(4.0))
        base = [p.lam for p in eigenvalues(unit_dirichlet, 4, settings)]
        scaled = [p.lam for p in eigenvalues(heavy, 4, settings)]
        np.testing.assert_allclose(scaled, np.asarray(base) / 4.0, rtol=1e-8)

    def test_matches_finite_element_oracle(self, settings):
        """Piecewise potential: shooting and the extrapolated FEM oracle agree."""
        q = piecewise([(0.0, 0.4, (2.0,)), (0.4, 1.0, (-1.0, 3.0))])
        p = SLProblem(0.0, 1.0, q, ONE, Robin.from_angle(math.pi / 3), DIRICHLET)
        lams = [pair.lam for pair in eigenvalues(p, 5, settings)]
        oracle = sl_oracle_eigenvalues(p, 5, elements=2000)
        np.testing.assert_allclose(lams, oracle, rtol=1e-5)

    def test_n_max_must_be_positive(self, unit_dirichlet, settings):
        """Asking for no eigenvalues is a domain error."""
        with pytest.raises(DomainError):
            eigenvalues(unit_dirichlet, 0, settings)

    def test_count_below(self, unit_dirichlet, settings):
        """Three eigenvalues π², 4π², 9π² lie below 10π²."""
        assert count_below(unit_dirichlet, 10 * math.pi**2, settings) == 3
        assert count_below(unit_dirichlet, 0.5, settings) == 0

    def test_random_constant_coefficients(self, settings):
        """q = c, w = d on (0, L) with Dirichlet ends: λ_n = ((nπ/L)² + c)/d and nothing is skipped."""
        rng = np.random.default_rng(7)
        for _ in range(5):
            c, d, length = rng.uniform(-3.0, 3.0), rng.uniform(0.5, 4.0), rng.uniform(0.5, 2.0)
            p = SLProblem(0.0, length, constant(c), constant(d))
            exact = [((n * math.pi / length) ** 2 + c) / d for n in range(1, 7)]
            lams = [pair.lam for pair in eigenvalues(p, 6, settings)]
            np.testing.assert_allclose(lams, exact, rtol=1e-8)
            gap = 0.5 * (exact[-1] - exact[-2])
            assert count_below(p, exact[-1] + gap, settings) == 6


class TestEigenfunctions:
    """Normalization, sign convention and point evaluation."""

    def test_first_eigenfunction(self, unit_dirichlet, settings):
        """√2 sin(πx): value √2 at the midpoint, slope √2π at 0."""
        value, _ = eigenfunction_at(unit_dirichlet, math.pi**2, 0.5, settings)
        _, slope = eigenfunction_at(unit_dirichlet, math.pi**2, 0.0, settings)
        assert value == pytest.approx(math.sqrt(2), rel=1e-6)
        assert slope == pytest.approx(math.sqrt(2) * math.pi, rel=1e-6)

    def test_unit_weighted_norm(self, settings):
        """Eigenfunctions have unit L₂(w) norm."""
        p = SLProblem(-1.0, 0.5, ZERO, constant(2.0), DIRICHLET, NEUMANN)
        for pair in eigenvalues(p, 3, settings):
            assert pair.efun.norm(constant(2.0)) == pytest.approx(1.0, rel=1e-8)

    def test_not_an_eigenvalue(self, unit_dirichlet, settings):
        """eigenfunction_at rejects λ away from the spectrum and x outside the interval."""
        with pytest.raises(DomainError):
            eigenfunction_at(unit_dirichlet, 12.0, 0.5, settings)
        with pytest.raises(DomainError):
            eigenfunction_at(unit_dirichlet, math.pi**2, 1.5, settings)


class TestBoundaryAndForcedProblems:
    """Trace problems and the nonhomogeneous solve."""

    def test_boundary_solution_at_zero(self, settings):
        """ζ = 0, Dirichlet at 0 and trace 2 at 1: y = 2x."""
        p = SLProblem(0.0, 1.0, ZERO, ONE, DIRICHLET, DirichletValue(2.0))
        sol = solve_boundary(p, 0.0, settings=settings).sol
        np.testing.assert_allclose(np.real(sol.value), 2 * sol.x, atol=1e-9)

    def test_boundary_solution_complex_zeta(self, settings):
        """Left trace end: y(0) = 1 and a Neumann end at 1 give cosh-type solutions for ζ = i."""
        p = SLProblem(0.0, 1.0, ZERO, ONE, DirichletValue(1.0), NEUMANN)
        sol = solve_boundary(p, 1j, settings=settings).sol
        k = cmath.sqrt(1j)
        exact = np.cos(k * (sol.x - 1.0)) / cmath.cos(k)
        np.testing.assert_allclose(sol.value, exact, atol=1e-8)

    def test_boundary_needs_one_trace_end(self, unit_dirichlet, settings):
        """Two Robin ends leave nothing to prescribe."""
        with pytest.raises(DomainError):
            solve_boundary(unit_dirichlet, 1j, settings=settings)

    def test_nonhomogeneous_constant_forcing(self, unit_dirichlet, settings):
        """−y'' − ζy = 1 with Dirichlet ends: y = (cos(k(x − ½))/cos(k/2) − 1)/ζ."""
        zeta = 1j
        x = np.linspace(0.0, 1.0, 65)
        f = GridFunction(x, np.ones_like(x, dtype=complex), np.zeros_like(x, dtype=complex))
        sol = solve_nonhomogeneous(unit_dirichlet, zeta, f, settings)
        k = cmath.sqrt(zeta)
        exact = (np.cos(k * (sol.x - 0.5)) / cmath.cos(k / 2) - 1.0) / zeta
        np.testing.assert_allclose(sol.value, exact, atol=1e-8)
        assert integrated_residual(ZERO, ONE, zeta, sol, np.ones(sol.x.shape)) < settings.resid_tol

    def test_zero_forcing_gives_zero(self, unit_dirichlet, settings):
        """The resolvent of the zero function is zero."""
        x = np.linspace(0.0, 1.0, 5)
        sol = solve_nonhomogeneous(unit_dirichlet, 1j, GridFunction.zeros(x), settings)
        assert sol.max_abs() == 0.0

    def test_spectral_guard(self, unit_dirichlet, settings):
        """ζ on an eigenvalue is refused, with the eigenvalue attached to the error."""
        x = np.linspace(0.0, 1.0, 5)
        f = GridFunction(x, np.ones_like(x), np.zeros_like(x))
        with pytest.raises(NearSingularError) as info:
            solve_nonhomogeneous(unit_dirichlet, math.pi**2, f, settings)
        assert info.value.eigenvalue == pytest.approx(math.pi**2, rel=1e-8)

    def test_boundary_solution_is_linear_in_the_trace(self, settings):
        """Trace 2 gives exactly twice the solution for trace 1, also through the override."""
        q = polynomial(0.0, 1.0, (1.0, 3.0))
        once = solve_boundary(SLProblem(0.0, 1.0, q, ONE, DIRICHLET, DirichletValue(1.0)), 1j, settings=settings).sol
        twice = solve_boundary(SLProblem(0.0, 1.0, q, ONE, DIRICHLET, DirichletValue(2.0)), 1j, settings=settings).sol
        np.testing.assert_allclose(twice.value, 2.0 * once.value, rtol=0, atol=1e-12 * once.max_abs())
        override = solve_boundary(
            SLProblem(0.0, 1.0, q, ONE, DIRICHLET, DirichletValue(1.0)), 1j, trace=2.0, settings=settings
        ).sol
        np.testing.assert_allclose(override.value, twice.value, rtol=0, atol=1e-12 * once.max_abs())

    def test_sine_forcing_below_the_spectrum(self, unit_dirichlet, settings):
        """−y'' + y = sin(πx) with Dirichlet ends: y = sin(πx)/(π² + 1)."""
        x = np.linspace(0.0, 1.0, 257)
        f = GridFunction(x, np.sin(math.pi * x), math.pi * np.cos(math.pi * x))
        sol = solve_nonhomogeneous(unit_dirichlet, -1.0, f, settings)
        np.testing.assert_allclose(np.real(sol.value), np.sin(math.pi * sol.x) / (math.pi**2 + 1), atol=1e-8)
        assert np.max(np.abs(np.imag(sol.value))) < 1e-12

    def test_resolvent_is_weighted_self_adjoint(self, settings):
        """⟨R f, g⟩_w = ⟨f, R g⟩_w for real ζ below the spectrum, with a Robin end and variable q and w."""
        q = polynomial(0.0, 1.0, (1.0, 3.0))
        w = polynomial(0.0, 1.0, (2.0, 1.0))
        p = SLProblem(0.0, 1.0, q, w, Robin.from_angle(math.pi / 3), DIRICHLET)
        zeta = -20.0
        x = np.linspace(0.0, 1.0, 513)
        f = GridFunction(x, 1.0 + x**2, 2.0 * x)
        g = GridFunction(x, np.cos(3.0 * x), -3.0 * np.sin(3.0 * x))
        rf = solve_nonhomogeneous(p, zeta, f, settings)
        rg = solve_nonhomogeneous(p, zeta, g, settings)
        left = rf.inner(g, w)
        right = rg.inner(f, w)
        assert abs(left) > 1e-3
        assert left == pytest.approx(right, rel=1e-7)
