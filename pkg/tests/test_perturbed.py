"""Tests for the ε-perturbed problem: spectrum, eigenfunctions, resolvent."""

import math

import numpy as np
import pytest
from scipy.optimize import brentq

from stringlab.core.errors import DomainError, NearSingularError
from stringlab.engine.fem_oracle import dirichlet_model_characteristic
from stringlab.models.grid import GridFunction, LimitVector


def _forcing(perturbed_service, spec, eps) -> LimitVector:
    ga, g0, gb = perturbed_service.grids(spec, eps)
    return LimitVector(
        GridFunction(ga, (1.0 + ga).astype(complex), np.ones_like(ga, dtype=complex)),
        GridFunction(g0, np.cos(0.5 * math.pi * g0).astype(complex), -0.5 * math.pi * np.sin(0.5 * math.pi * g0) + 0j),
        GridFunction(gb, np.exp(-gb).astype(complex), -np.exp(-gb).astype(complex)),
        tag="forcing",
    )


class TestPerturbedEigenvalues:
    """Eigenvalues of −y'' + q y = λ r_ε y."""

    @pytest.mark.parametrize("eps", [0.2, 0.05, 0.0125])
    def test_full_neumann_ground_state_is_zero(self, perturbed_service, neumann_spec, eps):
        """Constants solve the full-Neumann problem for every ε."""
        pairs = perturbed_service.perturbed_eigenvalues(neumann_spec, eps, 3)
        assert abs(pairs[0].lambda_eps) < 1e-9
        assert pairs[1].lambda_eps > 0.1

    def test_dirichlet_model_characteristic_roots(self, perturbed_service, dirichlet_spec):
        """Each computed eigenvalue is a sign change of the closed-form characteristic function."""
        eps = 0.1
        for pair in perturbed_service.perturbed_eigenvalues(dirichlet_spec, eps, 6):
            lam = pair.lambda_eps
            h = 1e-6 * max(1.0, lam)
            left = dirichlet_model_characteristic(lam - h, eps)
            right = dirichlet_model_characteristic(lam + h, eps)
            assert left * right < 0
            exact = brentq(dirichlet_model_characteristic, lam - h, lam + h, args=(eps,), xtol=1e-14)
            assert lam == pytest.approx(exact, rel=1e-8)

    @pytest.mark.parametrize("eps", [0.2, 0.1, 0.05])
    def test_agrees_with_finite_element_oracle(self, perturbed_service, robin_spec, eps):
        """The first five eigenvalues match the extrapolated FEM oracle."""
        lams = [p.lambda_eps for p in perturbed_service.perturbed_eigenvalues(robin_spec, eps, 5)]
        oracle = perturbed_service.oracle_eigenvalues(robin_spec, eps, 5, elements=2000)
        np.testing.assert_allclose(lams, oracle, rtol=1e-4, atol=1e-6)

    def test_count_below_matches_located_values(self, perturbed_service, dirichlet_spec):
        """The counting function agrees with the located eigenvalues."""
        eps = 0.05
        lams = [p.lambda_eps for p in perturbed_service.perturbed_eigenvalues(dirichlet_spec, eps, 5)]
        for n, lam in enumerate(lams):
            assert perturbed_service.perturbed_count_below(dirichlet_spec, eps, lam - 1e-6) == n
        below = perturbed_service.eigenvalues_below(dirichlet_spec, eps, lams[3] + 1e-6)
        np.testing.assert_allclose(below, lams[:4], rtol=1e-9)

    def test_characteristic_function_vanishes_at_eigenvalues(self, perturbed_service, jordan_spec):
        """The transfer-matrix mismatch changes sign across every located eigenvalue."""
        eps = 0.1
        for pair in perturbed_service.perturbed_eigenvalues(jordan_spec, eps, 4):
            lam = pair.lambda_eps
            h = 1e-5 * max(1.0, abs(lam))
            left = perturbed_service.characteristic_function(jordan_spec, eps, lam - h)
            right = perturbed_service.characteristic_function(jordan_spec, eps, lam + h)
            assert left * right < 0

    @pytest.mark.parametrize("eps", [0.0, 0.6, 1e-8])
    def test_eps_range(self, perturbed_service, dirichlet_spec, eps):
        """ε must lie in [min_eps, min(−a, b)/2)."""
        with pytest.raises(DomainError):
            perturbed_service.perturbed_eigenvalues(dirichlet_spec, eps, 2)

    def test_transfer_matrices_are_unimodular(self, perturbed_service, jordan_spec):
        """No first-order term, so every piece's transfer matrix has determinant one."""
        mats = perturbed_service.transfer_matrices(jordan_spec, 0.1, 7.3)
        assert [m.label for m in mats] == ["outer_left", "inner", "outer_right"]
        for m in mats:
            assert m.det == pytest.approx(1.0, abs=1e-8)


class TestPerturbedEigenfunctions:
    """Three-piece eigenfunctions."""

    def test_coupling_and_norms(self, perturbed_service, jordan_spec):
        """Pieces glue continuously, composite norm is one and the mass norm is larger."""
        for pair in perturbed_service.perturbed_eigenvalues(jordan_spec, 0.05, 4):
            assert pair.max_coupling_residual < 1e-6
            assert pair.composite_norm(jordan_spec) == pytest.approx(1.0, rel=1e-6)
            assert pair.mass_norm(jordan_spec) >= pair.composite_norm(jordan_spec)

    def test_oscillation_count(self, perturbed_service, dirichlet_spec):
        """The n-th eigenfunction has n interior sign changes."""
        x = np.linspace(-0.999, 0.999, 4001)
        for pair in perturbed_service.perturbed_eigenvalues(dirichlet_spec, 0.1, 5):
            y = pair.evaluate(x)
            y = y[np.abs(y) > 1e-8 * np.max(np.abs(y))]
            assert np.count_nonzero(np.diff(np.sign(y))) == pair.index


class TestPerturbedResolvent:
    """(𝒜_ε − ζ)⁻¹ in the coordinates of ℒ."""

    def test_residuals(self, perturbed_service, jordan_spec, settings):
        """The solution satisfies the equations, end conditions and couplings."""
        eps = 0.1
        F = _forcing(perturbed_service, jordan_spec, eps)
        Y = perturbed_service.apply_perturbed_resolvent(jordan_spec, eps, 1j, F)
        residuals = perturbed_service.resolvent_residuals(jordan_spec, eps, 1j, F, Y)
        scale = max(Y.u.max_abs(), Y.w.max_abs(), Y.v.max_abs())
        for name, value in residuals.items():
            tol = settings.resid_tol if name.startswith("eq_") else 1e-6 * scale
            assert value <= tol, name

    def test_zero_forcing(self, perturbed_service, dirichlet_spec):
        """The resolvent of zero is zero without any integration."""
        ga, g0, gb = perturbed_service.grids(dirichlet_spec, 0.1)
        F = LimitVector(GridFunction.zeros(ga), GridFunction.zeros(g0), GridFunction.zeros(gb))
        Y = perturbed_service.apply_perturbed_resolvent(dirichlet_spec, 0.1, 1j, F)
        assert Y.u.max_abs() == Y.w.max_abs() == Y.v.max_abs() == 0.0

    def test_zeta_on_eigenvalue(self, perturbed_service, neumann_spec):
        """ζ = 0 is an eigenvalue of the full-Neumann problem."""
        F = _forcing(perturbed_service, neumann_spec, 0.1)
        with pytest.raises(NearSingularError):
            perturbed_service.apply_perturbed_resolvent(neumann_spec, 0.1, 0.0, F)
