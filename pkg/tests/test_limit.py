"""Tests for the limit operator: spectrum, classification, Jordan chains and resolvent."""

import itertools
import math

import numpy as np
import pytest

from stringlab.core.errors import ConfigurationError, DomainError, NearSingularError
from stringlab.models.grid import GridFunction, LimitVector
from stringlab.models.limit import EigenKind
from stringlab.services.limit_service import classify, expand_multiplicity

PI2 = math.pi**2


def _find(data, lam):
    (item,) = [d for d in data if d.lam == pytest.approx(lam, rel=1e-8, abs=1e-8)]
    return item


class TestClassify:
    """Kinds from membership flags."""

    @pytest.mark.parametrize("flags", [f for f in itertools.product([False, True], repeat=3) if any(f)])
    def test_every_flag_combination(self, flags):
        """Double with B is Jordan, double without B is diagonal, three flags are triple Jordan."""
        in_Aa, in_B, in_Ab = flags
        count = sum(flags)
        expected = {
            1: EigenKind.SIMPLE,
            2: EigenKind.DOUBLE_JORDAN if in_B else EigenKind.DOUBLE_DIAGONAL,
            3: EigenKind.TRIPLE_JORDAN,
        }[count]
        assert classify(in_Aa, in_B, in_Ab) is expected

    def test_no_flags(self):
        """A value in no sub-spectrum is not an eigenvalue."""
        with pytest.raises(DomainError):
            classify(False, False, False)


class TestLimitSpectrum:
    """σ(A_a) ∪ σ(B) ∪ σ(A_b) with multiplicities."""

    def test_dirichlet_model(self, limit_service, dirichlet_spec):
        """0, π²/4, π² (×3), 9π²/4, 4π² (×3) with triple Jordan blocks at π² and 4π²."""
        data = limit_service.limit_spectrum(dirichlet_spec, 9)
        expected = [0.0, PI2 / 4, PI2, PI2, PI2, 9 * PI2 / 4, 4 * PI2, 4 * PI2, 4 * PI2]
        np.testing.assert_allclose(expand_multiplicity(data)[:9], expected, rtol=1e-8, atol=1e-9)
        assert _find(data, PI2).kind is EigenKind.TRIPLE_JORDAN
        assert _find(data, 4 * PI2).kind is EigenKind.TRIPLE_JORDAN
        assert _find(data, PI2 / 4).kind is EigenKind.SIMPLE
        assert [d.first_index for d in data[:4]] == [0, 1, 2, 5]

    def test_jordan_model(self, limit_service, jordan_spec):
        """On (−2, 1) the value π²/4 lies in σ(A_a) ∩ σ(B) only."""
        data = limit_service.limit_spectrum(jordan_spec, 5)
        item = _find(data, PI2 / 4)
        assert item.flags == (True, True, False)
        assert item.kind is EigenKind.DOUBLE_JORDAN
        assert item.alg_mult == 2

    def test_asymmetric_model(self, limit_service, asymmetric_spec):
        """On (−1, 2) the value π²/4 lies in σ(A_b) ∩ σ(B)."""
        item = _find(limit_service.limit_spectrum(asymmetric_spec, 5), PI2 / 4)
        assert item.flags == (False, True, True)
        assert item.kind is EigenKind.DOUBLE_JORDAN

    def test_sorted_and_distinct(self, limit_service, robin_spec):
        """Distinct values come out strictly increasing."""
        lams = [d.lam for d in limit_service.limit_spectrum(robin_spec, 8)]
        assert all(b > a for a, b in zip(lams, lams[1:]))
        assert lams[0] < 0


class TestEigenvectors:
    """Eigenvector bases of ker(𝒜 − λ)."""

    def test_basis_size_is_geometric_multiplicity(self, limit_service, dirichlet_spec):
        """Triple Jordan: two eigenvectors (u and v), one root vector."""
        item = _find(limit_service.limit_spectrum(dirichlet_spec, 9, with_basis=True), PI2)
        assert [v.tag for v in item.basis] == ["eigenvector", "eigenvector", "root"]

    def test_b_eigenvector_carries_boundary_pieces(self, limit_service, dirichlet_spec):
        """For λ ∈ σ(B) only, the outer parts solve trace problems with the traces of w."""
        item = _find(limit_service.limit_spectrum(dirichlet_spec, 3), PI2 / 4)
        (vec,) = limit_service.eigenvector_basis(dirichlet_spec, item)
        assert vec.norm(dirichlet_spec.r, dirichlet_spec.h) == pytest.approx(1.0, rel=1e-8)
        traces = vec.traces
        assert traces["u(0)"] == pytest.approx(traces["w(-1)"], abs=1e-9)
        assert traces["v(0)"] == pytest.approx(traces["w(1)"], abs=1e-9)

    def test_theta_factor_of_constant_mode(self, limit_service, dirichlet_spec):
        """λ = 0, w = 1/√2: T_a w = (x + 1)/√2, T_b w = (1 − x)/√2, so θ = 3."""
        item = _find(limit_service.limit_spectrum(dirichlet_spec, 2), 0.0)
        theta = limit_service.theta_factor(dirichlet_spec, 0.0, item.w_pair.efun)
        assert theta.theta == pytest.approx(3.0, rel=1e-8)
        assert theta.norm_a == pytest.approx(math.sqrt(1 / 6), rel=1e-8)
        assert theta.norm_b == pytest.approx(math.sqrt(1 / 6), rel=1e-8)


class TestRootVectors:
    """Jordan chains of length two."""

    def test_double_jordan_constant(self, limit_service, jordan_spec, settings):
        """u = −sin(πx/2) on (−2, 0) and w(−1) = 1 give c₀ = 1/(w(−1)u'(0)) = −2/π."""
        item = _find(limit_service.limit_spectrum(jordan_spec, 4), PI2 / 4)
        data = limit_service.root_vector(jordan_spec, item)
        assert abs(data.c0) == pytest.approx(2 / math.pi, abs=1e-6)
        assert data.c0 == pytest.approx(-2 / math.pi, abs=1e-6)
        assert data.residual <= settings.jordan_tol
        assert data.obstruction > 0.5

    def test_second_chain_obstruction_is_the_root_pairing(self, limit_service, jordan_spec):
        """The solvability pairing of the root vector with w_λ equals |c₀|, not the unit normalisation."""
        item = _find(limit_service.limit_spectrum(jordan_spec, 4), PI2 / 4)
        data = limit_service.root_vector(jordan_spec, item)
        assert data.obstruction == pytest.approx(2 / math.pi, rel=1e-6)
        assert data.obstruction != pytest.approx(1.0, abs=0.1)
        w = limit_service._pair(item.w_pair, "B", jordan_spec, item.lam).efun
        assert limit_service.second_chain_obstruction(jordan_spec, data.root.scaled(3.0), w) == pytest.approx(
            3 * data.obstruction, rel=1e-9
        )

    def test_mirrored_double_jordan(self, limit_service, asymmetric_spec, settings):
        """σ(A_b) ∩ σ(B): c₀ = −1/(w(1)v'(0)) with w(1) = −1, v'(0) = π/2."""
        item = _find(limit_service.limit_spectrum(asymmetric_spec, 4), PI2 / 4)
        data = limit_service.root_vector(asymmetric_spec, item)
        assert data.c0 == pytest.approx(2 / math.pi, abs=1e-6)
        assert (data.c1, data.c2) == (0.0, 1.0)
        assert data.residual <= settings.jordan_tol

    def test_triple_jordan(self, limit_service, dirichlet_spec, settings):
        """Symmetric model at π²: c₁ = c₂ = 1 and c₀ = 1/(w(−1)u'(0)) = −1/(√2π)."""
        item = _find(limit_service.limit_spectrum(dirichlet_spec, 5), PI2)
        data = limit_service.root_vector(dirichlet_spec, item)
        assert data.c1 == pytest.approx(1.0, rel=1e-6)
        assert data.c0 == pytest.approx(-1 / (math.sqrt(2) * math.pi), rel=1e-6)
        assert data.residual <= settings.jordan_tol

    def test_root_vector_traces(self, limit_service, jordan_spec):
        """The root vector keeps the coupling u(0) = w(−1), v(0) = w(1)."""
        item = _find(limit_service.limit_spectrum(jordan_spec, 4), PI2 / 4)
        root = limit_service.root_vector(jordan_spec, item).root
        traces = root.traces
        assert traces["u(0)"] == pytest.approx(traces["w(-1)"], abs=1e-8)
        assert traces["v(0)"] == pytest.approx(traces["w(1)"], abs=1e-8)

    def test_simple_eigenvalue_has_no_root_vector(self, limit_service, dirichlet_spec):
        """Only Jordan kinds carry root vectors."""
        item = _find(limit_service.limit_spectrum(dirichlet_spec, 2), 0.0)
        with pytest.raises(ConfigurationError):
            limit_service.root_vector(dirichlet_spec, item)


class TestLimitResolvent:
    """(𝒜 − ζ)⁻¹ by the block formula."""

    def _forcing(self, limit_service, spec):
        ga, g0, gb = limit_service.grids(spec)
        return LimitVector(
            GridFunction(ga, np.sin(ga) + 0j, np.cos(ga) + 0j),
            GridFunction(g0, (1.0 + g0**2) + 0j, 2 * g0 + 0j),
            GridFunction(gb, np.ones_like(gb, dtype=complex), np.zeros_like(gb, dtype=complex)),
            tag="forcing",
        )

    @pytest.mark.parametrize("zeta", [1j, 2.0 - 0.5j])
    def test_residuals(self, limit_service, jordan_spec, settings, zeta):
        """Equations, Neumann ends of w, trace couplings and outer end conditions hold."""
        F = self._forcing(limit_service, jordan_spec)
        Y = limit_service.apply_limit_resolvent(jordan_spec, zeta, F)
        scale = max(Y.u.max_abs(), Y.w.max_abs(), Y.v.max_abs())
        for name, value in limit_service.resolvent_residuals(jordan_spec, zeta, F, Y).items():
            tol = settings.resid_tol if name.startswith("eq_") else 1e-6 * scale
            assert value <= tol, name

    def test_zeta_on_sub_spectrum(self, limit_service, jordan_spec):
        """ζ in σ(B) is refused."""
        F = self._forcing(limit_service, jordan_spec)
        with pytest.raises(NearSingularError):
            limit_service.apply_limit_resolvent(jordan_spec, PI2 / 4, F)
