"""CSV, JSON and SVG output."""

import math

import orjson
import pytest

from stringlab.core.errors import NumericalFailure
from stringlab.repositories.artifacts import ArtifactRepository
from stringlab.repositories.plots import plot_cluster, plot_convergence
from stringlab.schemas.report import CriterionResult, RunSummary


@pytest.fixture
def repo(tmp_path):
    return ArtifactRepository(tmp_path / "out")


class TestCells:
    def test_full_precision_floats(self, repo):
        assert repo.format_cell(0.1) == "0.10000000000000001"
        assert float(repo.format_cell(math.pi)) == math.pi

    def test_other_values(self, repo):
        assert repo.format_cell(None) == ""
        assert repo.format_cell(True) == "true"
        assert repo.format_cell(False) == "false"
        assert repo.format_cell(3) == "3"
        assert repo.format_cell("Aa") == "Aa"

    @pytest.mark.parametrize("value", [math.nan, math.inf, -math.inf])
    def test_non_finite_is_refused(self, repo, value):
        with pytest.raises(NumericalFailure):
            repo.format_cell(value)


class TestTables:
    def test_spectrum_csv(self, repo):
        path = repo.write_spectrum("spectrum_eps", {0.1: [0.0, 2.5], 0.05: [0.0]})
        lines = path.read_text().splitlines()
        assert lines[0] == "eps,index,lambda_eps"
        assert lines[1:] == ["0.10000000000000001,0,0", "0.10000000000000001,1,2.5", "0.050000000000000003,0,0"]
        assert repo.written == [path]

    def test_limit_spectrum_header_uses_alias(self, repo, limit_service, jordan_spec):
        """The eigenvalue column is called lambda; n is 1-based."""
        path = repo.write_limit_spectrum("spectrum_limit", limit_service.limit_spectrum(jordan_spec, 3))
        header, first = path.read_text().splitlines()[:2]
        assert header == "n,lambda,mult,in_Aa,in_B,in_Ab,kind"
        assert first.startswith("1,")

    def test_limit_vector_rows(self, repo, limit_service, jordan_spec):
        """One row per grid point, tagged with its piece."""
        item = limit_service.limit_spectrum(jordan_spec, 2)[0]
        (vector,) = limit_service.eigenvector_basis(jordan_spec, item)
        lines = repo.write_limit_vector("limit_vector", vector).read_text().splitlines()
        assert lines[0] == "piece,x,re_value,im_value,re_deriv,im_deriv"
        assert {line.split(",")[0] for line in lines[1:]} == {"a", "0", "b"}
        assert len(lines) - 1 == len(vector.u.x) + len(vector.w.x) + len(vector.v.x)


class TestSummary:
    def test_sorted_keys(self, repo):
        summary = RunSummary(
            spec_name="dirichlet-model",
            tasks=["perturbed"],
            seed=0,
            criteria=[CriterionResult(name="x", passed=True)],
        )
        path = repo.write_summary(summary)
        raw = path.read_bytes()
        data = orjson.loads(raw)
        assert list(data) == sorted(data)
        assert data["criteria"][0]["name"] == "x"
        assert data["passed"] is True


class TestPlots:
    def test_svg_is_byte_deterministic(self, tmp_path):
        """Two renderings of the same data give identical files."""
        series = {"n=1": ([0.2, 0.1, 0.05], [0.3, 0.2, 0.14])}
        first = plot_convergence(tmp_path / "a.svg", "gaps", series).read_bytes()
        second = plot_convergence(tmp_path / "b.svg", "gaps", series).read_bytes()
        assert first == second
        assert first.lstrip().startswith(b"<?xml")

    def test_zero_series_is_skipped(self, tmp_path):
        """Exact zeros cannot be drawn on log axes and are dropped."""
        path = plot_convergence(tmp_path / "zero.svg", "gaps", {"n=1": ([0.2, 0.1], [0.0, 0.0])})
        assert path.exists()

    def test_cluster_plot(self, tmp_path):
        path = plot_cluster(tmp_path / "cluster.svg", 9.87, 1.0, {0.1: [9.5, 10.2, 12.0], 0.05: [9.8, 9.9]})
        assert path.stat().st_size > 0
