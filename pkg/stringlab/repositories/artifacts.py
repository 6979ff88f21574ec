from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Any, Iterable, Sequence

import orjson

from stringlab.core.errors import NumericalFailure
from stringlab.core.log import get_logger
from stringlab.models.grid import LimitVector
from stringlab.models.limit import LimitEigendata
from stringlab.models.perturbed import PerturbedEigenpair
from stringlab.schemas.common import SchemaModel
from stringlab.schemas.report import LimitSpectrumRow, RunSummary, SpectrumRow

logger = get_logger(__name__)

GRID_HEADER = ("piece", "x", "re_value", "im_value", "re_deriv", "im_deriv")


class ArtifactRepository:
    """Writes CSV tables and the run summary into one output directory."""

    def __init__(self, out_dir: str | Path, digits: int = 17):
        self.out_dir = Path(out_dir)
        self.digits = digits
        self.written: list[Path] = []

    def ensure(self) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        return self.out_dir

    def format_cell(self, value: Any) -> str:
        if value is None:
            return ""
        if isinstance(value, bool):
            return "true" if value else "false"
        if isinstance(value, float):
            if not math.isfinite(value):
                raise NumericalFailure(f"refusing to write non-finite value {value!r}")
            return f"{value:.{self.digits}g}"
        return str(value)

    def write_csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
        path = self.ensure() / f"{name}.csv"
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([self.format_cell(cell) for cell in row])
        self.written.append(path)
        logger.debug("artifact.csv", path=str(path))
        return path

    def write_models(self, name: str, rows: Sequence[SchemaModel], model: type[SchemaModel]) -> Path:
        """One CSV row per model, columns in field order (serialization aliases applied)."""
        header = [f.serialization_alias or key for key, f in model.model_fields.items()]
        keys = list(model.model_fields)
        return self.write_csv(name, header, ([getattr(row, key) for key in keys] for row in rows))

    def write_spectrum(self, name: str, lambdas_by_eps: dict[float, Sequence[float]]) -> Path:
        rows = [
            SpectrumRow(eps=eps, index=n, lambda_eps=lam)
            for eps, lams in lambdas_by_eps.items()
            for n, lam in enumerate(lams)
        ]
        return self.write_models(name, rows, SpectrumRow)

    def write_limit_spectrum(self, name: str, data: Sequence[LimitEigendata]) -> Path:
        rows = [
            LimitSpectrumRow(
                n=d.first_index + 1,
                lam=d.lam,
                mult=d.alg_mult,
                in_Aa=d.in_Aa,
                in_B=d.in_B,
                in_Ab=d.in_Ab,
                kind=d.kind.value,
            )
            for d in data
        ]
        return self.write_models(name, rows, LimitSpectrumRow)

    def write_eigenfunction(self, name: str, pair: PerturbedEigenpair) -> Path:
        rows = [(label, *row) for label, gf in pair.pieces() for row in gf.rows()]
        return self.write_csv(name, GRID_HEADER, rows)

    def write_limit_vector(self, name: str, vector: LimitVector) -> Path:
        rows = [(label, *row) for label, gf in vector.pieces() for row in gf.rows()]
        return self.write_csv(name, GRID_HEADER, rows)

    def write_summary(self, summary: RunSummary) -> Path:
        path = self.ensure() / "summary.json"
        payload = summary.model_dump(mode="json", by_alias=True)
        path.write_bytes(orjson.dumps(payload, option=orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS))
        self.written.append(path)
        return path
