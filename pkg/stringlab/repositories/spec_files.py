from __future__ import annotations

from pathlib import Path
from typing import Any

import orjson
from pydantic import ValidationError

from stringlab.core.config import Settings, settings as default_settings
from stringlab.core.errors import SpecParseError, StringLabError
from stringlab.core.log import get_logger
from stringlab.models.coeffs import ProblemSpec, validate_spec
from stringlab.schemas.problem import ProblemSpecSchema

logger = get_logger(__name__)


def _field_path(loc: tuple[Any, ...]) -> str:
    parts: list[str] = []
    for item in loc:
        if isinstance(item, int):
            parts.append(f"[{item}]")
        else:
            parts.append(("." if parts else "") + str(item))
    return "".join(parts)


def _field_line(text: str, loc: tuple[Any, ...]) -> int | None:
    """Line where the field named by ``loc`` starts, following its keys through the document."""
    offset = 0
    found = False
    for item in loc:
        if isinstance(item, int):
            continue
        at = text.find(f'"{item}"', offset)
        if at < 0:
            break
        offset, found = at, True
    return text.count("\n", 0, offset) + 1 if found else None


class SpecRepository:
    """Reads problem spec documents (JSON) into validated ProblemSpec objects."""

    def __init__(self, settings: Settings | None = None):
        self.settings = settings or default_settings

    def parse(self, text: str, path: str | None = None) -> ProblemSpec:
        try:
            raw = orjson.loads(text)
        except orjson.JSONDecodeError as exc:
            raise SpecParseError(
                f"invalid JSON: {exc.msg}", path=path, line=exc.lineno, column=exc.colno
            ) from exc
        if not isinstance(raw, dict):
            raise SpecParseError("a spec document must be a JSON object", path=path, line=1, column=1)
        try:
            schema = ProblemSpecSchema.model_validate(raw)
        except ValidationError as exc:
            first = exc.errors()[0]
            loc = tuple(first["loc"])
            raise SpecParseError(
                first["msg"], path=path, line=_field_line(text, loc), field=_field_path(loc) or None
            ) from exc
        try:
            spec = schema.to_model()
        except (StringLabError, ValueError) as exc:
            raise SpecParseError(str(exc), path=path) from exc
        report = validate_spec(spec, self.settings)
        if not report.valid:
            raise SpecParseError("; ".join(report.messages()), path=path)
        logger.debug("spec.loaded", name=spec.name, path=path)
        return spec

    def load(self, path: str | Path) -> ProblemSpec:
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise SpecParseError(f"cannot read spec file: {exc.strerror}", path=str(path)) from exc
        return self.parse(text, str(path))
