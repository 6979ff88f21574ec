from __future__ import annotations

import math
import re
from typing import Annotated, Literal

from pydantic import BeforeValidator, Field, model_validator

from stringlab.models.coeffs import (
    CoefficientFunction,
    ConstantCoefficient,
    GridSampled,
    PiecewisePolynomial,
    PolynomialPiece,
    ProblemSpec,
)
from stringlab.schemas.common import SchemaModel

_ANGLE = re.compile(
    r"^\s*(?P<sign>[-+]?)\s*(?:(?P<num>\d+(?:\.\d*)?)\s*\*\s*)?pi\s*(?:/\s*(?P<den>\d+(?:\.\d*)?))?\s*$"
)


def parse_angle(value: object) -> float:
    """Accept plain numbers or strings such as ``"pi/2"`` and ``"-3*pi/4"``."""
    if isinstance(value, bool):
        raise ValueError("angle must be a number or a multiple of pi")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        m = _ANGLE.match(value)
        if m:
            num = float(m["num"]) if m["num"] else 1.0
            den = float(m["den"]) if m["den"] else 1.0
            if den == 0.0:
                raise ValueError("angle denominator must be nonzero")
            sign = -1.0 if m["sign"] == "-" else 1.0
            return sign * num * math.pi / den
        try:
            return float(value)
        except ValueError:
            pass
    raise ValueError(f"cannot read {value!r} as an angle (use a number or e.g. 'pi/2')")


Angle = Annotated[float, BeforeValidator(parse_angle)]


class PieceSchema(SchemaModel):
    interval: tuple[float, float]
    coefficients: list[float] | None = None
    samples: list[tuple[float, float]] | None = None

    @model_validator(mode="after")
    def check_payload(self) -> "PieceSchema":
        lo, hi = self.interval
        if not hi > lo:
            raise ValueError(f"interval [{lo}, {hi}] is empty")
        if (self.coefficients is None) == (self.samples is None):
            raise ValueError("a piece needs exactly one of 'coefficients' or 'samples'")
        if self.coefficients is not None and not self.coefficients:
            raise ValueError("'coefficients' must not be empty")
        if self.samples is not None:
            xs = [x for x, _ in self.samples]
            if len(xs) < 2:
                raise ValueError("'samples' needs at least two points")
            if any(b <= a for a, b in zip(xs, xs[1:])):
                raise ValueError("sample abscissae must be strictly increasing")
            if xs[0] > lo + 1e-12 or xs[-1] < hi - 1e-12:
                raise ValueError("samples must span the piece interval")
        return self


class CoefficientSchema(SchemaModel):
    kind: Literal["constant", "piecewise-polynomial", "grid-sampled"]
    value: float | None = None
    pieces: list[PieceSchema] | None = None

    @model_validator(mode="after")
    def check_kind(self) -> "CoefficientSchema":
        if self.kind == "constant":
            if self.value is None or self.pieces is not None:
                raise ValueError("a constant coefficient needs 'value' and no 'pieces'")
        else:
            if not self.pieces or self.value is not None:
                raise ValueError(f"a {self.kind} coefficient needs 'pieces' and no 'value'")
            wanted = "coefficients" if self.kind == "piecewise-polynomial" else "samples"
            for piece in self.pieces:
                if getattr(piece, wanted) is None:
                    raise ValueError(f"every piece of a {self.kind} coefficient needs '{wanted}'")
        return self

    def to_model(self) -> CoefficientFunction:
        if self.kind == "constant":
            return ConstantCoefficient(float(self.value))
        if self.kind == "piecewise-polynomial":
            return PiecewisePolynomial(
                tuple(
                    PolynomialPiece(p.interval[0], p.interval[1], tuple(p.coefficients))
                    for p in self.pieces
                )
            )
        points: dict[float, float] = {}
        for piece in sorted(self.pieces, key=lambda p: p.interval[0]):
            for x, y in piece.samples:
                points.setdefault(float(x), float(y))
        xs = sorted(points)
        return GridSampled(tuple(xs), tuple(points[x] for x in xs))


class ProblemSpecSchema(SchemaModel):
    name: str = "unnamed"
    description: str | None = None
    a: float
    b: float
    alpha: Angle = Field(description="left Robin angle")
    beta: Angle = Field(description="right Robin angle")
    q: CoefficientSchema
    r: CoefficientSchema
    h: CoefficientSchema

    def to_model(self) -> ProblemSpec:
        return ProblemSpec(
            a=self.a,
            b=self.b,
            alpha=self.alpha,
            beta=self.beta,
            q=self.q.to_model(),
            r=self.r.to_model(),
            h=self.h.to_model(),
            name=self.name,
        )
