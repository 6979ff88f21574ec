from __future__ import annotations

import enum
from dataclasses import dataclass, field

from stringlab.engine.slsolve import Eigenpair
from stringlab.models.grid import LimitVector


class EigenKind(str, enum.Enum):
    SIMPLE = "simple"
    DOUBLE_DIAGONAL = "double_diagonal"
    DOUBLE_JORDAN = "double_jordan"
    TRIPLE_JORDAN = "triple_jordan"


JORDAN_KINDS = (EigenKind.DOUBLE_JORDAN, EigenKind.TRIPLE_JORDAN)


@dataclass(frozen=True)
class LimitEigendata:
    lam: float
    in_Aa: bool
    in_B: bool
    in_Ab: bool
    kind: EigenKind
    first_index: int = 0
    u_pair: Eigenpair | None = None
    w_pair: Eigenpair | None = None
    v_pair: Eigenpair | None = None
    basis: tuple[LimitVector, ...] = field(default=(), compare=False)

    @property
    def alg_mult(self) -> int:
        return int(self.in_Aa) + int(self.in_B) + int(self.in_Ab)

    @property
    def flags(self) -> tuple[bool, bool, bool]:
        return self.in_Aa, self.in_B, self.in_Ab

    @property
    def is_jordan(self) -> bool:
        return self.kind in JORDAN_KINDS

    @property
    def indices(self) -> range:
        return range(self.first_index, self.first_index + self.alg_mult)


@dataclass(frozen=True)
class RootVectorData:
    """Jordan-chain data: (𝒜 − λ) root = c1·U + c2·V (c1 = 1, c2 = 0 in the double case)."""

    c0: float
    root: LimitVector
    target: LimitVector
    residual: float
    obstruction: float
    c1: float = 1.0
    c2: float = 0.0


@dataclass(frozen=True)
class ThetaFactor:
    theta: float
    norm_a: float
    norm_b: float
    limit_norm: float
