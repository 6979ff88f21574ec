"""Bundled problem specs with closed-form limit spectra."""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from stringlab.core.errors import ConfigurationError
from stringlab.models.coeffs import ProblemSpec, constant, piecewise

DIRICHLET = 0.0
NEUMANN = math.pi / 2


def full_neumann() -> ProblemSpec:
    """Constant coefficients, Neumann ends; λ₁ = 0 for every ε."""
    return ProblemSpec(-1.0, 1.0, NEUMANN, NEUMANN, constant(0.0), constant(1.0), constant(1.0), "full-neumann")


def dirichlet_model() -> ProblemSpec:
    """Symmetric model: π² and 4π² are triple limit eigenvalues."""
    return ProblemSpec(-1.0, 1.0, DIRICHLET, DIRICHLET, constant(0.0), constant(1.0), constant(1.0), "dirichlet-model")


def asymmetric_dirichlet() -> ProblemSpec:
    """Outer pieces of lengths 1 and 2; π²/4 is a double Jordan eigenvalue from σ(A_b) ∩ σ(B)."""
    return ProblemSpec(
        -1.0, 2.0, DIRICHLET, DIRICHLET, constant(0.0), constant(1.0), constant(1.0), "asymmetric-dirichlet"
    )


def jordan_model() -> ProblemSpec:
    """π²/4 lies in σ(A_a) ∩ σ(B) but not in σ(A_b)."""
    return ProblemSpec(-2.0, 1.0, DIRICHLET, DIRICHLET, constant(0.0), constant(1.0), constant(1.0), "jordan-model")


def robin_variant() -> ProblemSpec:
    """Robin ends that push the lowest eigenvalues below zero."""
    return ProblemSpec(
        -2.0, 2.0, math.pi / 4, 3 * math.pi / 4, constant(0.0), constant(1.0), constant(1.0), "robin-variant"
    )


def random_generic(seed: int = 0) -> ProblemSpec:
    """Seeded piecewise-polynomial coefficients; limit eigenvalues are simple."""
    rng = np.random.default_rng(seed)
    a, b = -1.2, 1.7
    cuts = [a, -0.3, 0.4, b]
    q = piecewise((lo, hi, rng.uniform(-2.0, 2.0, size=3)) for lo, hi in zip(cuts[:-1], cuts[1:]))
    r = piecewise(
        (lo, hi, (1.0 + rng.uniform(0.0, 0.5), 0.0, rng.uniform(0.0, 0.5))) for lo, hi in zip(cuts[:-1], cuts[1:])
    )
    h = piecewise([(-1.0, 1.0, (1.0 + rng.uniform(0.0, 0.5), rng.uniform(-0.4, 0.4), 0.0))])
    alpha = float(rng.uniform(0.1, math.pi - 0.1))
    beta = float(rng.uniform(0.1, math.pi - 0.1))
    return ProblemSpec(a, b, alpha, beta, q, r, h, f"random-generic-{seed}")


_BUILDERS: dict[str, Callable[[], ProblemSpec]] = {
    "full-neumann": full_neumann,
    "dirichlet-model": dirichlet_model,
    "asymmetric-dirichlet": asymmetric_dirichlet,
    "jordan-model": jordan_model,
    "robin-variant": robin_variant,
}


def list_builtin_specs(seed: int = 0) -> dict[str, ProblemSpec]:
    specs = {name: build() for name, build in _BUILDERS.items()}
    specs["random-generic"] = random_generic(seed)
    return specs


def builtin_spec(name: str, seed: int = 0) -> ProblemSpec:
    if name == "random-generic":
        return random_generic(seed)
    if name not in _BUILDERS:
        raise ConfigurationError(f"unknown built-in spec {name!r}; choose from {sorted([*_BUILDERS, 'random-generic'])}")
    return _BUILDERS[name]()
