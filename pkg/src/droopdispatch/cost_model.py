"""Generator cost functions C(P) = aP^3 + bP^2 + cP + d*exp(eP)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


class DomainError(ValueError):
    """A power value lies outside a generator's operating range."""


# slack for powers produced by float arithmetic right at a bound
_BOUND_SLACK = 1e-9


@dataclass(frozen=True)
class DgSpec:
    """One distributed generator: full-value cost coefficients and capacity (kW)."""

    id: int
    a: float
    b: float
    c: float
    d: float
    e: float
    p_max: float

    def __post_init__(self):
        for name in ("a", "b", "c", "d", "e", "p_max"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"DG {self.id}: coefficient {name}={value!r} is not finite")
        if self.p_max <= 0:
            raise ValueError(f"DG {self.id}: p_max must be positive, got {self.p_max}")

    @property
    def coefficients(self) -> tuple[float, float, float, float, float]:
        return (self.a, self.b, self.c, self.d, self.e)

    def cost_array(self, p: np.ndarray) -> np.ndarray:
        """Vectorised cost without range checks (callers guarantee the domain)."""
        p = np.asarray(p, dtype=float)
        return ((self.a * p + self.b) * p + self.c) * p + self.d * np.exp(self.e * p)


@dataclass(frozen=True)
class Fleet:
    dgs: tuple[DgSpec, ...]
    p_l_max: float

    def __post_init__(self):
        object.__setattr__(self, "dgs", tuple(self.dgs))
        if not self.dgs:
            raise ValueError("a fleet needs at least one DG")
        ids = [dg.id for dg in self.dgs]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate DG ids: {ids}")
        if not 0 < self.p_l_max <= self.capacity + _BOUND_SLACK:
            raise ValueError(
                f"p_l_max={self.p_l_max} must lie in (0, total capacity {self.capacity}]"
            )

    @property
    def n(self) -> int:
        return len(self.dgs)

    @property
    def capacity(self) -> float:
        return math.fsum(dg.p_max for dg in self.dgs)

    @property
    def p_max(self) -> np.ndarray:
        return np.array([dg.p_max for dg in self.dgs])

    @property
    def ids(self) -> list[int]:
        return [dg.id for dg in self.dgs]


def _check_range(spec: DgSpec, p: float) -> float:
    if not (-_BOUND_SLACK <= p <= spec.p_max + _BOUND_SLACK):
        raise DomainError(f"DG {spec.id}: power {p!r} kW outside [0, {spec.p_max}]")
    return min(max(p, 0.0), spec.p_max)


def eval_cost(spec: DgSpec, p: float) -> float:
    p = _check_range(spec, float(p))
    return ((spec.a * p + spec.b) * p + spec.c) * p + spec.d * math.exp(spec.e * p)


def eval_marginal_cost(spec: DgSpec, p: float) -> float:
    """Analytic derivative 3aP^2 + 2bP + c + d*e*exp(eP)."""
    p = _check_range(spec, float(p))
    return (3.0 * spec.a * p + 2.0 * spec.b) * p + spec.c + spec.d * spec.e * math.exp(spec.e * p)


def total_cost(fleet: Fleet, powers: Sequence[float]) -> float:
    if len(powers) != fleet.n:
        raise DomainError(f"expected {fleet.n} powers, got {len(powers)}")
    return math.fsum(eval_cost(dg, p) for dg, p in zip(fleet.dgs, powers))
