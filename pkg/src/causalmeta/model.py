"""Domain types shared across the package.

A meta-analysis is an ordered collection of 2x2 tables, one per study::

             event   no event
    treated   n11      n10
    control   n01      n00

Counts are kept as exact integers. Event rates, corrections and contrasts are
computed downstream from these counts.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    DuplicateLabel,
    EmptyArm,
    EmptyDataset,
    NegativeCount,
    NonIntegerCount,
)

# column order of every (..., 4) count array in the package
N11, N10, N01, N00 = 0, 1, 2, 3


class Measure(str, enum.Enum):
    """Contrast between the treated and control event probabilities."""

    RD = "rd"
    RR = "rr"
    LOG_RR = "logrr"
    OR = "or"
    LOG_OR = "logor"

    @classmethod
    def parse(cls, value: "str | Measure") -> "Measure":
        if isinstance(value, Measure):
            return value
        key = str(value).strip().lower().replace("_", "").replace("-", "")
        for m in cls:
            if m.value == key:
                return m
        raise ValueError(f"unknown measure {value!r}")

    @property
    def is_ratio(self) -> bool:
        return self is not Measure.RD

    @property
    def pooling_measure(self) -> "Measure":
        """Measure on which estimates are averaged (log scale for ratios)."""
        if self is Measure.RR:
            return Measure.LOG_RR
        if self is Measure.OR:
            return Measure.LOG_OR
        return self

    @property
    def pooling_scale(self) -> "Scale":
        return Scale.LOG if self.is_ratio else Scale.NATURAL

    @property
    def exponentiate(self) -> bool:
        """Whether pooled values are reported as exp of the pooling-scale value."""
        return self in (Measure.RR, Measure.OR)

    @property
    def null_value(self) -> float:
        return 1.0 if self.exponentiate else 0.0


class Scale(str, enum.Enum):
    NATURAL = "natural"
    LOG = "log"


class Method(str, enum.Enum):
    FIXED = "fixed_effects"
    RANDOM = "random_effects"
    CAUSAL = "causal"


@dataclass(frozen=True)
class ContrastFunction:
    """The map ``(p_treated, p_control) -> effect`` and its gradient.

    Works elementwise on floats or numpy arrays.
    """

    kind: Measure

    def value(self, x, y):
        k = self.kind
        if k is Measure.RD:
            return x - y
        if k is Measure.RR:
            return x / y
        if k is Measure.LOG_RR:
            return np.log(x) - np.log(y)
        if k is Measure.OR:
            return x * (1.0 - y) / ((1.0 - x) * y)
        return np.log(x) - np.log1p(-x) - np.log(y) + np.log1p(-y)

    def gradient(self, x, y):
        """Partial derivatives ``(d/dx, d/dy)``."""
        k = self.kind
        if k is Measure.RD:
            one = x * 0.0 + 1.0
            return one, -one
        if k is Measure.RR:
            return 1.0 / y, -x / (y * y)
        if k is Measure.LOG_RR:
            return 1.0 / x, -1.0 / y
        if k is Measure.OR:
            odds = x * (1.0 - y) / ((1.0 - x) * y)
            return odds / (x * (1.0 - x)), -odds / (y * (1.0 - y))
        return 1.0 / (x * (1.0 - x)), -1.0 / (y * (1.0 - y))

    def in_domain(self, x: float, y: float) -> bool:
        if self.kind is Measure.RD:
            return 0.0 <= x <= 1.0 and 0.0 <= y <= 1.0
        if self.kind in (Measure.RR, Measure.LOG_RR):
            return 0.0 < x <= 1.0 and 0.0 < y <= 1.0
        return 0.0 < x < 1.0 and 0.0 < y < 1.0


def contrast(kind: "Measure | str") -> ContrastFunction:
    return ContrastFunction(Measure.parse(kind))


@dataclass(frozen=True)
class StudyTable:
    label: str
    n11: int
    n10: int
    n01: int
    n00: int

    @property
    def n1(self) -> int:
        return self.n11 + self.n10

    @property
    def n0(self) -> int:
        return self.n01 + self.n00

    @property
    def n(self) -> int:
        return self.n1 + self.n0

    def counts(self) -> np.ndarray:
        return np.array([self.n11, self.n10, self.n01, self.n00], dtype=np.float64)

    def swapped(self) -> "StudyTable":
        """Same study with the treated and control rows exchanged."""
        return StudyTable(self.label, self.n01, self.n00, self.n11, self.n10)


@dataclass(frozen=True)
class ArmSummary:
    psi_hat: float
    n_arm: int


@dataclass(frozen=True)
class MetaDataset:
    studies: tuple[StudyTable, ...]
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "studies", tuple(self.studies))

    @classmethod
    def from_counts(cls, rows: Sequence[Sequence[int]], name: str = "",
                    labels: Sequence[str] | None = None) -> "MetaDataset":
        """Build from ``[(n11, n10, n01, n00), ...]``; labels default to S1, S2, ..."""
        if labels is None:
            labels = [f"S{i + 1}" for i in range(len(rows))]
        studies = [StudyTable(lab, *(int(c) for c in row)) for lab, row in zip(labels, rows)]
        return cls(tuple(studies), name)

    @property
    def k(self) -> int:
        return len(self.studies)

    @property
    def n(self) -> int:
        return sum(s.n for s in self.studies)

    @property
    def labels(self) -> list[str]:
        return [s.label for s in self.studies]

    def counts(self) -> np.ndarray:
        """``(K, 4)`` float array in column order n11, n10, n01, n00."""
        if not self.studies:
            return np.zeros((0, 4))
        return np.stack([s.counts() for s in self.studies])


@dataclass(frozen=True)
class PooledEstimate:
    """A pooled effect.

    ``point``, ``ci_low`` and ``ci_high`` are on the reporting scale (natural
    for RD/RR/OR, log for LogRR/LogOR). ``theta`` is the same estimate on the
    pooling scale and ``variance`` is the variance of ``theta``; ``scale``
    names that scale.
    """

    method: Method
    measure: Measure
    point: float
    variance: float
    ci_low: float
    ci_high: float
    weights: tuple[float, ...]
    scale: Scale
    theta: float
    tau2: float | None = None
    ci_level: float = 0.95
    warnings: tuple[str, ...] = field(default_factory=tuple)

    @property
    def se(self) -> float:
        return math.sqrt(self.variance)

    @property
    def ci(self) -> tuple[float, float]:
        return (self.ci_low, self.ci_high)

    def to_dict(self) -> dict:
        return {
            "method": self.method.value,
            "measure": self.measure.value,
            "point": self.point,
            "variance": self.variance,
            "scale": self.scale.value,
            "theta": self.theta,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "ci_level": self.ci_level,
            "weights": list(self.weights),
            "tau2": self.tau2,
            "warnings": list(self.warnings),
        }


def validate_dataset(raw: MetaDataset) -> MetaDataset:
    """Check every table invariant and return ``raw`` unchanged.

    Raises
    ------
    EmptyDataset, NegativeCount, NonIntegerCount, EmptyArm, DuplicateLabel
    """
    if raw.k == 0:
        raise EmptyDataset(f"dataset {raw.name!r} has no studies")
    seen: set[str] = set()
    for s in raw.studies:
        for name in ("n11", "n10", "n01", "n00"):
            v = getattr(s, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
                raise NonIntegerCount(f"study {s.label!r}: {name}={v!r} is not an integer")
            if v < 0:
                raise NegativeCount(f"study {s.label!r}: {name}={v} is negative")
        if s.n1 == 0 or s.n0 == 0:
            arm = "treated" if s.n1 == 0 else "control"
            raise EmptyArm(f"study {s.label!r}: {arm} arm is empty")
        if s.label in seen:
            raise DuplicateLabel(f"study label {s.label!r} appears more than once")
        seen.add(s.label)
    return raw
