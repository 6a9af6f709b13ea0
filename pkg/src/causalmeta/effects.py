"""Per-study effect estimates and their variances, with zero-cell handling."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .errors import ZeroCellUnresolvable
from .model import ArmSummary, MetaDataset, Measure, StudyTable

HALDANE_INCREMENT = 0.5


class CorrectionPolicy(str, enum.Enum):
    REJECT = "reject"
    HALDANE = "haldane"

    @classmethod
    def parse(cls, value: "str | CorrectionPolicy") -> "CorrectionPolicy":
        if isinstance(value, CorrectionPolicy):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ValueError(f"unknown correction policy {value!r}") from None


@dataclass(frozen=True)
class StudyEffect:
    """Effect of one study on the pooling scale (log for ratio measures)."""

    theta_hat: float
    sigma2_hat: float
    measure: Measure
    corrected: bool = False
    label: str = ""


def arm_rates(study: StudyTable) -> tuple[ArmSummary, ArmSummary]:
    """Observed event rate in the treated and control arm."""
    return (
        ArmSummary(study.n11 / study.n1, study.n1),
        ArmSummary(study.n01 / study.n0, study.n0),
    )


def rd_variance(p1: float, n1: float, p0: float, n0: float) -> float:
    return p1 * (1.0 - p1) / n1 + p0 * (1.0 - p0) / n0


def needs_correction(n11, n10, n01, n00, measure: Measure) -> bool:
    """True when the uncorrected estimate or its variance is undefined or zero."""
    measure = Measure.parse(measure)
    if measure is Measure.RD:
        # variance vanishes only when both arms are all-or-nothing
        return (n11 == 0 or n10 == 0) and (n01 == 0 or n00 == 0)
    if measure in (Measure.RR, Measure.LOG_RR):
        return n11 == 0 or n01 == 0 or (n10 == 0 and n00 == 0)
    return n11 == 0 or n10 == 0 or n01 == 0 or n00 == 0


def _effect_from_cells(a: float, b: float, c: float, d: float, measure: Measure) -> tuple[float, float]:
    n1, n0 = a + b, c + d
    if measure is Measure.RD:
        p1, p0 = a / n1, c / n0
        return p1 - p0, rd_variance(p1, n1, p0, n0)
    if measure in (Measure.RR, Measure.LOG_RR):
        # difference of logs keeps the arm swap an exact negation
        theta = math.log(a / n1) - math.log(c / n0)
        return theta, 1.0 / a - 1.0 / n1 + 1.0 / c - 1.0 / n0
    theta = (math.log(a) - math.log(b)) - (math.log(c) - math.log(d))
    return theta, 1.0 / a + 1.0 / b + 1.0 / c + 1.0 / d


def study_effect(study: StudyTable, measure: "Measure | str",
                 correction: "CorrectionPolicy | str" = CorrectionPolicy.HALDANE) -> StudyEffect:
    """Effect and variance of one study.

    RD uses the binomial variance of the difference, log-RR uses
    ``1/n11 - 1/n1 + 1/n01 - 1/n0`` and log-OR uses Woolf's sum of reciprocal
    cells. RR and OR effects are returned on the log scale.

    With the Haldane policy, 0.5 is added to all four cells of a study whose
    estimate would otherwise be undefined or have zero variance.
    """
    measure = Measure.parse(measure)
    correction = CorrectionPolicy.parse(correction)
    cells = (study.n11, study.n10, study.n01, study.n00)
    corrected = needs_correction(*cells, measure)
    if corrected:
        if correction is CorrectionPolicy.REJECT:
            raise ZeroCellUnresolvable(
                f"study {study.label!r} has zero cells {cells} and correction is disabled"
            )
        cells = tuple(c + HALDANE_INCREMENT for c in cells)
    theta, var = _effect_from_cells(*(float(c) for c in cells), measure)
    return StudyEffect(theta, var, measure, corrected, study.label)


def study_effects(ds: MetaDataset, measure: "Measure | str",
                  correction: "CorrectionPolicy | str" = CorrectionPolicy.HALDANE) -> list[StudyEffect]:
    return [study_effect(s, measure, correction) for s in ds.studies]
