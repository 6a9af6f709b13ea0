"""Inverse-variance fixed-effects and random-effects pooling."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .effects import StudyEffect
from .errors import MixedMeasures, MetaAnalysisError
from .intervals import report_interval
from .model import Method, PooledEstimate

SINGLE_STUDY_WARNING = "single study: between-study variance undefined, tau2 set to 0"


@dataclass(frozen=True)
class HeterogeneityEstimate:
    tau2: float
    q: float
    method: str = "dl"
    k: int = 0
    warnings: tuple[str, ...] = field(default_factory=tuple)

    @property
    def i2(self) -> float:
        """Share of total variability attributed to heterogeneity."""
        if self.q <= 0.0 or self.k < 2:
            return 0.0
        return max(0.0, (self.q - (self.k - 1)) / self.q)


def _arrays(effects: Sequence[StudyEffect]) -> tuple[np.ndarray, np.ndarray]:
    if len(effects) == 0:
        raise MetaAnalysisError("no study effects to pool")
    measures = {e.measure for e in effects}
    if len(measures) > 1:
        raise MixedMeasures(f"cannot pool different measures together: {sorted(m.value for m in measures)}")
    theta = np.array([e.theta_hat for e in effects], dtype=np.float64)
    var = np.array([e.sigma2_hat for e in effects], dtype=np.float64)
    if not np.all(np.isfinite(theta)):
        raise MetaAnalysisError("non-finite study effect")
    if not np.all(var > 0.0):
        raise MetaAnalysisError("study variances must be strictly positive")
    return theta, var


def _correction_warnings(effects: Sequence[StudyEffect]) -> tuple[str, ...]:
    n = sum(e.corrected for e in effects)
    return (f"continuity correction applied to {n} stud{'y' if n == 1 else 'ies'}",) if n else ()


def _inverse_variance(effects, tau2: float, method: Method, ci_level: float,
                      warnings: tuple[str, ...] = ()) -> PooledEstimate:
    theta, var = _arrays(effects)
    w = 1.0 / (var + tau2)
    total = w.sum()
    weights = w / total
    est = float(np.dot(weights, theta))
    variance = float(1.0 / total)
    measure = effects[0].measure
    point, lo, hi = report_interval(measure, est, variance, ci_level)
    return PooledEstimate(
        method=method,
        measure=measure,
        point=point,
        variance=variance,
        ci_low=lo,
        ci_high=hi,
        weights=tuple(float(x) for x in weights),
        scale=measure.pooling_scale,
        theta=est,
        tau2=float(tau2) if method is Method.RANDOM else None,
        ci_level=ci_level,
        warnings=_correction_warnings(effects) + tuple(warnings),
    )


def pool_fixed(effects: Sequence[StudyEffect], ci_level: float = 0.95) -> PooledEstimate:
    """Fixed-effects estimate with weights proportional to ``1 / sigma2_k``."""
    return _inverse_variance(effects, 0.0, Method.FIXED, ci_level)


def cochran_q(theta: np.ndarray, var: np.ndarray, tau2: float = 0.0) -> float:
    w = 1.0 / (var + tau2)
    mean = np.dot(w, theta) / w.sum()
    return float(np.dot(w, (theta - mean) ** 2))


def tau2_dersimonian_laird(effects: Sequence[StudyEffect]) -> HeterogeneityEstimate:
    """Moment estimator ``max(0, (Q - (K - 1)) / C)``.

    With a single study the estimate is 0 and a warning is attached.
    """
    theta, var = _arrays(effects)
    k = len(theta)
    if k < 2:
        return HeterogeneityEstimate(0.0, 0.0, "dl", k, (SINGLE_STUDY_WARNING,))
    w = 1.0 / var
    q = cochran_q(theta, var)
    c = w.sum() - np.dot(w, w) / w.sum()
    tau2 = max(0.0, (q - (k - 1)) / c)
    return HeterogeneityEstimate(float(tau2), q, "dl", k)


def tau2_paule_mandel(effects: Sequence[StudyEffect], tol: float = 1e-10) -> HeterogeneityEstimate:
    """Value of tau2 at which the generalized Q statistic equals ``K - 1``."""
    theta, var = _arrays(effects)
    k = len(theta)
    q0 = cochran_q(theta, var)
    if k < 2:
        return HeterogeneityEstimate(0.0, 0.0, "pm", k, (SINGLE_STUDY_WARNING,))
    target = k - 1.0
    if q0 <= target:
        return HeterogeneityEstimate(0.0, q0, "pm", k)

    def f(t):
        return cochran_q(theta, var, t) - target

    hi = max(1.0, float(np.var(theta)))
    while f(hi) > 0.0:
        hi *= 2.0
    tau2 = brentq(f, 0.0, hi, xtol=tol)
    return HeterogeneityEstimate(float(tau2), q0, "pm", k)


TAU2_ESTIMATORS = {"dl": tau2_dersimonian_laird, "pm": tau2_paule_mandel}


def pool_random(effects: Sequence[StudyEffect], het: HeterogeneityEstimate | None = None,
                ci_level: float = 0.95, tau2_method: str = "dl") -> PooledEstimate:
    """Random-effects estimate with weights proportional to ``1 / (sigma2_k + tau2)``."""
    if het is None:
        try:
            estimator = TAU2_ESTIMATORS[tau2_method]
        except KeyError:
            raise MetaAnalysisError(f"unknown tau2 estimator {tau2_method!r}") from None
        het = estimator(effects)
    if het.tau2 < 0.0:
        raise MetaAnalysisError("tau2 must be non-negative")
    if len(effects) == 1:
        het = HeterogeneityEstimate(0.0, 0.0, het.method, 1, (SINGLE_STUDY_WARNING,))
    return _inverse_variance(effects, het.tau2, Method.RANDOM, ci_level, het.warnings)
