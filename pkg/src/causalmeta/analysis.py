"""Run the requested pooling models on one dataset."""

from __future__ import annotations

from dataclasses import dataclass

from .causal import WeightScheme, pool_causal
from .classical import TAU2_ESTIMATORS, HeterogeneityEstimate, pool_fixed, pool_random
from .effects import CorrectionPolicy, StudyEffect, study_effects
from .errors import ConfigError
from .intervals import report_interval
from .model import MetaDataset, Measure, PooledEstimate, validate_dataset

MODELS = ("fe", "re", "causal")


def expand_models(model: str) -> tuple[str, ...]:
    if model == "all":
        return MODELS
    if model not in MODELS:
        raise ConfigError(f"unknown model {model!r}; choose from fe, re, causal, all")
    return (model,)


@dataclass(frozen=True)
class StudyRow:
    label: str
    point: float
    ci_low: float
    ci_high: float
    theta: float
    variance: float
    corrected: bool


@dataclass(frozen=True)
class AnalysisResult:
    dataset: MetaDataset
    measure: Measure
    studies: tuple[StudyRow, ...]
    pooled: tuple[PooledEstimate, ...]
    heterogeneity: HeterogeneityEstimate | None
    ci_level: float

    def to_dict(self) -> dict:
        het = None
        if self.heterogeneity is not None:
            h = self.heterogeneity
            het = {"tau2": h.tau2, "q": h.q, "i2": h.i2, "method": h.method, "k": h.k,
                   "warnings": list(h.warnings)}
        return {
            "dataset": self.dataset.name,
            "measure": self.measure.value,
            "ci_level": self.ci_level,
            "k": self.dataset.k,
            "n": self.dataset.n,
            "studies": [
                {"label": s.label, "point": s.point, "ci_low": s.ci_low, "ci_high": s.ci_high,
                 "theta": s.theta, "variance": s.variance, "corrected": s.corrected}
                for s in self.studies
            ],
            "pooled": [p.to_dict() for p in self.pooled],
            "heterogeneity": het,
        }


def study_rows(effects: list[StudyEffect], measure: Measure, ci_level: float) -> tuple[StudyRow, ...]:
    rows = []
    for e in effects:
        point, lo, hi = report_interval(measure, e.theta_hat, e.sigma2_hat, ci_level)
        rows.append(StudyRow(e.label, point, lo, hi, e.theta_hat, e.sigma2_hat, e.corrected))
    return tuple(rows)


def analyze(ds: MetaDataset, measure: "Measure | str" = "rr", models: "str | tuple[str, ...]" = "all",
            weights: "WeightScheme | str" = "pooled", ci_level: float = 0.95,
            correction: "CorrectionPolicy | str" = CorrectionPolicy.HALDANE,
            tau2_method: str = "dl") -> AnalysisResult:
    ds = validate_dataset(ds)
    measure = Measure.parse(measure)
    if isinstance(models, str):
        models = expand_models(models)
    weights = WeightScheme.parse(weights)
    if tau2_method not in TAU2_ESTIMATORS:
        raise ConfigError(f"unknown tau2 estimator {tau2_method!r}")
    # resolve custom weights up front so a length mismatch fails before any output
    weights.resolve(ds.counts())

    effects = study_effects(ds, measure, correction)
    pooled: list[PooledEstimate] = []
    het = None
    for m in models:
        if m == "fe":
            pooled.append(pool_fixed(effects, ci_level))
        elif m == "re":
            het = TAU2_ESTIMATORS[tau2_method](effects)
            pooled.append(pool_random(effects, het, ci_level))
        else:
            pooled.append(pool_causal(ds, measure, weights, ci_level, correction))
    return AnalysisResult(ds, measure, study_rows(effects, measure, ci_level), tuple(pooled), het, ci_level)
