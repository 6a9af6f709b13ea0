"""Arm-based causal aggregation.

Event rates are averaged arm by arm over studies with weights ``alpha_k`` and
the contrast is applied to the two averaged rates::

    psi(a) = sum_k alpha_k * n_k(a, 1) / n_k(a)
    theta  = Phi(psi(1), psi(0))

With pooled weights ``alpha_k = n_k / n`` the target population is the union
of the study populations and the asymptotic variance has a closed form
(``theorem2_variance``). The estimators assume randomization within each
study and an outcome model shared across studies; neither can be checked from
2x2 tables, so they are documented preconditions only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .effects import HALDANE_INCREMENT, CorrectionPolicy, needs_correction
from .errors import (
    DomainError,
    InvalidWeights,
    VarianceUnavailable,
    WeightLengthMismatch,
)
from .intervals import report_interval
from .model import (
    N00,
    N01,
    N10,
    N11,
    MetaDataset,
    Measure,
    Method,
    PooledEstimate,
    contrast,
    validate_dataset,
)

WEIGHT_SUM_TOL = 1e-12
FIXED_WEIGHT_VARIANCE_NOTE = "variance treats the study weights as fixed (no between-study term)"


@dataclass(frozen=True)
class WeightScheme:
    """How studies are weighted when averaging arm-level rates.

    ``uniform`` gives each study ``1/K``, ``pooled`` gives ``n_k / n`` and
    ``custom`` uses the supplied values.
    """

    kind: str = "pooled"
    values: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in ("uniform", "pooled", "custom"):
            raise InvalidWeights(f"unknown weight scheme {self.kind!r}")
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if self.kind == "custom":
            v = np.asarray(self.values)
            if v.size == 0:
                raise InvalidWeights("custom weights need at least one value")
            if not np.all(np.isfinite(v)) or np.any(v < 0.0):
                raise InvalidWeights("custom weights must be finite and non-negative")
            if abs(v.sum() - 1.0) > WEIGHT_SUM_TOL:
                raise InvalidWeights(f"custom weights sum to {v.sum()!r}, not 1")

    @classmethod
    def uniform(cls) -> "WeightScheme":
        return cls("uniform")

    @classmethod
    def pooled(cls) -> "WeightScheme":
        return cls("pooled")

    @classmethod
    def custom(cls, values: Sequence[float]) -> "WeightScheme":
        return cls("custom", tuple(values))

    @classmethod
    def parse(cls, spec: "str | WeightScheme") -> "WeightScheme":
        """Parse ``uniform``, ``pooled`` or ``custom:w1,w2,...``."""
        if isinstance(spec, WeightScheme):
            return spec
        text = str(spec).strip()
        low = text.lower()
        if low in ("uniform", "pooled"):
            return cls(low)
        if low.startswith("custom:"):
            try:
                vals = [float(x) for x in text.split(":", 1)[1].split(",") if x.strip()]
            except ValueError:
                raise InvalidWeights(f"cannot parse custom weights {text!r}") from None
            return cls.custom(vals)
        raise InvalidWeights(f"unknown weight scheme {text!r}; use uniform, pooled or custom:w1,w2,...")

    def resolve(self, counts: np.ndarray) -> np.ndarray:
        k = counts.shape[0]
        if self.kind == "uniform":
            return np.full(k, 1.0 / k)
        if self.kind == "pooled":
            nk = counts.sum(axis=1)
            return nk / nk.sum()
        if len(self.values) != k:
            raise WeightLengthMismatch(f"{len(self.values)} custom weights for {k} studies")
        return np.asarray(self.values, dtype=np.float64)

    def spec(self) -> str:
        if self.kind == "custom":
            return "custom:" + ",".join(repr(v) for v in self.values)
        return self.kind


@dataclass(frozen=True)
class CausalVarianceParts:
    """Pieces of the asymptotic variance of ``sqrt(n) * (theta_hat - theta)``."""

    sigma2_arm: tuple[float, float]
    gamma: float
    gradient: tuple[float, float]
    sigma2_total: float
    n: int
    clamped: bool = False


def _arms(counts: np.ndarray):
    n1 = counts[:, N11] + counts[:, N10]
    n0 = counts[:, N01] + counts[:, N00]
    return counts[:, N11] / n1, counts[:, N01] / n0, n1, n0


def _pooled_rates(counts: np.ndarray, alphas: np.ndarray) -> tuple[float, float]:
    psi1, psi0, _, _ = _arms(counts)
    return float(np.dot(alphas, psi1)), float(np.dot(alphas, psi0))


def pooled_arm_rates(ds: MetaDataset, w: "WeightScheme | str" = "pooled") -> tuple[float, float]:
    """Weighted averages of the per-study event rates in each arm."""
    counts = validate_dataset(ds).counts()
    return _pooled_rates(counts, WeightScheme.parse(w).resolve(counts))


def _prepare_counts(ds: MetaDataset, measure: Measure, w: WeightScheme,
                    correction: CorrectionPolicy) -> tuple[np.ndarray, int]:
    """Counts to estimate from, corrected only if the pooled rates leave the domain."""
    counts = validate_dataset(ds).counts()
    phi = contrast(measure.pooling_measure)
    psi1, psi0 = _pooled_rates(counts, w.resolve(counts))
    if phi.in_domain(psi1, psi0):
        return counts, 0
    if correction is CorrectionPolicy.REJECT:
        raise DomainError(
            f"pooled event rates ({psi1:g}, {psi0:g}) are outside the domain of {measure.value}"
        )
    fix = np.array([needs_correction(*row, measure) for row in counts])
    counts = counts + np.where(fix[:, None], HALDANE_INCREMENT, 0.0)
    psi1, psi0 = _pooled_rates(counts, w.resolve(counts))
    if not phi.in_domain(psi1, psi0):
        raise DomainError(f"pooled event rates ({psi1:g}, {psi0:g}) remain outside the domain")
    return counts, int(fix.sum())


def _asymptotic_parts(counts: np.ndarray, measure: Measure) -> CausalVarianceParts:
    psi1_k, psi0_k, n1_k, n0_k = _arms(counts)
    nk = n1_k + n0_k
    n = nk.sum()
    frac = nk / n
    psi1, psi0 = float(np.dot(frac, psi1_k)), float(np.dot(frac, psi0_k))

    def arm_var(psi_k, na_k, psi):
        within = np.sum(nk**2 / (n * na_k) * psi_k * (1.0 - psi_k))
        between = np.dot(frac, psi_k**2) - psi**2
        return float(within + between)

    s1 = arm_var(psi1_k, n1_k, psi1)
    s0 = arm_var(psi0_k, n0_k, psi0)
    gamma = float(np.dot(frac, psi1_k * psi0_k) - psi1 * psi0)
    clamped = s1 < 0.0 or s0 < 0.0
    s1, s0 = max(s1, 0.0), max(s0, 0.0)
    v1, v0 = contrast(measure).gradient(psi1, psi0)
    total = s1 * v1 * v1 + s0 * v0 * v0 + 2.0 * gamma * v1 * v0
    if total < 0.0:
        total, clamped = 0.0, True
    return CausalVarianceParts((s1, s0), gamma, (float(v1), float(v0)), float(total),
                               int(round(n)), clamped)


def theorem2_variance(ds: MetaDataset, measure: "Measure | str",
                      correction: "CorrectionPolicy | str" = CorrectionPolicy.HALDANE) -> CausalVarianceParts:
    """Plug-in asymptotic variance of the pooled-weight causal estimator.

    Per arm ``a``::

        sigma2(a) = sum_k n_k^2 / (n n_k(a)) psi_k(a) (1 - psi_k(a))
                    + sum_k (n_k / n) psi_k(a)^2 - psi(a)^2
        gamma     = sum_k (n_k / n) psi_k(1) psi_k(0) - psi(1) psi(0)

    combined by the delta method with ``(v1, v0) = grad Phi(psi(1), psi(0))``.
    ``sigma2_total`` is the variance of ``sqrt(n) * theta_hat``; divide by ``n``
    for the variance of the estimate itself. The gradient is taken for
    ``measure`` as given, so RR yields the natural-scale variance and LogRR the
    log-scale one.
    """
    measure = Measure.parse(measure)
    counts, _ = _prepare_counts(ds, measure, WeightScheme.pooled(), CorrectionPolicy.parse(correction))
    return _asymptotic_parts(counts, measure)


def _fixed_weight_variance(counts: np.ndarray, alphas: np.ndarray, measure: Measure) -> float:
    psi1_k, psi0_k, n1_k, n0_k = _arms(counts)
    var1 = float(np.sum(alphas**2 * psi1_k * (1.0 - psi1_k) / n1_k))
    var0 = float(np.sum(alphas**2 * psi0_k * (1.0 - psi0_k) / n0_k))
    psi1, psi0 = float(np.dot(alphas, psi1_k)), float(np.dot(alphas, psi0_k))
    v1, v0 = contrast(measure).gradient(psi1, psi0)
    return var1 * v1 * v1 + var0 * v0 * v0


def bootstrap_variance(ds: MetaDataset, measure: "Measure | str", w: "WeightScheme | str" = "pooled",
                       n_boot: int = 2000, seed: int | None = 0) -> tuple[float, int]:
    """Variance of the pooling-scale estimate under resampling of individuals within arms.

    Returns ``(variance, n_dropped)`` where dropped replicates are those whose
    resampled pooled rates fall outside the domain of the contrast.
    """
    measure = Measure.parse(measure)
    counts = validate_dataset(ds).counts()
    w = WeightScheme.parse(w)
    alphas = w.resolve(counts)
    rng = np.random.default_rng(seed)
    psi1_k, psi0_k, n1_k, n0_k = _arms(counts)
    n1_i, n0_i = n1_k.astype(np.int64), n0_k.astype(np.int64)
    e1 = rng.binomial(n1_i, psi1_k, size=(n_boot, len(n1_i)))
    e0 = rng.binomial(n0_i, psi0_k, size=(n_boot, len(n0_i)))
    p1 = (e1 / n1_k) @ alphas
    p0 = (e0 / n0_k) @ alphas
    phi = contrast(measure.pooling_measure)
    with np.errstate(divide="ignore", invalid="ignore"):
        th = phi.value(p1, p0)
    ok = np.isfinite(th)
    if ok.sum() < 2:
        raise VarianceUnavailable("too few bootstrap replicates inside the domain of the contrast")
    return float(np.var(th[ok], ddof=1)), int((~ok).sum())


def pool_causal(ds: MetaDataset, measure: "Measure | str", w: "WeightScheme | str" = "pooled",
                ci_level: float = 0.95,
                correction: "CorrectionPolicy | str" = CorrectionPolicy.HALDANE,
                variance: str = "auto", n_boot: int = 2000, seed: int | None = 0) -> PooledEstimate:
    """Causal meta-analysis estimate ``Phi(psi(1), psi(0))``.

    Parameters
    ----------
    ds : MetaDataset
    measure : Measure or str
        RD, RR, OR or their log versions. Ratio measures get their interval on
        the log scale, then exponentiated.
    w : WeightScheme or str
        ``pooled`` (default) targets the pooled population of all studies.
    variance : {"auto", "theorem2", "fixed", "bootstrap"}
        ``auto`` uses the closed-form asymptotic variance for pooled weights
        and the fixed-weight delta-method variance otherwise.

    Raises
    ------
    DomainError
        Pooled rates at 0 or 1 for a ratio measure and ``correction="reject"``.
    VarianceUnavailable
        ``variance="theorem2"`` requested with non-pooled weights.
    """
    measure = Measure.parse(measure)
    w = WeightScheme.parse(w)
    correction = CorrectionPolicy.parse(correction)
    if variance not in ("auto", "theorem2", "fixed", "bootstrap"):
        raise ValueError(f"unknown variance method {variance!r}")
    counts, n_corrected = _prepare_counts(ds, measure, w, correction)
    alphas = w.resolve(counts)
    psi1, psi0 = _pooled_rates(counts, alphas)
    pool_m = measure.pooling_measure
    theta = float(contrast(pool_m).value(psi1, psi0))
    point = float(contrast(measure).value(psi1, psi0))

    warnings: list[str] = []
    if n_corrected:
        warnings.append(f"continuity correction applied to {n_corrected} stud{'y' if n_corrected == 1 else 'ies'}")
    if variance == "auto":
        variance = "theorem2" if w.kind == "pooled" else "fixed"
    if variance == "theorem2":
        if w.kind != "pooled":
            raise VarianceUnavailable("closed-form variance is only available for pooled weights")
        parts = _asymptotic_parts(counts, pool_m)
        if parts.clamped:
            warnings.append("negative variance component clamped to 0")
        var = parts.sigma2_total / counts.sum()
    elif variance == "fixed":
        var = _fixed_weight_variance(counts, alphas, pool_m)
        warnings.append(FIXED_WEIGHT_VARIANCE_NOTE)
    else:
        var, dropped = bootstrap_variance(ds, measure, w, n_boot, seed)
        warnings.append(f"bootstrap variance from {n_boot - dropped} replicates")

    _, lo, hi = report_interval(measure, theta, var, ci_level)
    return PooledEstimate(
        method=Method.CAUSAL,
        measure=measure,
        point=point,
        variance=float(var),
        ci_low=min(lo, point),
        ci_high=max(hi, point),
        weights=tuple(float(a) for a in alphas),
        scale=measure.pooling_scale,
        theta=theta,
        tau2=None,
        ci_level=ci_level,
        warnings=tuple(warnings),
    )


def collapsibility_weights(ds: MetaDataset, measure: "Measure | str") -> np.ndarray:
    """Per-study weights turning per-study effects into the pooled causal effect.

    RD: ``n_k / n``. RR: ``(n_k / n) * psi_k(0) / psi(0)``.
    """
    measure = Measure.parse(measure)
    counts = validate_dataset(ds).counts()
    return _collapsibility_weights(counts, measure)


def _collapsibility_weights(counts: np.ndarray, measure: Measure) -> np.ndarray:
    _, psi0_k, n1_k, n0_k = _arms(counts)
    frac = (n1_k + n0_k) / counts.sum()
    if measure is Measure.RD:
        return frac
    if measure is Measure.RR:
        return frac * psi0_k / np.dot(frac, psi0_k)
    raise DomainError(f"{measure.value} is not collapsible; use pool_causal")


def pool_causal_collapsibility(ds: MetaDataset, measure: "Measure | str", ci_level: float = 0.95,
                               correction: "CorrectionPolicy | str" = CorrectionPolicy.HALDANE) -> PooledEstimate:
    """Pooled-weight causal RD or RR written as a weighted mean of per-study effects.

    Gives the same point as ``pool_causal`` with pooled weights; exposes the
    collapsibility weights in ``weights``. RR needs a positive control rate in
    every study; otherwise the affected studies are corrected (Haldane) or a
    ``DomainError`` is raised (reject).
    """
    measure = Measure.parse(measure)
    correction = CorrectionPolicy.parse(correction)
    if measure not in (Measure.RD, Measure.RR):
        raise DomainError(f"collapsibility form exists only for RD and RR, not {measure.value}")
    counts = validate_dataset(ds).counts()
    warnings: list[str] = []
    if measure is Measure.RR and np.any(counts[:, N01] == 0):
        if correction is CorrectionPolicy.REJECT:
            raise DomainError("RR collapsibility weights need a positive control event rate in every study")
        fix = np.array([needs_correction(*row, measure) for row in counts])
        counts = counts + np.where(fix[:, None], HALDANE_INCREMENT, 0.0)
        warnings.append(f"continuity correction applied to {int(fix.sum())} studies")

    psi1_k, psi0_k, _, _ = _arms(counts)
    weights = _collapsibility_weights(counts, measure)
    per_study = psi1_k - psi0_k if measure is Measure.RD else psi1_k / psi0_k
    point = float(np.dot(weights, per_study))

    pool_m = measure.pooling_measure
    parts = _asymptotic_parts(counts, pool_m)
    var = parts.sigma2_total / counts.sum()
    theta = math.log(point) if measure.exponentiate else point
    _, lo, hi = report_interval(measure, theta, var, ci_level)
    return PooledEstimate(
        method=Method.CAUSAL,
        measure=measure,
        point=point,
        variance=float(var),
        ci_low=min(lo, point),
        ci_high=max(hi, point),
        weights=tuple(float(x) for x in weights),
        scale=measure.pooling_scale,
        theta=theta,
        ci_level=ci_level,
        warnings=tuple(warnings),
    )
