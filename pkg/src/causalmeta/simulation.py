"""Synthetic experiments.

* ``MismatchDGP``: two studies whose covariate distributions differ, with a
  logistic outcome model shared by both. Classical and causal pooling are
  compared on it (``run_mismatch``).
* ``RateSpec``: studies described directly by arm event rates, used to check
  the asymptotic variance of the causal estimator (``calibrate_theorem2``).
* ``solve_pstar``: the binary-covariate example in which the random-effects
  log-RR matches a mixture population whose weight depends on the outcome
  model.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from numpy.polynomial.hermite import hermgauss

from . import kernels
from .errors import ConfigError, DegenerateDraw, DegenerateEquation
from .intervals import z_quantile
from .model import MetaDataset, Measure, StudyTable, contrast

ESTIMATORS = ("fe", "re", "causal")
MISMATCH_MEASURES = (Measure.RD, Measure.RR, Measure.OR)
CALIBRATION_MEASURES = (Measure.RD, Measure.LOG_RR, Measure.LOG_OR)


def sigmoid(t):
    """Logistic function, computed without overflow for large ``|t|``."""
    t = np.asarray(t, dtype=np.float64)
    e = np.exp(-np.abs(t))
    return np.where(t >= 0.0, 1.0 / (1.0 + e), e / (1.0 + e))


def _rng(seed, attempt: int = 0) -> np.random.Generator:
    if attempt == 0:
        return np.random.default_rng(seed)
    return np.random.default_rng([int(seed), attempt])


def replication_seeds(seed: int, replications: int) -> list[int]:
    """Independent per-replication seeds derived from one master seed."""
    ss = np.random.SeedSequence(seed)
    return [int(s) for s in ss.generate_state(replications, dtype=np.uint64)]


# --------------------------------------------------------------------------
# covariate-shift data generating process


@dataclass(frozen=True)
class MismatchDGP:
    """Two studies with ``X | H=k ~ N(m_k, eta^2 I)``, ``P(A=1) = p_treat`` and
    ``Y | X, A=a ~ Bernoulli(sigmoid(X . beta_a))``. ``p_study`` is ``P(H=1)``."""

    m1: tuple[float, float] = (1.0, 0.0)
    m2: tuple[float, float] = (0.0, 1.0)
    eta: float = 0.1
    beta1: tuple[float, float] = (0.36, -1.38)
    beta0: tuple[float, float] = (2.94, -4.60)
    n: int = 1000
    p_study: float = 0.5
    p_treat: float = 0.5

    def __post_init__(self):
        for name in ("m1", "m2", "beta1", "beta0"):
            v = tuple(float(x) for x in getattr(self, name))
            if len(v) != 2:
                raise ConfigError(f"{name} must have 2 components")
            object.__setattr__(self, name, v)
        if not self.eta > 0.0:
            raise ConfigError("eta must be positive")
        if int(self.n) != self.n or self.n < 4:
            raise ConfigError("n must be an integer >= 4")
        object.__setattr__(self, "n", int(self.n))
        for name in ("p_study", "p_treat"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise ConfigError(f"{name} must lie in (0, 1)")

    @property
    def means(self) -> np.ndarray:
        return np.array([self.m1, self.m2])

    @property
    def betas(self) -> np.ndarray:
        """Row ``a`` holds the coefficients of arm ``a`` (control first)."""
        return np.array([self.beta0, self.beta1])

    @property
    def study_probs(self) -> np.ndarray:
        return np.array([self.p_study, 1.0 - self.p_study])


def _draw_counts(dgp: MismatchDGP, rng: np.random.Generator) -> np.ndarray:
    n = dgp.n
    h = (rng.random(n) >= dgp.p_study).astype(np.int64)  # 0 -> study 1
    x = dgp.means[h] + dgp.eta * rng.standard_normal((n, 2))
    a = (rng.random(n) < dgp.p_treat).astype(np.int64)
    lin = np.einsum("ij,ij->i", x, dgp.betas[a])
    y = rng.random(n) < sigmoid(lin)
    # cell index in n11, n10, n01, n00 order
    cell = 2 * (1 - a) + (1 - y.astype(np.int64))
    return np.bincount(4 * h + cell, minlength=8).reshape(2, 4)


def _has_empty_arm(counts: np.ndarray) -> bool:
    return bool(np.any(counts[..., 0] + counts[..., 1] == 0) or np.any(counts[..., 2] + counts[..., 3] == 0))


def draw_mismatch_counts(dgp: MismatchDGP, seed: int, on_degenerate: str = "resample",
                         max_attempts: int = 1000) -> tuple[np.ndarray, int]:
    """One meta-analysis as a ``(2, 4)`` count array plus the number of redraws."""
    for attempt in range(max_attempts):
        counts = _draw_counts(dgp, _rng(seed, attempt))
        if not _has_empty_arm(counts):
            return counts, attempt
        if on_degenerate == "error":
            raise DegenerateDraw(f"seed {seed}: a study has an empty arm")
    raise DegenerateDraw(f"seed {seed}: no valid draw after {max_attempts} attempts")


def simulate_meta(dgp: MismatchDGP, seed: int, on_degenerate: str = "resample") -> MetaDataset:
    """Draw ``dgp.n`` patients and tabulate them into two studies.

    A draw leaving an arm empty is redrawn from a derived seed
    (``on_degenerate="resample"``) or raises ``DegenerateDraw`` (``"error"``).
    """
    counts, _ = draw_mismatch_counts(dgp, seed, on_degenerate)
    return MetaDataset.from_counts(counts.tolist(), name=f"mismatch-seed{seed}", labels=["study1", "study2"])


def study_arm_means(dgp: MismatchDGP, nodes: int = 40) -> np.ndarray:
    """``psi[k, a] = E[sigmoid(X . beta_a) | H=k]`` by 2-D Gauss-Hermite quadrature."""
    x, w = hermgauss(nodes)
    gx, gy = np.meshgrid(x, x, indexing="ij")
    ww = np.outer(w, w) / math.pi
    pts = math.sqrt(2.0) * dgp.eta * np.stack([gx.ravel(), gy.ravel()], axis=1)
    out = np.empty((2, 2))
    for k, m in enumerate(dgp.means):
        xs = m + pts
        for arm, beta in enumerate(dgp.betas):
            out[k, arm] = float(np.dot(ww.ravel(), sigmoid(xs @ beta)))
    return out


def study_arm_means_mc(dgp: MismatchDGP, draws: int = 10_000_000, seed: int = 0) -> np.ndarray:
    """Monte Carlo version of ``study_arm_means`` (independent cross-check)."""
    rng = np.random.default_rng(seed)
    out = np.zeros((2, 2))
    chunk = 1_000_000
    done = 0
    while done < draws:
        m = min(chunk, draws - done)
        z = rng.standard_normal((m, 2))
        for k, mean in enumerate(dgp.means):
            xs = mean + dgp.eta * z
            for arm, beta in enumerate(dgp.betas):
                out[k, arm] += sigmoid(xs @ beta).sum()
        done += m
    return out / draws


def _target_weights(dgp: MismatchDGP, weights) -> np.ndarray:
    kind = getattr(weights, "kind", weights)
    if kind == "uniform":
        return np.array([0.5, 0.5])
    if kind == "pooled":
        return dgp.study_probs
    if kind == "custom":
        v = np.asarray(weights.values, dtype=np.float64)
        if v.shape != (2,):
            raise ConfigError("custom target weights must have 2 entries")
        return v
    raise ConfigError(f"unsupported target weights {weights!r}")


def true_effect(dgp: MismatchDGP, measure: "Measure | str", weights="pooled", nodes: int = 40) -> float:
    """Effect on the target population ``sum_k alpha_k P_k`` under the DGP."""
    psi = study_arm_means(dgp, nodes)
    alpha = _target_weights(dgp, weights)
    p1, p0 = float(alpha @ psi[:, 1]), float(alpha @ psi[:, 0])
    return float(contrast(measure).value(p1, p0))


# --------------------------------------------------------------------------
# binary covariate example


@dataclass(frozen=True)
class MuTable:
    """Outcome probabilities ``mu(a, x)`` for a binary covariate."""

    mu11: float
    mu10: float
    mu01: float
    mu00: float

    def __post_init__(self):
        for v in (self.mu11, self.mu10, self.mu01, self.mu00):
            if not 0.0 <= v <= 1.0:
                raise ConfigError("mu values must lie in [0, 1]")

    def arm_mean(self, a: int, p: float) -> float:
        """Mean outcome under treatment ``a`` when ``P(X=1) = p``."""
        if a == 1:
            return p * self.mu11 + (1.0 - p) * self.mu10
        return p * self.mu01 + (1.0 - p) * self.mu00

    def log_rr(self, p: float) -> float:
        return math.log(self.arm_mean(1, p)) - math.log(self.arm_mean(0, p))


def re_log_rr(p1: float, p2: float, mu: MuTable) -> float:
    """Large-sample random-effects log-RR of two equally weighted studies."""
    return 0.5 * mu.log_rr(p1) + 0.5 * mu.log_rr(p2)


def solve_pstar(p1: float, p2: float, mu: MuTable, tol: float = 1e-12) -> float | None:
    """Covariate prevalence ``p*`` of the population whose log-RR equals the
    random-effects value of studies with prevalences ``p1`` and ``p2``.

    Returns None when the solution lies outside ``[0, 1]``.

    Raises
    ------
    DegenerateEquation
        The linear equation in ``p*`` has a zero leading coefficient.
    """
    t = math.exp(re_log_rr(p1, p2, mu))
    # p (mu11 - mu10) + mu10 = t (p (mu01 - mu00) + mu00)
    coef = (mu.mu11 - mu.mu10) - t * (mu.mu01 - mu.mu00)
    rhs = t * mu.mu00 - mu.mu10
    if abs(coef) < tol:
        raise DegenerateEquation("equation for p* has no unique solution")
    p = rhs / coef
    if -tol <= p <= 1.0 + tol:
        return min(1.0, max(0.0, p))
    return None


# --------------------------------------------------------------------------
# rate-level specification and Monte Carlo calibration


@dataclass(frozen=True)
class RateSpec:
    """Studies given by ``P(H=k)``, ``P(A=1 | H=k)`` and arm event rates.

    ``rates[k] = (psi_k(1), psi_k(0))``.
    """

    study_probs: tuple[float, ...]
    treat_probs: tuple[float, ...]
    rates: tuple[tuple[float, float], ...]

    def __post_init__(self):
        sp = tuple(float(x) for x in self.study_probs)
        tp = tuple(float(x) for x in self.treat_probs)
        rt = tuple((float(a), float(b)) for a, b in self.rates)
        if not (len(sp) == len(tp) == len(rt) >= 1):
            raise ConfigError("study_probs, treat_probs and rates must have the same length")
        if abs(sum(sp) - 1.0) > 1e-9 or min(sp) <= 0.0:
            raise ConfigError("study_probs must be positive and sum to 1")
        if not all(0.0 < x < 1.0 for x in tp):
            raise ConfigError("treat_probs must lie in (0, 1)")
        if not all(0.0 <= x <= 1.0 for r in rt for x in r):
            raise ConfigError("rates must lie in [0, 1]")
        object.__setattr__(self, "study_probs", sp)
        object.__setattr__(self, "treat_probs", tp)
        object.__setattr__(self, "rates", rt)

    @property
    def k(self) -> int:
        return len(self.study_probs)

    def target_rates(self) -> tuple[float, float]:
        pi = np.asarray(self.study_probs)
        r = np.asarray(self.rates)
        return float(pi @ r[:, 0]), float(pi @ r[:, 1])

    def true_value(self, measure: "Measure | str") -> float:
        """Effect on the pooled population (study weights ``P(H=k)``)."""
        return float(contrast(measure).value(*self.target_rates()))


# heterogeneous two-study design used for variance calibration
CALIBRATION_SPEC = RateSpec(
    study_probs=(0.4, 0.6),
    treat_probs=(0.5, 0.3),
    rates=((0.30, 0.20), (0.60, 0.45)),
)


def simulate_rate_counts(spec: RateSpec, n: int, replications: int, rng: np.random.Generator,
                         max_attempts: int = 100) -> tuple[np.ndarray, int]:
    """``(R, K, 4)`` counts; replications with an empty arm are redrawn."""
    pi = np.asarray(spec.study_probs)
    e = np.asarray(spec.treat_probs)
    rates = np.asarray(spec.rates)
    out = np.empty((replications, spec.k, 4), dtype=np.int64)
    todo = np.arange(replications)
    redrawn = 0
    for attempt in range(max_attempts):
        m = len(todo)
        nk = rng.multinomial(n, pi, size=m)
        n1 = rng.binomial(nk, e)
        n0 = nk - n1
        y1 = rng.binomial(n1, rates[:, 0])
        y0 = rng.binomial(n0, rates[:, 1])
        block = np.stack([y1, n1 - y1, y0, n0 - y0], axis=-1)
        out[todo] = block
        bad = (n1 == 0).any(axis=1) | (n0 == 0).any(axis=1)
        if not bad.any():
            return out, redrawn
        redrawn += int(bad.sum())
        todo = todo[bad]
    raise DegenerateDraw("could not draw non-empty arms; increase n")


def simulate_rate_dataset(spec: RateSpec, n: int, seed: int, name: str = "") -> MetaDataset:
    counts, _ = simulate_rate_counts(spec, n, 1, np.random.default_rng(seed))
    return MetaDataset.from_counts(counts[0].tolist(), name=name or f"rates-seed{seed}")


@dataclass(frozen=True)
class CalibrationResult:
    measure: str
    true_value: float
    mean_point: float
    se_mean_point: float
    empirical_variance: float
    mean_sigma2: float
    ratio: float
    coverage: float
    n_corrected: int

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class CalibrationReport:
    n: int
    replications: int
    seed: int
    ci_level: float
    redrawn: int
    results: tuple[CalibrationResult, ...]

    def to_dict(self) -> dict:
        return {
            "experiment": "calibrate",
            "n": self.n,
            "replications": self.replications,
            "seed": self.seed,
            "ci_level": self.ci_level,
            "redrawn": self.redrawn,
            "results": [r.to_dict() for r in self.results],
        }

    def result(self, measure: "Measure | str") -> CalibrationResult:
        key = Measure.parse(measure).value
        for r in self.results:
            if r.measure == key:
                return r
        raise KeyError(key)


def calibrate_theorem2(spec: RateSpec = CALIBRATION_SPEC, n: int = 2000, replications: int = 10_000,
                       seed: int = 0, measures: Sequence["Measure | str"] = CALIBRATION_MEASURES,
                       ci_level: float = 0.95, min_replications: int = 1000) -> CalibrationReport:
    """Compare the Monte Carlo variance of ``sqrt(n) (theta_hat - theta)`` with
    the mean plug-in variance, and report normal-interval coverage."""
    if replications < min_replications:
        raise ConfigError(f"need at least {min_replications} replications, got {replications}")
    counts, redrawn = simulate_rate_counts(spec, n, replications, np.random.default_rng(seed))
    z = z_quantile(ci_level)
    results = []
    for m in measures:
        m = Measure.parse(m)
        pm = m.pooling_measure
        truth = spec.true_value(pm)
        theta, var, ncorr = kernels.causal_pooled(counts, pm)
        dev = np.sqrt(n) * (theta - truth)
        emp = float(np.var(dev, ddof=1))
        mean_s2 = float(np.mean(var * n))
        cover = float(np.mean(np.abs(theta - truth) <= z * np.sqrt(var)))
        results.append(CalibrationResult(
            measure=pm.value,
            true_value=truth,
            mean_point=float(theta.mean()),
            se_mean_point=float(theta.std(ddof=1) / math.sqrt(replications)),
            empirical_variance=emp,
            mean_sigma2=mean_s2,
            ratio=emp / mean_s2 if mean_s2 > 0 else math.nan,
            coverage=cover,
            n_corrected=int((ncorr > 0).sum()),
        ))
    return CalibrationReport(n, replications, seed, ci_level, redrawn, tuple(results))


def replicate_estimators(counts: np.ndarray, measure: "Measure | str") -> dict[str, np.ndarray]:
    """FE, RE and causal estimates (pooling scale) for every replication."""
    fe, fe_var, re, re_var, tau2 = kernels.classical_pooled(counts, measure)
    causal, causal_var, _ = kernels.causal_pooled(counts, measure)
    return {
        "fe": fe, "fe_var": fe_var,
        "re": re, "re_var": re_var, "tau2": tau2,
        "causal": causal, "causal_var": causal_var,
    }


# --------------------------------------------------------------------------
# mismatch experiment


@dataclass
class MismatchReport:
    dgp: MismatchDGP
    replications: int
    seed: int
    redrawn: int
    # estimates[estimator][measure] -> natural-scale values per replication
    estimates: dict[str, dict[str, np.ndarray]]
    truth: dict[str, float]
    notes: list[str] = field(default_factory=list)

    def medians(self) -> dict[str, dict[str, float]]:
        return {e: {m: float(np.median(v)) for m, v in d.items()} for e, d in self.estimates.items()}

    def sign_consistent(self) -> np.ndarray:
        """Per replication: causal RD, log RR and log OR share one sign."""
        c = self.estimates["causal"]
        s = np.stack([np.sign(c["rd"]), np.sign(np.log(c["rr"])), np.sign(np.log(c["or"]))])
        return np.all(s == s[0], axis=0)

    def to_dict(self) -> dict:
        return {
            "experiment": "mismatch",
            "dgp": asdict(self.dgp),
            "replications": self.replications,
            "seed": self.seed,
            "redrawn": self.redrawn,
            "truth": self.truth,
            "medians": self.medians(),
            "sign_consistent_fraction": float(self.sign_consistent().mean()),
            "notes": list(self.notes),
        }

    def boxplot_rows(self) -> list[tuple[int, str, str, float]]:
        rows = []
        for e in ESTIMATORS:
            for m in ("rd", "rr", "or"):
                for i, v in enumerate(self.estimates[e][m]):
                    rows.append((i, e, m, float(v)))
        return rows


def mismatch_counts(dgp: MismatchDGP, replications: int, seed: int = 0,
                    on_degenerate: str = "resample") -> tuple[np.ndarray, int]:
    seeds = replication_seeds(seed, replications)
    out = np.empty((replications, 2, 4), dtype=np.int64)
    redrawn = 0
    for i, s in enumerate(seeds):
        out[i], extra = draw_mismatch_counts(dgp, s, on_degenerate)
        redrawn += extra
    return out, redrawn


def run_mismatch(dgp: MismatchDGP = MismatchDGP(), replications: int = 100, seed: int = 0,
                 on_degenerate: str = "resample") -> MismatchReport:
    """FE, RE (DerSimonian-Laird) and pooled-weight causal estimates over
    repeated draws from ``dgp``, with the target-population truth."""
    if replications < 1:
        raise ConfigError("replications must be positive")
    counts, redrawn = mismatch_counts(dgp, replications, seed, on_degenerate)
    estimates: dict[str, dict[str, np.ndarray]] = {e: {} for e in ESTIMATORS}
    for m in MISMATCH_MEASURES:
        res = replicate_estimators(counts, m)
        for e in ESTIMATORS:
            estimates[e][m.value] = np.exp(res[e]) if m.exponentiate else res[e]
    truth = {m.value: true_effect(dgp, m, "pooled") for m in MISMATCH_MEASURES}
    notes = ["ratio-measure studies with zero cells are Haldane-corrected (0.5 added to every cell)"]
    if redrawn:
        notes.append(f"{redrawn} draws with an empty arm were redrawn")
    return MismatchReport(dgp, replications, seed, redrawn, estimates, truth, notes)
