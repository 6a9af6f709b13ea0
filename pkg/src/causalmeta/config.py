"""Run configuration and simulation config files.

Simulation configs are INI files with up to three sections::

    [run]
    experiment = mismatch        # mismatch | calibrate | draw
    replications = 100
    seed = 0
    n = 2000                     # patients per meta-analysis (calibrate)
    ci_level = 0.95

    [dgp]                        # covariate-shift design (mismatch, draw)
    m1 = 1, 0
    m2 = 0, 1
    eta = 0.1
    beta1 = 0.36, -1.38
    beta0 = 2.94, -4.60
    n = 1000
    p_study = 0.5
    p_treat = 0.5

    [rates]                      # rate-level design (calibrate)
    study_probs = 0.4, 0.6
    treat_probs = 0.5, 0.3
    rates = 0.30 0.20; 0.60 0.45 # treated control per study, ';' between studies

Unknown sections or keys are rejected. ``#`` starts an inline comment.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .causal import WeightScheme
from .effects import CorrectionPolicy
from .errors import ConfigError, InvalidWeights
from .model import Measure
from .simulation import CALIBRATION_SPEC, MismatchDGP, RateSpec

EXPERIMENTS = ("mismatch", "calibrate", "draw")
OUTPUTS = ("text", "json", "csv", "svg")


@dataclass(frozen=True)
class RunConfig:
    measure: Measure = Measure.RR
    model: str = "all"
    weights: WeightScheme = field(default_factory=WeightScheme.pooled)
    ci_level: float = 0.95
    correction: CorrectionPolicy = CorrectionPolicy.HALDANE
    seed: int = 0
    output: str = "text"
    tau2: str = "dl"

    @classmethod
    def build(cls, **raw) -> "RunConfig":
        """Validate raw (string or typed) values; unknown keys are an error."""
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
        vals = {k: v for k, v in raw.items() if v is not None}
        try:
            if "measure" in vals:
                vals["measure"] = Measure.parse(vals["measure"])
            if "correction" in vals:
                vals["correction"] = CorrectionPolicy.parse(vals["correction"])
            if "weights" in vals:
                vals["weights"] = WeightScheme.parse(vals["weights"])
            if "ci_level" in vals:
                vals["ci_level"] = float(vals["ci_level"])
            if "seed" in vals:
                vals["seed"] = int(vals["seed"])
        except InvalidWeights:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        cfg = cls(**vals)
        if cfg.model not in ("fe", "re", "causal", "all"):
            raise ConfigError(f"unknown model {cfg.model!r}")
        if not 0.0 < cfg.ci_level < 1.0:
            raise ConfigError("ci-level must lie strictly between 0 and 1")
        if cfg.output not in OUTPUTS:
            raise ConfigError(f"unknown output format {cfg.output!r}")
        if cfg.tau2 not in ("dl", "pm"):
            raise ConfigError(f"unknown tau2 estimator {cfg.tau2!r}")
        return cfg


@dataclass(frozen=True)
class SimulationConfig:
    experiment: str = "mismatch"
    replications: int | None = None
    seed: int = 0
    n: int = 2000
    ci_level: float = 0.95
    dgp: MismatchDGP = field(default_factory=MismatchDGP)
    rates: RateSpec = CALIBRATION_SPEC

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {', '.join(EXPERIMENTS)}")
        if self.replications is not None and self.replications < 1:
            raise ConfigError("replications must be a positive integer")
        if self.n < 4:
            raise ConfigError("n must be at least 4")

    @property
    def effective_replications(self) -> int:
        if self.replications is not None:
            return self.replications
        return {"mismatch": 100, "calibrate": 10_000, "draw": 1}[self.experiment]


_RUN_KEYS = {"experiment": str, "replications": int, "seed": int, "n": int, "ci_level": float}
_DGP_KEYS = {"m1": "vec", "m2": "vec", "eta": float, "beta1": "vec", "beta0": "vec",
             "n": int, "p_study": float, "p_treat": float}
_RATE_KEYS = {"study_probs": "vec", "treat_probs": "vec", "rates": "pairs"}


def _vec(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.replace(",", " ").split())


def _pairs(text: str) -> tuple[tuple[float, float], ...]:
    out = []
    for chunk in text.split(";"):
        if chunk.strip():
            v = _vec(chunk)
            if len(v) != 2:
                raise ValueError(f"expected 'treated control' pair, got {chunk.strip()!r}")
            out.append((v[0], v[1]))
    return tuple(out)


def _convert(kind, text: str):
    if kind == "vec":
        return _vec(text)
    if kind == "pairs":
        return _pairs(text)
    return kind(text.strip())


def _section(parser, name: str, spec: dict) -> dict:
    if not parser.has_section(name):
        return {}
    out = {}
    for key, text in parser.items(name):
        if key not in spec:
            raise ConfigError(f"[{name}] unknown key {key!r}")
        try:
            out[key] = _convert(spec[key], text)
        except ValueError as exc:
            raise ConfigError(f"[{name}] {key}: {exc}") from None
    return out


def parse_simulation_config(text: str, source: str = "<config>") -> SimulationConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    extra = sorted(set(parser.sections()) - {"run", "dgp", "rates"})
    if extra:
        raise ConfigError(f"{source}: unknown sections {', '.join(extra)}")
    run = _section(parser, "run", _RUN_KEYS)
    dgp = MismatchDGP(**_section(parser, "dgp", _DGP_KEYS))
    rates_raw = _section(parser, "rates", _RATE_KEYS)
    rates = replace(CALIBRATION_SPEC, **rates_raw) if rates_raw else CALIBRATION_SPEC
    return SimulationConfig(dgp=dgp, rates=rates, **run)


def load_simulation_config(path: str | Path) -> SimulationConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc.strerror}") from None
    return parse_simulation_config(text, str(p))
