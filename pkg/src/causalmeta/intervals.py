"""Normal-approximation intervals and interval overlap."""

from __future__ import annotations

import math
from functools import lru_cache

from scipy.stats import norm

from .model import Measure


def _exp(x: float) -> float:
    # very wide log-scale intervals saturate instead of raising
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


@lru_cache(maxsize=64)
def z_quantile(level: float) -> float:
    """Two-sided normal critical value for a ``level`` interval."""
    if not 0.0 < level < 1.0:
        raise ValueError(f"confidence level must be in (0, 1), got {level}")
    return float(norm.ppf(0.5 + level / 2.0))


def report_interval(measure: Measure, theta: float, variance: float,
                    level: float = 0.95) -> tuple[float, float, float]:
    """``(point, low, high)`` on the reporting scale from a pooling-scale estimate."""
    half = z_quantile(level) * math.sqrt(max(variance, 0.0))
    lo, hi = theta - half, theta + half
    if measure.exponentiate:
        return _exp(theta), _exp(lo), _exp(hi)
    return theta, lo, hi


def interval_jaccard(a: tuple[float, float], b: tuple[float, float]) -> float:
    """Length of the intersection over length of the union of two intervals."""
    (a0, a1), (b0, b1) = sorted(a), sorted(b)
    inter = max(0.0, min(a1, b1) - max(a0, b0))
    union = (a1 - a0) + (b1 - b0) - inter
    if not union > 0.0:
        raise ValueError("Jaccard index undefined: both intervals have zero length")
    return min(1.0, inter / union)
