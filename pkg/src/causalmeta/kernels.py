"""Batch kernels over many replicated meta-analyses.

Every kernel takes a ``(R, K, 4)`` count array (R replications of K studies,
columns n11, n10, n01, n00) and returns one value per replication. Two
implementations exist for each: a numba ``@njit`` loop and a vectorized numpy
version. The public names dispatch to numba when it is importable, unless the
environment variable ``CAUSALMETA_DISABLE_NUMBA`` is set to a true value.

Measure codes: 0 = RD, 1 = log RR, 2 = log OR (the pooling scales).
"""

from __future__ import annotations

import os

import numpy as np

from .model import Measure

RD, LOG_RR, LOG_OR = 0, 1, 2
_CODES = {Measure.RD: RD, Measure.LOG_RR: LOG_RR, Measure.LOG_OR: LOG_OR}

try:
    from numba import njit

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    NUMBA_AVAILABLE = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f

        return wrap if not args or not callable(args[0]) else args[0]


def _flag(name: str) -> bool:
    return os.environ.get(name, "").strip().lower() in ("1", "true", "yes", "on")


USE_NUMBA = NUMBA_AVAILABLE and not _flag("CAUSALMETA_DISABLE_NUMBA")
BACKEND = "numba" if USE_NUMBA else "numpy"


def measure_code(measure: "Measure | str") -> int:
    """Kernel code of the pooling-scale version of ``measure``."""
    return _CODES[Measure.parse(measure).pooling_measure]


# --------------------------------------------------------------------------
# numpy implementations


def _needs_correction_np(c: np.ndarray, code: int) -> np.ndarray:
    z = c == 0.0
    a, b, cc, d = z[..., 0], z[..., 1], z[..., 2], z[..., 3]
    if code == RD:
        return (a | b) & (cc | d)
    if code == LOG_RR:
        return a | cc | (b & d)
    return a | b | cc | d


def study_effects_np(counts: np.ndarray, code: int):
    """Per-study effects with Haldane correction; returns ``(theta, var, n_corrected)``."""
    c = np.array(counts, dtype=np.float64)
    fix = _needs_correction_np(c, code)
    c = c + 0.5 * fix[..., None]
    a, b, cc, d = c[..., 0], c[..., 1], c[..., 2], c[..., 3]
    n1, n0 = a + b, cc + d
    if code == RD:
        p1, p0 = a / n1, cc / n0
        theta = p1 - p0
        var = p1 * (1.0 - p1) / n1 + p0 * (1.0 - p0) / n0
    elif code == LOG_RR:
        theta = np.log(a / n1) - np.log(cc / n0)
        var = 1.0 / a - 1.0 / n1 + 1.0 / cc - 1.0 / n0
    else:
        theta = (np.log(a) - np.log(b)) - (np.log(cc) - np.log(d))
        var = 1.0 / a + 1.0 / b + 1.0 / cc + 1.0 / d
    return theta, var, fix.sum(axis=-1)


def inverse_variance_np(theta: np.ndarray, var: np.ndarray):
    """Fixed- and DerSimonian-Laird random-effects pooling per row.

    Returns ``(fe, fe_var, re, re_var, tau2)``.
    """
    k = theta.shape[-1]
    w = 1.0 / var
    sw = w.sum(axis=-1)
    fe = (w * theta).sum(axis=-1) / sw
    fe_var = 1.0 / sw
    if k < 2:
        tau2 = np.zeros_like(fe)
    else:
        q = (w * (theta - fe[..., None]) ** 2).sum(axis=-1)
        cdl = sw - (w * w).sum(axis=-1) / sw
        tau2 = np.maximum(0.0, (q - (k - 1)) / cdl)
    ws = 1.0 / (var + tau2[..., None])
    sws = ws.sum(axis=-1)
    re = (ws * theta).sum(axis=-1) / sws
    return fe, fe_var, re, 1.0 / sws, tau2


def _contrast_np(p1, p0, code):
    if code == RD:
        return p1 - p0, np.ones_like(p1), -np.ones_like(p0)
    if code == LOG_RR:
        return np.log(p1) - np.log(p0), 1.0 / p1, -1.0 / p0
    th = np.log(p1) - np.log1p(-p1) - np.log(p0) + np.log1p(-p0)
    return th, 1.0 / (p1 * (1.0 - p1)), -1.0 / (p0 * (1.0 - p0))


def _in_domain_np(p1, p0, code):
    if code == RD:
        return np.ones(p1.shape, dtype=bool)
    if code == LOG_RR:
        return (p1 > 0.0) & (p0 > 0.0)
    return (p1 > 0.0) & (p1 < 1.0) & (p0 > 0.0) & (p0 < 1.0)


def _pooled_np(c):
    n1 = c[..., 0] + c[..., 1]
    n0 = c[..., 2] + c[..., 3]
    nk = n1 + n0
    n = nk.sum(axis=-1)
    frac = nk / n[..., None]
    ps1, ps0 = c[..., 0] / n1, c[..., 2] / n0
    return n1, n0, nk, n, frac, ps1, ps0


def causal_pooled_np(counts: np.ndarray, code: int):
    """Pooled-weight causal estimate and its variance per replication.

    Returns ``(theta, var, n_corrected)`` with ``var = sigma2_total / n``.
    Studies are Haldane-corrected only in replications whose pooled rates fall
    outside the domain of the contrast.
    """
    c = np.array(counts, dtype=np.float64)
    n1, n0, nk, n, frac, ps1, ps0 = _pooled_np(c)
    p1 = (frac * ps1).sum(axis=-1)
    p0 = (frac * ps0).sum(axis=-1)
    bad = ~_in_domain_np(p1, p0, code)
    ncorr = np.zeros(c.shape[0], dtype=np.int64)
    if bad.any():
        fix = _needs_correction_np(c, code) & bad[:, None]
        c = c + 0.5 * fix[..., None]
        ncorr = fix.sum(axis=-1)
        n1, n0, nk, n, frac, ps1, ps0 = _pooled_np(c)
        p1 = (frac * ps1).sum(axis=-1)
        p0 = (frac * ps0).sum(axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        theta, v1, v0 = _contrast_np(p1, p0, code)
    nn = n[..., None]
    s1 = (nk**2 / (nn * n1) * ps1 * (1.0 - ps1)).sum(axis=-1) + (frac * ps1**2).sum(axis=-1) - p1**2
    s0 = (nk**2 / (nn * n0) * ps0 * (1.0 - ps0)).sum(axis=-1) + (frac * ps0**2).sum(axis=-1) - p0**2
    gamma = (frac * ps1 * ps0).sum(axis=-1) - p1 * p0
    s1, s0 = np.maximum(s1, 0.0), np.maximum(s0, 0.0)
    total = np.maximum(s1 * v1 * v1 + s0 * v0 * v0 + 2.0 * gamma * v1 * v0, 0.0)
    return theta, total / n, ncorr


# --------------------------------------------------------------------------
# numba implementations


@njit(cache=True)
def _needs_correction_nb(a, b, c, d, code):
    if code == 0:
        return (a == 0.0 or b == 0.0) and (c == 0.0 or d == 0.0)
    if code == 1:
        return a == 0.0 or c == 0.0 or (b == 0.0 and d == 0.0)
    return a == 0.0 or b == 0.0 or c == 0.0 or d == 0.0


@njit(cache=True)
def study_effects_nb(counts, code):
    r_, k_ = counts.shape[0], counts.shape[1]
    theta = np.empty((r_, k_))
    var = np.empty((r_, k_))
    ncorr = np.zeros(r_, dtype=np.int64)
    for r in range(r_):
        for k in range(k_):
            a = counts[r, k, 0]
            b = counts[r, k, 1]
            c = counts[r, k, 2]
            d = counts[r, k, 3]
            if _needs_correction_nb(a, b, c, d, code):
                a += 0.5
                b += 0.5
                c += 0.5
                d += 0.5
                ncorr[r] += 1
            n1 = a + b
            n0 = c + d
            if code == 0:
                p1 = a / n1
                p0 = c / n0
                theta[r, k] = p1 - p0
                var[r, k] = p1 * (1.0 - p1) / n1 + p0 * (1.0 - p0) / n0
            elif code == 1:
                theta[r, k] = np.log(a / n1) - np.log(c / n0)
                var[r, k] = 1.0 / a - 1.0 / n1 + 1.0 / c - 1.0 / n0
            else:
                theta[r, k] = (np.log(a) - np.log(b)) - (np.log(c) - np.log(d))
                var[r, k] = 1.0 / a + 1.0 / b + 1.0 / c + 1.0 / d
    return theta, var, ncorr


@njit(cache=True)
def inverse_variance_nb(theta, var):
    r_, k_ = theta.shape
    fe = np.empty(r_)
    fe_var = np.empty(r_)
    re = np.empty(r_)
    re_var = np.empty(r_)
    tau2 = np.zeros(r_)
    for r in range(r_):
        sw = 0.0
        swt = 0.0
        sww = 0.0
        for k in range(k_):
            w = 1.0 / var[r, k]
            sw += w
            swt += w * theta[r, k]
            sww += w * w
        m = swt / sw
        fe[r] = m
        fe_var[r] = 1.0 / sw
        if k_ >= 2:
            q = 0.0
            for k in range(k_):
                dev = theta[r, k] - m
                q += dev * dev / var[r, k]
            t = (q - (k_ - 1)) / (sw - sww / sw)
            tau2[r] = t if t > 0.0 else 0.0
        sws = 0.0
        swst = 0.0
        for k in range(k_):
            w = 1.0 / (var[r, k] + tau2[r])
            sws += w
            swst += w * theta[r, k]
        re[r] = swst / sws
        re_var[r] = 1.0 / sws
    return fe, fe_var, re, re_var, tau2


@njit(cache=True)
def _in_domain_nb(p1, p0, code):
    if code == 0:
        return True
    if code == 1:
        return p1 > 0.0 and p0 > 0.0
    return 0.0 < p1 < 1.0 and 0.0 < p0 < 1.0


@njit(cache=True)
def _pooled_rates_nb(c):
    k_ = c.shape[0]
    n = 0.0
    for k in range(k_):
        n += c[k, 0] + c[k, 1] + c[k, 2] + c[k, 3]
    p1 = 0.0
    p0 = 0.0
    for k in range(k_):
        nk = c[k, 0] + c[k, 1] + c[k, 2] + c[k, 3]
        p1 += nk / n * (c[k, 0] / (c[k, 0] + c[k, 1]))
        p0 += nk / n * (c[k, 2] / (c[k, 2] + c[k, 3]))
    return n, p1, p0


@njit(cache=True)
def causal_pooled_nb(counts, code):
    r_, k_ = counts.shape[0], counts.shape[1]
    theta = np.empty(r_)
    out_var = np.empty(r_)
    ncorr = np.zeros(r_, dtype=np.int64)
    c = np.empty((k_, 4))
    for r in range(r_):
        for k in range(k_):
            for j in range(4):
                c[k, j] = counts[r, k, j]
        n, p1, p0 = _pooled_rates_nb(c)
        if not _in_domain_nb(p1, p0, code):
            for k in range(k_):
                if _needs_correction_nb(c[k, 0], c[k, 1], c[k, 2], c[k, 3], code):
                    for j in range(4):
                        c[k, j] += 0.5
                    ncorr[r] += 1
            n, p1, p0 = _pooled_rates_nb(c)
        if code == 0:
            theta[r] = p1 - p0
            v1 = 1.0
            v0 = -1.0
        elif code == 1:
            theta[r] = np.log(p1) - np.log(p0)
            v1 = 1.0 / p1
            v0 = -1.0 / p0
        else:
            theta[r] = np.log(p1) - np.log1p(-p1) - np.log(p0) + np.log1p(-p0)
            v1 = 1.0 / (p1 * (1.0 - p1))
            v0 = -1.0 / (p0 * (1.0 - p0))
        w1 = 0.0
        w0 = 0.0
        b1 = 0.0
        b0 = 0.0
        g = 0.0
        for k in range(k_):
            n1 = c[k, 0] + c[k, 1]
            n0 = c[k, 2] + c[k, 3]
            nk = n1 + n0
            frac = nk / n
            q1 = c[k, 0] / n1
            q0 = c[k, 2] / n0
            w1 += nk * nk / (n * n1) * q1 * (1.0 - q1)
            w0 += nk * nk / (n * n0) * q0 * (1.0 - q0)
            b1 += frac * q1 * q1
            b0 += frac * q0 * q0
            g += frac * q1 * q0
        s1 = w1 + b1 - p1 * p1
        s0 = w0 + b0 - p0 * p0
        g -= p1 * p0
        if s1 < 0.0:
            s1 = 0.0
        if s0 < 0.0:
            s0 = 0.0
        total = s1 * v1 * v1 + s0 * v0 * v0 + 2.0 * g * v1 * v0
        if total < 0.0:
            total = 0.0
        out_var[r] = total / n
    return theta, out_var, ncorr


# --------------------------------------------------------------------------
# dispatch


def _as_counts(counts) -> np.ndarray:
    c = np.ascontiguousarray(counts, dtype=np.float64)
    if c.ndim != 3 or c.shape[2] != 4:
        raise ValueError(f"expected a (R, K, 4) count array, got shape {c.shape}")
    return c


def study_effects(counts, measure):
    c = _as_counts(counts)
    code = measure_code(measure)
    return study_effects_nb(c, code) if USE_NUMBA else study_effects_np(c, code)


def inverse_variance(theta, var):
    theta = np.ascontiguousarray(theta, dtype=np.float64)
    var = np.ascontiguousarray(var, dtype=np.float64)
    return inverse_variance_nb(theta, var) if USE_NUMBA else inverse_variance_np(theta, var)


def causal_pooled(counts, measure):
    c = _as_counts(counts)
    code = measure_code(measure)
    return causal_pooled_nb(c, code) if USE_NUMBA else causal_pooled_np(c, code)


def classical_pooled(counts, measure):
    """``(fe, fe_var, re, re_var, tau2)`` per replication on the pooling scale."""
    theta, var, _ = study_effects(counts, measure)
    return inverse_variance(theta, var)
