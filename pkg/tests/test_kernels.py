import os
import subprocess
import sys

import numpy as np
import pytest

from causalmeta import MetaDataset, kernels, pool_causal, pool_fixed, pool_random, study_effects
from causalmeta.model import Measure

CODES = [(kernels.RD, "rd"), (kernels.LOG_RR, "rr"), (kernels.LOG_OR, "or")]


def _counts(seed, r=200, k=4, zeros=False):
    rng = np.random.default_rng(seed)
    c = rng.integers(0 if zeros else 1, 60, size=(r, k, 4)).astype(np.float64)
    # keep both arms non-empty
    c[..., 1] += (c[..., 0] + c[..., 1] == 0)
    c[..., 3] += (c[..., 2] + c[..., 3] == 0)
    return c


@pytest.mark.parametrize("code, measure", CODES)
@pytest.mark.parametrize("zeros", [False, True])
def test_numba_matches_numpy(code, measure, zeros):
    c = _counts(3, zeros=zeros)
    for a, b in zip(kernels.study_effects_nb(c, code), kernels.study_effects_np(c, code)):
        np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-15)
    theta, var, _ = kernels.study_effects_np(c, code)
    for a, b in zip(kernels.inverse_variance_nb(theta, var), kernels.inverse_variance_np(theta, var)):
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-15)
    for a, b in zip(kernels.causal_pooled_nb(c, code), kernels.causal_pooled_np(c, code)):
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-15)


@pytest.mark.parametrize("code, measure", CODES)
@pytest.mark.parametrize("zeros", [False, True])
def test_kernels_match_scalar_library(code, measure, zeros):
    c = _counts(5, r=40, zeros=zeros)
    fe, fe_var, re, re_var, tau2 = kernels.classical_pooled(c, measure)
    causal, causal_var, _ = kernels.causal_pooled(c, measure)
    for i in range(c.shape[0]):
        ds = MetaDataset.from_counts(c[i].astype(int).tolist())
        eff = study_effects(ds, measure)
        f, r = pool_fixed(eff), pool_random(eff)
        assert fe[i] == pytest.approx(f.theta, rel=1e-12, abs=1e-15)
        assert fe_var[i] == pytest.approx(f.variance, rel=1e-12)
        assert re[i] == pytest.approx(r.theta, rel=1e-12, abs=1e-15)
        assert re_var[i] == pytest.approx(r.variance, rel=1e-12)
        assert tau2[i] == pytest.approx(r.tau2, rel=1e-10, abs=1e-15)
        p = pool_causal(ds, measure)
        assert causal[i] == pytest.approx(p.theta, rel=1e-12, abs=1e-15)
        assert causal_var[i] == pytest.approx(p.variance, rel=1e-12, abs=1e-18)


def test_single_study_rows():
    c = _counts(7, r=10, k=1)
    fe, _, re, _, tau2 = kernels.classical_pooled(c, "rd")
    np.testing.assert_array_equal(fe, re)
    np.testing.assert_array_equal(tau2, 0.0)


def test_bad_shape_rejected():
    with pytest.raises(ValueError):
        kernels.causal_pooled(np.ones((3, 4)), "rd")


def test_measure_codes():
    assert kernels.measure_code(Measure.RR) == kernels.LOG_RR
    assert kernels.measure_code("logor") == kernels.LOG_OR


def test_environment_flag_selects_numpy_backend():
    env = dict(os.environ, CAUSALMETA_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", "from causalmeta import kernels; print(kernels.BACKEND)"],
                         capture_output=True, text=True, env=env, check=True)
    assert out.stdout.strip() == "numpy"
    env["CAUSALMETA_DISABLE_NUMBA"] = "0"
    out = subprocess.run([sys.executable, "-c", "from causalmeta import kernels; print(kernels.BACKEND)"],
                         capture_output=True, text=True, env=env, check=True)
    assert out.stdout.strip() == ("numba" if kernels.NUMBA_AVAILABLE else "numpy")
