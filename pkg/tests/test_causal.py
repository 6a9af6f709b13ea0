import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from causalmeta import (
    MetaDataset,
    WeightScheme,
    bootstrap_variance,
    pool_causal,
    pool_causal_collapsibility,
    pool_random,
    pooled_arm_rates,
    study_effect,
    study_effects,
    theorem2_variance,
)
from causalmeta.causal import collapsibility_weights
from causalmeta.classical import HeterogeneityEstimate
from causalmeta.errors import DomainError, InvalidWeights, VarianceUnavailable, WeightLengthMismatch
from causalmeta.model import Method, Scale

# two equal-size studies, treated rates (0.2, 0.6), control rates (0.1, 0.5)
EQUAL_PAIR = MetaDataset.from_counts([(2, 8, 1, 9), (6, 4, 5, 5)])

count = st.integers(1, 1000)


@st.composite
def datasets(draw, min_k=1, max_k=10):
    k = draw(st.integers(min_k, max_k))
    return MetaDataset.from_counts([draw(st.tuples(count, count, count, count)) for _ in range(k)])


def test_single_study_rates(worked_example):
    for w in ("pooled", "uniform", "custom:1"):
        assert pooled_arm_rates(worked_example, w) == (0.5, 0.25)


def test_pooled_rates_equal_sizes():
    psi1, psi0 = pooled_arm_rates(EQUAL_PAIR, "pooled")
    assert psi1 == pytest.approx(0.4, rel=1e-15)
    assert psi0 == pytest.approx(0.3, rel=1e-15)
    assert pooled_arm_rates(EQUAL_PAIR, WeightScheme.custom([1.0, 0.0]))[0] == 0.2


def test_causal_rr_differs_from_random_effects_limit():
    causal = pool_causal(EQUAL_PAIR, "rr")
    assert causal.point == pytest.approx(4 / 3, rel=1e-14)
    # large-sample random effects with uniform weights: geometric mean of study RRs
    eff = study_effects(MetaDataset.from_counts([(2_000_000, 8_000_000, 1_000_000, 9_000_000),
                                                 (6_000_000, 4_000_000, 5_000_000, 5_000_000)]), "rr")
    re = pool_random(eff, HeterogeneityEstimate(1e9, 0.0, "dl", 2))
    assert re.point == pytest.approx(math.sqrt(0.2 * 0.6 / (0.1 * 0.5)), rel=1e-6)
    assert re.point == pytest.approx(1.549, abs=5e-4)


@pytest.mark.parametrize("measure, null", [("rd", 0.0), ("rr", 1.0), ("or", 1.0)])
def test_identical_rates_give_null(measure, null):
    ds = MetaDataset.from_counts([(3, 7, 3, 7), (30, 70, 60, 140), (1, 9, 2, 18)])
    assert pool_causal(ds, measure).point == pytest.approx(null, abs=1e-15)


def test_estimate_fields(three_study):
    est = pool_causal(three_study, "rr")
    assert est.method is Method.CAUSAL and est.scale is Scale.LOG and est.tau2 is None
    assert sum(est.weights) == pytest.approx(1.0, abs=1e-12)
    assert est.ci_low <= est.point <= est.ci_high
    assert est.theta == pytest.approx(math.log(est.point), rel=1e-14)


def test_ratio_interval_is_symmetric_on_log_scale(three_study):
    est = pool_causal(three_study, "or")
    assert math.log(est.ci_high) - est.theta == pytest.approx(est.theta - math.log(est.ci_low), rel=1e-12)


def test_theorem2_single_study_reduces_to_rd_variance(worked_example):
    parts = theorem2_variance(worked_example, "rd")
    e = study_effect(worked_example.studies[0], "rd")
    assert parts.gamma == pytest.approx(0.0, abs=1e-15)
    assert parts.sigma2_total == pytest.approx(worked_example.n * e.sigma2_hat, rel=1e-13)


def test_theorem2_degenerate_arm_has_zero_variance():
    ds = MetaDataset.from_counts([(0, 10, 3, 7), (0, 20, 5, 15)])
    parts = theorem2_variance(ds, "rd")
    assert parts.sigma2_arm[0] == 0.0
    assert parts.sigma2_arm[1] > 0.0


def test_theorem2_hand_values():
    # two equal studies of 20: rates (0.2, 0.6) treated, (0.1, 0.5) control
    parts = theorem2_variance(EQUAL_PAIR, "rd")
    n = 40
    # n_k^2 / (n n_k(a)) = 400 / 400 for every study and arm
    within1 = 0.2 * 0.8 + 0.6 * 0.4
    between1 = 0.5 * 0.04 + 0.5 * 0.36 - 0.16
    within0 = 0.1 * 0.9 + 0.5 * 0.5
    between0 = 0.5 * 0.01 + 0.5 * 0.25 - 0.09
    gamma = 0.5 * 0.02 + 0.5 * 0.30 - 0.12
    assert parts.sigma2_arm == pytest.approx((within1 + between1, within0 + between0), rel=1e-13)
    assert parts.gamma == pytest.approx(gamma, rel=1e-13)
    expected = within1 + between1 + within0 + between0 - 2 * gamma
    assert parts.sigma2_total == pytest.approx(expected, rel=1e-13)
    assert pool_causal(EQUAL_PAIR, "rd").variance == pytest.approx(expected / n, rel=1e-13)


def test_collapsibility_rd_example():
    ds = MetaDataset.from_counts([(4, 6, 5, 5), (6, 4, 3, 7)])  # RD -0.1 and +0.3
    assert pool_causal_collapsibility(ds, "rd").point == pytest.approx(0.1, rel=1e-14)


def test_collapsibility_single_study(worked_example):
    assert pool_causal_collapsibility(worked_example, "rd").point == 0.25


def test_collapsibility_rr_weights_use_baseline_risk():
    w = collapsibility_weights(EQUAL_PAIR, "rr")
    np.testing.assert_allclose(w, [0.5 * 0.1 / 0.3, 0.5 * 0.5 / 0.3], rtol=1e-14)


def test_collapsibility_rejects_odds_ratio(three_study):
    with pytest.raises(DomainError):
        pool_causal_collapsibility(three_study, "or")


def test_collapsibility_rr_zero_control_rate():
    ds = MetaDataset.from_counts([(3, 7, 0, 10), (5, 5, 2, 8)])
    with pytest.raises(DomainError):
        pool_causal_collapsibility(ds, "rr", correction="reject")
    assert pool_causal_collapsibility(ds, "rr").warnings


@settings(max_examples=300)
@given(datasets())
def test_collapsibility_identity(ds):
    for m in ("rd", "rr"):
        a, b = pool_causal_collapsibility(ds, m), pool_causal(ds, m)
        assert a.point == pytest.approx(b.point, rel=1e-12, abs=1e-12)
        assert a.variance == pytest.approx(b.variance, rel=1e-12)


@given(datasets())
def test_contrast_signs_agree(ds):
    rd = pool_causal(ds, "rd").point
    lrr = math.log(pool_causal(ds, "rr").point)
    lor = math.log(pool_causal(ds, "or").point)
    if rd == 0.0:
        assert abs(lrr) < 1e-12 and abs(lor) < 1e-12
    else:
        assert np.sign(rd) == np.sign(lrr) == np.sign(lor)


@given(datasets(min_k=2))
def test_custom_weights_equal_to_sizes_match_pooled_point(ds):
    frac = ds.counts().sum(axis=1) / ds.n
    frac[-1] = 1.0 - frac[:-1].sum()
    for m in ("rd", "rr", "or"):
        a = pool_causal(ds, m, WeightScheme.custom(frac))
        b = pool_causal(ds, m, "pooled")
        assert a.point == pytest.approx(b.point, rel=1e-12, abs=1e-14)


def test_uniform_weights_use_fixed_weight_variance(three_study):
    est = pool_causal(three_study, "rd", "uniform")
    counts = three_study.counts()
    n1 = counts[:, 0] + counts[:, 1]
    n0 = counts[:, 2] + counts[:, 3]
    p1, p0 = counts[:, 0] / n1, counts[:, 2] / n0
    expected = np.sum(p1 * (1 - p1) / n1) / 9 + np.sum(p0 * (1 - p0) / n0) / 9
    assert est.variance == pytest.approx(expected, rel=1e-13)
    assert any("fixed" in w for w in est.warnings)


def test_theorem2_requires_pooled_weights(three_study):
    with pytest.raises(VarianceUnavailable):
        pool_causal(three_study, "rd", "uniform", variance="theorem2")


def test_bootstrap_close_to_fixed_weight_variance(three_study):
    boot, dropped = bootstrap_variance(three_study, "rd", "uniform", n_boot=4000, seed=1)
    fixed = pool_causal(three_study, "rd", "uniform").variance
    assert dropped == 0
    assert boot == pytest.approx(fixed, rel=0.1)
    est = pool_causal(three_study, "rd", "uniform", variance="bootstrap", n_boot=500, seed=3)
    assert est.variance == bootstrap_variance(three_study, "rd", "uniform", 500, 3)[0]


def test_weight_validation(three_study):
    with pytest.raises(InvalidWeights):
        WeightScheme.custom([0.5, 0.6])
    with pytest.raises(InvalidWeights):
        WeightScheme.custom([1.5, -0.5])
    with pytest.raises(InvalidWeights):
        WeightScheme.parse("custom:a,b")
    with pytest.raises(WeightLengthMismatch):
        pool_causal(three_study, "rd", "custom:0.3,0.7")
    assert WeightScheme.parse("custom:0.25,0.75").spec() == "custom:0.25,0.75"


def test_zero_pooled_rate_needs_correction():
    ds = MetaDataset.from_counts([(0, 10, 2, 8), (0, 20, 1, 19)])
    with pytest.raises(DomainError):
        pool_causal(ds, "rr", correction="reject")
    est = pool_causal(ds, "rr")
    assert est.point > 0.0
    assert any("continuity" in w for w in est.warnings)
    # RD is defined at the boundary and needs no correction
    assert pool_causal(ds, "rd", correction="reject").point < 0.0


def test_consistency_on_heterogeneous_design():
    from causalmeta import kernels
    from causalmeta.simulation import CALIBRATION_SPEC, simulate_rate_counts

    truth = CALIBRATION_SPEC.true_value("rd")
    mean_err = []
    for n in (500, 5_000, 50_000):
        c, _ = simulate_rate_counts(CALIBRATION_SPEC, n, 1000, np.random.default_rng(n))
        theta, var, _ = kernels.causal_pooled(c, "rd")
        err = np.abs(theta - truth)
        mean_err.append(err.mean())
        assert np.mean(err < 3 * np.sqrt(var)) >= 0.99
    assert mean_err[0] > mean_err[1] > mean_err[2]
