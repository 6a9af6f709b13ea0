"""Acceptance criteria, each run at its stated tolerance and time budget.

A one-line PASS/FAIL summary per criterion is printed at the end of the
pytest run.
"""

import math
import time

import numpy as np
import pytest

from causalmeta import (
    MetaDataset,
    contrast,
    pool_causal,
    pool_causal_collapsibility,
    pool_fixed,
    pool_random,
    study_effect,
    study_effects,
    tau2_dersimonian_laird,
)
from causalmeta import kernels
from causalmeta.compare import TABLE_HEADER, compare_batch, format_table
from causalmeta.io import save_dataset
from causalmeta.model import Measure, StudyTable
from causalmeta.simulation import (
    CALIBRATION_SPEC,
    MismatchDGP,
    MuTable,
    RateSpec,
    calibrate_theorem2,
    run_mismatch,
    simulate_rate_counts,
    simulate_rate_dataset,
    solve_pstar,
)

from conftest import random_counts


def test_c1_counterexample(record_criterion):
    mu_a = MuTable(mu11=0.5, mu10=0.5, mu01=0.9, mu00=0.1)
    mu_b = MuTable(mu11=0.5, mu10=0.5, mu01=0.1, mu00=0.9)
    solve_pstar(0.1, 0.9, mu_a)  # warm-up
    t0 = time.perf_counter()
    pa = solve_pstar(0.1, 0.9, mu_a)
    pb = solve_pstar(0.1, 0.9, mu_b)
    elapsed = (time.perf_counter() - t0) / 2
    ok = abs(pa - 0.36) <= 0.01 and abs(pb - 0.64) <= 0.01 and elapsed < 1e-3
    record_criterion("C1 counterexample", ok, f"p*={pa:.4f}, {pb:.4f}; {elapsed * 1e6:.1f} us per call")
    assert pa == pytest.approx(0.36, abs=0.01)
    assert pb == pytest.approx(0.64, abs=0.01)
    assert elapsed < 1e-3


def test_c2_collapsibility_identity(record_criterion):
    rng = np.random.default_rng(2024)
    worst = 0.0
    t0 = time.perf_counter()
    for _ in range(10_000):
        k = int(rng.integers(1, 11))
        ds = MetaDataset.from_counts(random_counts(rng, k, 1, 1000))
        for m in (Measure.RD, Measure.RR):
            a = pool_causal_collapsibility(ds, m).point
            b = pool_causal(ds, m).point
            worst = max(worst, abs(a - b) / max(1.0, abs(b)))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-12 and elapsed < 10.0
    record_criterion("C2 collapsibility", ok, f"max deviation {worst:.2e} over 10000 datasets; {elapsed:.2f} s")
    assert worst <= 1e-12
    assert elapsed < 10.0


def test_c3_variance_calibration(record_criterion):
    t0 = time.perf_counter()
    report = calibrate_theorem2(CALIBRATION_SPEC, n=2000, replications=10_000, seed=0)
    elapsed = time.perf_counter() - t0
    parts = []
    ok = elapsed < 120.0
    for r in report.results:
        good = 0.9 <= r.ratio <= 1.1 and 0.93 <= r.coverage <= 0.97
        ok &= good
        parts.append(f"{r.measure} ratio {r.ratio:.3f} cov {r.coverage:.4f}")
    record_criterion("C3 variance calibration", ok, "; ".join(parts) + f"; {elapsed:.2f} s")
    assert {r.measure for r in report.results} == {"rd", "logrr", "logor"}
    for r in report.results:
        assert 0.9 <= r.ratio <= 1.1, r
        assert 0.93 <= r.coverage <= 0.97, r
    assert elapsed < 120.0


def test_c4_mismatch_reversal(record_criterion):
    t0 = time.perf_counter()
    rep = run_mismatch(MismatchDGP(), replications=100, seed=0)
    elapsed = time.perf_counter() - t0
    med = rep.medians()
    consistent = rep.sign_consistent()
    checks = {
        "RE RR > 1": med["re"]["rr"] > 1.0,
        "causal RR < 1": med["causal"]["rr"] < 1.0,
        "causal RD < 0": med["causal"]["rd"] < 0.0,
        "RE RD < 0": med["re"]["rd"] < 0.0,
        "sign-consistent": bool(consistent.all()),
        "time": elapsed < 60.0,
    }
    detail = (f"median RR re={med['re']['rr']:.3f} causal={med['causal']['rr']:.3f}, "
              f"RD re={med['re']['rd']:.4f} causal={med['causal']['rd']:.4f}, "
              f"consistent {consistent.mean():.0%}; {elapsed:.2f} s")
    record_criterion("C4 mismatch", all(checks.values()), detail)
    assert all(checks.values()), checks


# homogeneous populations: identical event rates in every study, but unequal
# treatment allocation so that inverse-variance weighting is strictly more
# efficient than weighting by study size
HOMOGENEOUS_UNEQUAL = RateSpec(study_probs=(0.5, 0.5), treat_probs=(0.5, 0.05), rates=((0.3, 0.2), (0.3, 0.2)))


def test_c5_coincidence_regimes(record_criterion):
    # (a) tau2 = 0 makes RE identical to FE
    eff = study_effects(MetaDataset.from_counts([(20, 20, 10, 30), (22, 18, 11, 29), (40, 40, 20, 60)]), "rr")
    het = tau2_dersimonian_laird(eff)
    fe, re = pool_fixed(eff), pool_random(eff, het)
    exact = het.tau2 == 0.0 and (fe.point, fe.variance, fe.weights, fe.ci) == (re.point, re.variance, re.weights, re.ci)

    # (b) gap shrinks with n; FE at least as efficient as causal
    gaps = []
    for n in (1_000, 10_000, 100_000):
        c, _ = simulate_rate_counts(HOMOGENEOUS_UNEQUAL, n, 500, np.random.default_rng(n))
        fe_pt = kernels.classical_pooled(c, "rd")[0]
        ca_pt = kernels.causal_pooled(c, "rd")[0]
        gaps.append(float(np.mean(np.abs(fe_pt - ca_pt))))
        if n == 10_000:
            var_fe, var_causal = float(np.var(fe_pt, ddof=1)), float(np.var(ca_pt, ddof=1))
    decreasing = gaps[0] > gaps[1] > gaps[2]
    ok = exact and decreasing and var_fe <= var_causal
    record_criterion("C5 coincidence", ok,
                     f"tau2=0 exact={exact}; mean gaps {', '.join(f'{g:.2e}' for g in gaps)}; "
                     f"var FE {var_fe:.3e} <= causal {var_causal:.3e}")
    assert exact
    assert decreasing, gaps
    assert var_fe <= var_causal


HOMOGENEOUS_FIVE = RateSpec(study_probs=(0.2,) * 5, treat_probs=(0.5,) * 5, rates=((0.3, 0.2),) * 5)


def test_c6_table_structure(tmp_path, record_criterion):
    for seed in range(100):
        save_dataset(simulate_rate_dataset(HOMOGENEOUS_FIVE, 2000, seed, name=f"hom{seed:03d}"),
                     tmp_path / f"hom{seed:03d}.csv")
    result = compare_batch(tmp_path, ("rd", "rr", "or"))
    table = format_table(result)
    header = table.splitlines()[0].split("  ")
    header = tuple(h.strip() for h in header if h.strip())
    cell_format = all(
        " (± " in line and line.rstrip().endswith("%)")
        for line in table.splitlines()[2:5]
    )
    jac = {m: s["jaccard"].mean for m, s in result.summary().items()}
    ok = (header == TABLE_HEADER and cell_format and result.counts() == {"rd": 100, "rr": 100, "or": 100}
          and all(v > 0.8 for v in jac.values()))
    record_criterion("C6 table structure", ok, "mean Jaccard " + ", ".join(f"{m}={v:.3f}" for m, v in jac.items()))
    assert header == TABLE_HEADER
    assert cell_format
    assert result.counts() == {"rd": 100, "rr": 100, "or": 100}
    assert all(v > 0.8 for v in jac.values()), jac


def test_c7_gradients(record_criterion):
    rng = np.random.default_rng(7)
    h = 1e-5
    worst = 0.0
    for kind in Measure:
        phi = contrast(kind)
        for x, y in rng.uniform(0.05, 0.95, size=(100, 2)):
            g = phi.gradient(x, y)
            fd = ((phi.value(x + h, y) - phi.value(x - h, y)) / (2 * h),
                  (phi.value(x, y + h) - phi.value(x, y - h)) / (2 * h))
            for a, b in zip(g, fd):
                worst = max(worst, abs(a - b) / abs(a))
    record_criterion("C7 gradients", worst <= 1e-6, f"max relative error {worst:.2e}")
    assert worst <= 1e-6


def test_c8_hand_check(record_criterion):
    e = study_effect(StudyTable("worked", 10, 10, 5, 15), "logrr")
    d_theta = abs(e.theta_hat - math.log(2.0))
    d_var = abs(e.sigma2_hat - 0.2)
    ok = d_theta <= 1e-15 and d_var <= 1e-15
    record_criterion("C8 hand check", ok, f"|theta - log 2| = {d_theta:.1e}, |var - 0.2| = {d_var:.1e}")
    assert d_theta <= 1e-15
    assert d_var <= 1e-15
