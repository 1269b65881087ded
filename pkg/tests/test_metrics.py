"""Risk/utility metric tests.

The two computation routes (empirical tallies over replicates vs closed-form
mixtures over the size histogram) are checked against each other and against
a fully hand-counted miniature example.
"""

import numpy as np
import pytest

from countsynth.errors import ValidationError
from countsynth.metrics import (
    ensemble_report,
    inverse_logit,
    loss_l1_analytic,
    loss_l1_empirical,
    reproduction_probability,
    risk_utility_point,
    tau_analytic,
    tau_empirical,
    total_coverage,
    total_empirical,
    total_report,
    total_variance_analytic,
)
from countsynth.synthesis import (
    MechanismConfig,
    SyntheticEnsemble,
    ZeroPolicy,
    synthesize,
    table_hash,
)
from countsynth.table import ContingencyTable, TableSchema, histogram

from countsynth.distributions import GafParams, NbiParams, gaf_pmf, nbi_pmf


def _one_var_table(counts):
    counts = np.asarray(counts, dtype=np.int64)
    schema = TableSchema((
        ("CELL", tuple(f"c{i:06d}" for i in range(counts.size))),
    ))
    return ContingencyTable(schema, counts)


def _fixed_ensemble(table, replicates):
    replicates = np.asarray(replicates, dtype=np.int64)
    config = MechanismConfig(family="poisson", sigma=None, nu=None,
                             zero_policy=ZeroPolicy.keep(),
                             m=replicates.shape[0], master_seed=0)
    return SyntheticEnsemble(schema=table.schema, config=config,
                             source_hash=table_hash(table),
                             replicates=replicates, clamped=0)


# --- hand-counted miniature ----------------------------------------------


def test_tau_empirical_hand_counts():
    table = _one_var_table([1, 1, 2])
    ens = _fixed_ensemble(table, [[1, 2, 2]])
    tau = tau_empirical(table, ens, ks=[1, 2]).set_index("k")

    assert tau.loc[1, "p_orig"] == pytest.approx(2 / 3)
    assert tau.loc[2, "p_orig"] == pytest.approx(1 / 3)
    assert tau.loc[1, "p_syn"] == pytest.approx(1 / 3)
    assert tau.loc[2, "p_syn"] == pytest.approx(2 / 3)
    assert tau.loc[1, "p_syn_given_orig"] == pytest.approx(1 / 2)
    assert tau.loc[2, "p_syn_given_orig"] == pytest.approx(1.0)
    assert tau.loc[1, "p_orig_given_syn"] == pytest.approx(1.0)
    assert tau.loc[2, "p_orig_given_syn"] == pytest.approx(1 / 2)
    assert tau.loc[1, "cells_at_k"] == 2
    assert tau.loc[2, "occurrences_of_k"] == 2


def test_tau_product_identity_is_exact():
    """p_syn * p_orig_given_syn == p_orig * p_syn_given_orig, replicate math."""
    rng = np.random.default_rng(4)
    table = _one_var_table(rng.integers(0, 6, size=400))
    reps = rng.integers(0, 6, size=(7, 400))
    tau = tau_empirical(table, _fixed_ensemble(table, reps))
    mask = tau[["p_syn", "p_orig", "p_syn_given_orig",
                "p_orig_given_syn"]].notna().all(axis=1)
    lhs = tau.loc[mask, "p_syn"] * tau.loc[mask, "p_orig_given_syn"]
    rhs = tau.loc[mask, "p_orig"] * tau.loc[mask, "p_syn_given_orig"]
    assert np.allclose(lhs, rhs, rtol=0.0, atol=1e-15)
    assert mask.sum() >= 5


def test_tau_empirical_nan_when_no_trials():
    table = _one_var_table([1, 1, 2])
    ens = _fixed_ensemble(table, [[1, 2, 2]])
    tau = tau_empirical(table, ens, ks=[5]).set_index("k")
    assert np.isnan(tau.loc[5, "p_syn_given_orig"])
    assert np.isnan(tau.loc[5, "p_orig_given_syn"])
    assert tau.loc[5, "p_orig"] == 0.0


def test_reproduction_probability_frozen_values():
    # 40-digit reference values for P(round(W) == k | mu == k)
    assert abs(reproduction_probability(1, 2.0, -0.5)
               - 0.164641906517796002) < 1e-15
    assert abs(reproduction_probability(3, 1.0, 0.0)
               - 0.382554071279114926) < 1e-15
    assert abs(reproduction_probability(5, 0.5, -0.25)
               - 0.779384610322816516) < 1e-15


def test_reproduction_probability_equals_pmf_at_k():
    for k in (1, 2, 7):
        for sigma, nu in [(0.5, 0.0), (1.0, -0.25), (2.0, -0.5)]:
            want = gaf_pmf(k, GafParams(float(k), sigma, nu))
            got = reproduction_probability(k, sigma, nu)
            assert abs(got - want) < 1e-14


def test_reproduction_probability_k1_ignores_nu():
    base = reproduction_probability(1, 1.5, 0.0)
    for nu in (-0.5, -0.25, 0.5, 1.0):
        assert abs(reproduction_probability(1, 1.5, nu) - base) < 1e-15


def test_tau_analytic_mixture_hand_check():
    """p_syn(k) must be the histogram mixture of the family pmf."""
    table = _one_var_table([0, 0, 1, 1, 1, 3])
    hist = histogram(table)
    sigma = 1.0
    tau = tau_analytic(hist, "nbi", sigma=sigma, ks=[0, 1, 2, 3]) \
        .set_index("k")
    for k in (0, 1, 2, 3):
        want = (3 * nbi_pmf(k, NbiParams(1.0, sigma))
                + 1 * nbi_pmf(k, NbiParams(3.0, sigma))
                + (2.0 if k == 0 else 0.0)) / 6.0
        assert tau.loc[k, "p_syn"] == pytest.approx(want, rel=1e-12)
    # attribution follows from the product identity
    k = 1
    repro = nbi_pmf(1, NbiParams(1.0, sigma))
    want_attr = (3 / 6) * repro / tau.loc[1, "p_syn"]
    assert tau.loc[1, "p_orig_given_syn"] == pytest.approx(want_attr, rel=1e-12)


def test_tau_analytic_zero_policies_enter_the_mixture():
    table = _one_var_table([0, 0, 0, 0, 1])
    hist = histogram(table)
    keep = tau_analytic(hist, "nbi", sigma=1.0, ks=[0]).set_index("k")
    assert keep.loc[0, "p_syn"] == pytest.approx(
        (4 + nbi_pmf(0, NbiParams(1.0, 1.0))) / 5)
    bern = tau_analytic(hist, "nbi", sigma=1.0,
                        zero_policy=ZeroPolicy.bernoulli(0.25),
                        ks=[0, 1]).set_index("k")
    assert bern.loc[0, "p_syn"] == pytest.approx(
        (4 * 0.75 + nbi_pmf(0, NbiParams(1.0, 1.0))) / 5)
    assert bern.loc[1, "p_syn"] == pytest.approx(
        (4 * 0.25 + nbi_pmf(1, NbiParams(1.0, 1.0))) / 5)


def test_tau_empirical_matches_analytic_on_fixture(bench10k):
    config = MechanismConfig(family="gaf", sigma=1.0, nu=-0.25,
                             zero_policy=ZeroPolicy.keep(), m=60,
                             master_seed=2024)
    ens = synthesize(bench10k, config)
    emp = tau_empirical(bench10k, ens, ks=list(range(0, 8)))
    ana = tau_analytic(histogram(bench10k), "gaf", sigma=1.0, nu=-0.25,
                       ks=list(range(0, 8)))
    merged = emp.merge(ana, on="k", suffixes=("_e", "_a"))
    for _, row in merged.iterrows():
        if np.isnan(row["p_syn_given_orig_e"]):
            continue
        se = max(row["se_p_syn_given_orig"], 1e-12)
        z = (row["p_syn_given_orig_e"] - row["p_syn_given_orig_a"]) / se
        assert abs(z) < 4.0, row["k"]


# --- loss -----------------------------------------------------------------


def test_loss_empirical_hand_counts():
    table = _one_var_table([1, 1, 2, 0])
    ens = _fixed_ensemble(table, [[1, 2, 2, 9]])
    res = loss_l1_empirical(table, ens)
    assert res.value == pytest.approx(1.0)     # (1-1)^2+(1-2)^2+(2-2)^2
    assert res.cells_used == 3
    assert res.zero_cells_excluded == 1


def test_loss_analytic_formula():
    table = _one_var_table([0, 2, 2, 5])
    hist = histogram(table)
    res = loss_l1_analytic(hist, "gaf", sigma=1.0, nu=-0.5, m=1)
    want = 2 * 2.0**-0.5 + 5.0**-0.5
    assert res.value == pytest.approx(want, rel=1e-12)
    res_m = loss_l1_analytic(hist, "gaf", sigma=1.0, nu=-0.5, m=10)
    assert res_m.value == pytest.approx(want / 10, rel=1e-12)
    nbi = loss_l1_analytic(hist, "nbi", sigma=0.5, m=1)
    assert nbi.value == pytest.approx((2 + 0.5 * 4) * 2 + 5 + 0.5 * 25,
                                      rel=1e-12)


def test_loss_empirical_tracks_analytic(bench10k):
    config = MechanismConfig(family="nbi", sigma=0.5, nu=None,
                             zero_policy=ZeroPolicy.keep(), m=40,
                             master_seed=5150)
    ens = synthesize(bench10k, config)
    emp = loss_l1_empirical(bench10k, ens).value
    ana = loss_l1_analytic(histogram(bench10k), "nbi", sigma=0.5, m=40).value
    assert abs(emp - ana) / ana < 0.15


# --- grand totals ---------------------------------------------------------


def test_total_variance_and_coverage_closed_forms():
    table = _one_var_table([0, 1, 1, 4])
    hist = histogram(table)
    var = total_variance_analytic(hist, "gaf", sigma=1.0, nu=0.0)
    assert var == pytest.approx(3.0)           # three nonzero cells, var 1
    var_b = total_variance_analytic(hist, "gaf", sigma=1.0, nu=0.0,
                                    zero_policy=ZeroPolicy.bernoulli(0.5))
    assert var_b == pytest.approx(3.0 + 0.25)
    assert total_coverage(1.0, 1.0) == pytest.approx(0.6826894921370859)
    assert total_coverage(2.0, 1.0) == pytest.approx(0.9544997361036416)
    assert total_coverage(0.0, 1.0) == 0.0


def test_total_report_grid(bench10k):
    rep = total_report(histogram(bench10k), "gaf", sigma=1.0, nu=0.0)
    assert {"d", "total_sd", "coverage"} <= set(rep.columns)
    assert rep["coverage"].is_monotonic_increasing
    assert (rep["total_sd"] > 0).all()


def test_total_empirical_hand_counts():
    table = _one_var_table([1, 1, 2])   # n = 4
    ens = _fixed_ensemble(table, [[1, 2, 2], [1, 1, 2], [0, 1, 1]])
    # totals 5, 4, 2 -> |delta| = 1, 0, 2
    rep = total_empirical(table, ens, d_values=[0.5, 1.5, 2.5])
    freq = rep.set_index("d")["coverage"]
    assert freq.loc[0.5] == pytest.approx(1 / 3)
    assert freq.loc[1.5] == pytest.approx(2 / 3)
    assert freq.loc[2.5] == pytest.approx(1.0)


# --- risk/utility ---------------------------------------------------------


def test_inverse_logit_values_and_stability():
    assert inverse_logit(0.0) == pytest.approx(0.5)
    assert inverse_logit(3.0) == pytest.approx(1 / (1 + np.exp(-3.0)))
    assert inverse_logit(-3.0) == pytest.approx(1 - inverse_logit(3.0))
    # no overflow warnings and saturates cleanly
    with np.errstate(all="raise"):
        assert inverse_logit(800.0) == 1.0
        assert inverse_logit(-800.0) == 0.0
        vec = inverse_logit(np.array([-800.0, 0.0, 800.0]))
    assert vec.tolist() == [0.0, 0.5, 1.0]


def test_risk_utility_noiseless_limit(bench10k):
    hist = histogram(bench10k)
    point = risk_utility_point(hist, "gaf", sigma=1e-3, nu=0.0, m=1)
    assert point.risk > 0.999
    assert point.utility == pytest.approx(0.5, abs=1e-3)
    n_nonzero = int(hist.freqs[hist.sizes > 0].sum())
    assert point.loss == pytest.approx(n_nonzero * 1e-6, rel=1e-9)


def test_risk_utility_monotone_in_sigma(bench10k):
    hist = histogram(bench10k)
    risks = [risk_utility_point(hist, "gaf", sigma=s, nu=-0.5, m=10).risk
             for s in (0.5, 1.0, 2.0)]
    assert risks[0] > risks[1] > risks[2]


# --- report ---------------------------------------------------------------


def test_ensemble_report_is_json_ready(small_table):
    import json

    config = MechanismConfig(family="gaf", sigma=1.0, nu=0.0,
                             zero_policy=ZeroPolicy.pseudocount(0.01), m=5,
                             master_seed=3)
    ens = synthesize(small_table, config)
    report = ensemble_report(small_table, ens)
    text = json.dumps(report)
    assert "tau_empirical" in report and "risk_utility" in report
    back = json.loads(text)
    assert back["n_cells"] == 24
    assert back["config"]["family"] == "gaf"


def test_report_rejects_mismatched_ensemble(small_table, bench10k):
    config = MechanismConfig(family="poisson", sigma=None, nu=None,
                             zero_policy=ZeroPolicy.keep(), m=2,
                             master_seed=9)
    ens = synthesize(small_table, config)
    with pytest.raises(ValidationError):
        tau_empirical(bench10k, ens)
