"""Parameter calibration and grid-sweep tests."""

import numpy as np
import pytest

from countsynth.calibration import (
    CalibrationResult,
    CalibrationTarget,
    calibrate,
    sweep,
)
from countsynth.errors import CalibrationError, ValidationError
from countsynth.metrics import reproduction_probability, total_coverage
from countsynth.synthesis import ZeroPolicy
from countsynth.table import ContingencyTable, TableSchema, histogram


def _hist(counts):
    counts = np.asarray(counts, dtype=np.int64)
    schema = TableSchema((
        ("CELL", tuple(f"c{i:06d}" for i in range(counts.size))),
    ))
    return histogram(ContingencyTable(schema, counts))


def test_target_validation():
    ok = CalibrationTarget(metric="p_syn_given_orig", target=0.3,
                           free="sigma", family="gaf", nu=-0.5)
    assert ok.default_bounds()[0] > 0
    with pytest.raises(ValidationError):
        CalibrationTarget(metric="p_syn_given_orig", target=0.3,
                          free="sigma", family="gaf")      # nu unspecified
    with pytest.raises(ValidationError):
        CalibrationTarget(metric="p_syn_given_orig", target=0.3,
                          free="nu", family="gaf", nu=-0.5)  # sigma missing
    with pytest.raises(ValidationError):
        CalibrationTarget(metric="p_syn_given_orig", target=0.3,
                          free="nu", family="nbi", sigma=1.0)
    with pytest.raises(ValidationError):
        CalibrationTarget(metric="coverage", target=0.9, free="sigma",
                          family="gaf", nu=0.0)            # d missing
    with pytest.raises(ValidationError):
        CalibrationTarget(metric="p_syn_given_orig", target=0.3,
                          free="sigma", family="poisson")


def test_sigma_round_trip_on_reproduction():
    want_sigma = 2.0
    value = reproduction_probability(1, want_sigma, -0.5)
    target = CalibrationTarget(metric="p_syn_given_orig", target=value,
                               free="sigma", family="gaf", nu=-0.5, k=1)
    res = calibrate(target)
    assert res.converged and res.monotone
    assert res.parameter == "sigma"
    assert abs(res.value - want_sigma) < 1e-4
    assert abs(res.achieved - value) <= target.tolerance


def test_nu_round_trip_on_reproduction():
    want_nu = -0.6
    value = reproduction_probability(4, 1.0, want_nu)
    target = CalibrationTarget(metric="p_syn_given_orig", target=value,
                               free="nu", family="gaf", sigma=1.0, k=4)
    res = calibrate(target)
    assert res.converged
    assert abs(res.value - want_nu) < 1e-4


def test_loss_round_trip_single_cell():
    # one cell of size 4, nu=-1/2: analytic loss = sigma^2 / 2, so a target
    # of 1/2 must calibrate sigma to 1 (the extra zero cell contributes no loss)
    hist = _hist([4, 0])
    target = CalibrationTarget(metric="loss", target=0.5, free="sigma",
                               family="gaf", nu=-0.5, m=1)
    res = calibrate(target, hist)
    assert res.converged
    assert abs(res.value - 1.0) < 1e-5


def test_coverage_round_trip():
    # 100 cells of size 1, nu=0: total sd = 10*sigma; coverage at d=10
    # hits 2*Phi(1)-1 exactly when sigma = 1
    hist = _hist([1] * 100)
    value = total_coverage(10.0, 10.0)
    target = CalibrationTarget(metric="coverage", target=value, free="sigma",
                               family="gaf", nu=0.0, d=10.0)
    res = calibrate(target, hist)
    assert res.converged
    assert abs(res.value - 1.0) < 1e-5


def test_attribution_round_trip():
    hist = _hist([0, 0, 0, 1, 1, 2, 3])
    from countsynth.metrics import tau_analytic

    truth = float(tau_analytic(hist, "gaf", sigma=1.5, nu=-0.25,
                               ks=[1])["p_orig_given_syn"].iloc[0])
    target = CalibrationTarget(metric="p_orig_given_syn", target=truth,
                               free="sigma", family="gaf", nu=-0.25, k=1)
    res = calibrate(target, hist)
    assert res.converged
    assert abs(res.value - 1.5) < 1e-3


def test_unattainable_target_is_rejected_with_range():
    target = CalibrationTarget(metric="p_syn_given_orig", target=0.99,
                               free="sigma", family="gaf", nu=-0.5, k=1,
                               bounds=(1.0, 20.0))
    with pytest.raises(CalibrationError) as err:
        calibrate(target)
    msg = str(err.value)
    assert "outside the attainable range" in msg
    assert "[" in msg and "]" in msg


def test_histogram_required_for_histogram_metrics():
    target = CalibrationTarget(metric="loss", target=1.0, free="sigma",
                               family="gaf", nu=0.0)
    with pytest.raises(ValidationError):
        calibrate(target, None)


def test_nbi_sigma_round_trip():
    from countsynth.distributions import NbiParams, nbi_pmf

    value = float(nbi_pmf(1, NbiParams(1.0, 0.7)))
    target = CalibrationTarget(metric="p_syn_given_orig", target=value,
                               free="sigma", family="nbi", k=1)
    res = calibrate(target)
    assert res.converged
    assert abs(res.value - 0.7) < 1e-4


def test_result_to_dict_round_trip():
    res = CalibrationResult("sigma", 1.0, 0.25, 0.25, 12, True, True)
    doc = res.to_dict()
    assert doc["parameter"] == "sigma" and doc["converged"] is True


# --- sweep ----------------------------------------------------------------


def test_sweep_layout_and_determinism(bench10k):
    hist = histogram(bench10k)
    df = sweep(hist)
    # 3 sigmas x 3 nus for the three-parameter family + 3 sigmas for nbi
    assert len(df) == 12
    assert (df[df["family"] == "gaf"].shape[0], (df["family"] == "nbi").sum()) \
        == (9, 3)
    assert list(df.columns) == ["family", "sigma", "nu", "k", "p_syn",
                                "p_syn_given_orig", "p_orig_given_syn",
                                "loss", "risk", "utility"]
    again = sweep(hist)
    assert df.equals(again)


def test_sweep_risk_decreases_with_sigma(bench10k):
    hist = histogram(bench10k)
    df = sweep(hist)
    gaf = df[(df["family"] == "gaf") & (df["nu"] == 0.0)].sort_values("sigma")
    assert gaf["risk"].is_monotonic_decreasing
    assert gaf["loss"].is_monotonic_increasing


def test_sweep_respects_custom_grids(bench10k):
    hist = histogram(bench10k)
    df = sweep(hist, families=("nbi",), sigmas=(1.0,), m=5)
    assert len(df) == 1
    assert df["family"].iloc[0] == "nbi"
    import pandas as pd

    assert pd.isna(df["nu"].iloc[0])
