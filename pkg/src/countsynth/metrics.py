"""Disclosure-risk and utility metrics for synthetic count tables.

Four cell-level probabilities drive the risk story, all for a given size k:

* ``p_orig``            p(f = k)          share of original cells at k
* ``p_syn``             p(f* = k)         share of synthetic cells at k
* ``p_syn_given_orig``  p(f* = k | f = k) how often a size-k cell reproduces
* ``p_orig_given_syn``  p(f = k | f* = k) how often a synthetic k is genuine

They satisfy p_syn * p_orig_given_syn = p_orig * p_syn_given_orig exactly,
empirically as well as analytically (both sides equal the joint mass).

Utility is summarized two ways: an expected squared-deviation loss over the
originally occupied cells, and the accuracy of the synthetic grand total.
The loss's closed form uses the continuous variance sigma^2 * mu^nu for the
GAF family; rounding to integers shifts true variances by up to ~1/12 per
cell, so an ``exact`` switch is provided that sums discrete pmf variances
instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .distributions import (
    GafParams,
    NbiParams,
    family_pmf_at,
    gaf_pmf_obj,
)
from .errors import ValidationError
from .special import normal_cdf, reg_lower_gamma
from .synthesis import SyntheticEnsemble, ZeroPolicy
from .table import CellHistogram, ContingencyTable

TAU_COLUMNS = ("p_orig", "p_syn", "p_syn_given_orig", "p_orig_given_syn")


# ---------------------------------------------------------------------------
# Empirical tau metrics


def _ensemble_size_counts(table: ContingencyTable, ensemble: SyntheticEnsemble,
                          kmax: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-size tallies pooled over replicates.

    Returns (orig_cells, syn_occurrences, reproductions) indexed 0..kmax,
    where reproductions[k] counts (replicate, cell) pairs with f = f* = k.
    """
    f = table.counts
    cap = kmax + 1
    orig = np.bincount(np.minimum(f, cap), minlength=cap + 1)[:cap]
    syn = np.zeros(cap, dtype=np.int64)
    diag = np.zeros(cap, dtype=np.int64)
    for r in range(ensemble.m):
        rep = ensemble.replicates[r]
        syn += np.bincount(np.minimum(rep, cap), minlength=cap + 1)[:cap]
        match = (rep == f) & (f <= kmax)
        if match.any():
            diag += np.bincount(f[match], minlength=cap)[:cap]
    return orig, syn, diag


def tau_empirical(table: ContingencyTable, ensemble: SyntheticEnsemble,
                  ks=None) -> pd.DataFrame:
    """Observed tau metrics with binomial standard errors, pooled over replicates.

    Standard errors use the pooled trial counts (m*K draws for p_syn,
    m * cells-at-k for the reproduction rate, occurrences-of-k for the
    attribution rate); undefined entries (no trials) come back as NaN.
    """
    if table.n_cells != ensemble.n_cells:
        raise ValidationError("table and ensemble cell spaces differ")
    ks = np.arange(0, 21) if ks is None else np.asarray(list(ks), dtype=np.int64)
    if ks.size == 0 or np.any(ks < 0):
        raise ValidationError("ks must be non-negative sizes")
    kmax = int(ks.max())
    orig, syn, diag = _ensemble_size_counts(table, ensemble, kmax)
    n_cells = table.n_cells
    m = ensemble.m
    pooled = m * n_cells

    rows = []
    for k in ks:
        c_k = int(orig[k])
        s_k = int(syn[k])
        d_k = int(diag[k])
        p_orig = c_k / n_cells
        p_syn = s_k / pooled
        se_syn = np.sqrt(p_syn * (1.0 - p_syn) / pooled)
        if c_k > 0:
            repro = d_k / (m * c_k)
            se_repro = np.sqrt(repro * (1.0 - repro) / (m * c_k))
        else:
            repro, se_repro = np.nan, np.nan
        if s_k > 0:
            attr = d_k / s_k
            se_attr = np.sqrt(attr * (1.0 - attr) / s_k)
        else:
            attr, se_attr = np.nan, np.nan
        rows.append({
            "k": int(k),
            "p_orig": p_orig,
            "p_syn": p_syn,
            "se_p_syn": se_syn,
            "p_syn_given_orig": repro,
            "se_p_syn_given_orig": se_repro,
            "p_orig_given_syn": attr,
            "se_p_orig_given_syn": se_attr,
            "cells_at_k": c_k,
            "occurrences_of_k": s_k,
        })
    return pd.DataFrame(rows)


# ---------------------------------------------------------------------------
# Analytic tau metrics


def reproduction_probability(k: int, sigma: float, nu: float) -> float:
    """Closed-form p(f* = k | f = k) for the GAF family, k >= 1.

    With a = k^(2-nu) / sigma^2 this is
    P(a, (k+1/2) k^-1 a) - P(a, (k-1/2) k^-1 a), P the regularized lower
    incomplete gamma function.
    """
    if k < 1:
        raise ValidationError("closed form needs k >= 1")
    a = k ** (2.0 - nu) / sigma**2
    hi = reg_lower_gamma(a, (k + 0.5) / k * a)
    lo = reg_lower_gamma(a, (k - 0.5) / k * a)
    return float(hi - lo)


def _zero_cell_pmf(ks: np.ndarray, family: str, sigma, nu,
                   zero_policy: ZeroPolicy | None) -> np.ndarray:
    """Mass the mechanism puts on each k for an originally empty cell."""
    policy = zero_policy if zero_policy is not None else ZeroPolicy.keep()
    if policy.kind == "keep":
        return (ks == 0).astype(np.float64)
    if policy.kind == "bernoulli":
        out = np.zeros(ks.shape, dtype=np.float64)
        out[ks == 0] = 1.0 - policy.p
        out[ks == 1] = policy.p
        return out
    return np.asarray(
        family_pmf_at(family, ks, policy.alpha, sigma=sigma, nu=nu),
        dtype=np.float64,
    )


def tau_analytic(hist: CellHistogram, family: str, sigma: float | None = None,
                 nu: float | None = None,
                 zero_policy: ZeroPolicy | None = None,
                 ks=None) -> pd.DataFrame:
    """Model-implied tau metrics for a cell-size histogram.

    ``p_syn`` mixes the mechanism's pmf over the exact histogram; empty
    cells contribute according to the zero policy.  ``p_orig_given_syn``
    follows from the product identity and is NaN wherever p_syn is zero.
    """
    ks = np.arange(0, 21) if ks is None else np.asarray(list(ks), dtype=np.int64)
    if ks.size == 0 or np.any(ks < 0):
        raise ValidationError("ks must be non-negative sizes")

    n_cells = hist.n_cells
    p_syn = np.zeros(ks.shape, dtype=np.float64)
    for size, freq in zip(hist.sizes, hist.freqs):
        share = freq / n_cells
        if size == 0:
            p_syn += share * _zero_cell_pmf(ks, family, sigma, nu, zero_policy)
        else:
            p_syn += share * np.asarray(
                family_pmf_at(family, ks, float(size), sigma=sigma, nu=nu),
                dtype=np.float64,
            )

    rows = []
    zero_diag = _zero_cell_pmf(np.array([0]), family, sigma, nu, zero_policy)[0]
    for i, k in enumerate(ks):
        k = int(k)
        p_orig = hist.proportion_of(k)
        if k == 0:
            repro = float(zero_diag)
        else:
            repro = float(family_pmf_at(family, k, float(k), sigma=sigma, nu=nu))
        if p_syn[i] > 0.0:
            attr = p_orig * repro / p_syn[i]
        else:
            attr = np.nan
        rows.append({
            "k": k,
            "p_orig": p_orig,
            "p_syn": float(p_syn[i]),
            "p_syn_given_orig": repro,
            "p_orig_given_syn": attr,
        })
    return pd.DataFrame(rows)


# ---------------------------------------------------------------------------
# Expected squared-deviation loss


@dataclass(frozen=True)
class LossResult:
    """Loss over originally occupied cells; empty cells are reported, not summed."""

    value: float
    cells_used: int
    zero_cells_excluded: int


def _family_cell_variance(family: str, mu: float, sigma, nu,
                          exact: bool) -> float:
    if family == "gaf":
        if exact:
            return gaf_pmf_obj(GafParams(mu, sigma, nu)).variance
        return sigma**2 * mu**nu
    if family == "nbi":
        return NbiParams(mu, sigma).variance
    if family == "poisson":
        return mu
    raise ValidationError(f"unknown family {family!r}")


def loss_l1_analytic(hist: CellHistogram, family: str,
                     sigma: float | None = None, nu: float | None = None,
                     m: int = 1, exact: bool = False) -> LossResult:
    """Expected loss of the replicate-averaged table over occupied cells.

    Sum over sizes j > 0 of freq_j * Var(draw | mu=j) / m.  With
    ``exact=True`` the GAF variance is the discrete pmf's (rounding shifts
    it); the default is the continuous closed form sigma^2 * j^nu.
    """
    if m < 1:
        raise ValidationError("m must be at least 1")
    total = 0.0
    used = 0
    for size, freq in zip(hist.sizes, hist.freqs):
        if size == 0:
            continue
        total += freq * _family_cell_variance(family, float(size), sigma, nu,
                                              exact)
        used += int(freq)
    return LossResult(total / m, used, hist.freq_of(0))


def loss_l1_empirical(table: ContingencyTable,
                      ensemble: SyntheticEnsemble) -> LossResult:
    """Realized squared deviation of the replicate-averaged synthetic table.

    Only originally occupied cells are summed so the number is comparable
    with the analytic loss under any zero policy; the count of excluded
    empty cells is carried alongside.
    """
    if table.n_cells != ensemble.n_cells:
        raise ValidationError("table and ensemble cell spaces differ")
    occupied = table.nonzero_cells()
    mean_syn = ensemble.replicates[:, occupied].mean(axis=0)
    dev = table.counts[occupied] - mean_syn
    return LossResult(
        float(np.dot(dev, dev)),
        int(occupied.size),
        int(table.n_cells - occupied.size),
    )


# ---------------------------------------------------------------------------
# Grand-total accuracy


def total_variance_analytic(hist: CellHistogram, family: str,
                            sigma: float | None = None,
                            nu: float | None = None,
                            zero_policy: ZeroPolicy | None = None,
                            exact: bool = False) -> float:
    """Variance of the synthetic grand total under independent cell noise."""
    var = 0.0
    for size, freq in zip(hist.sizes, hist.freqs):
        if size > 0:
            var += freq * _family_cell_variance(family, float(size), sigma, nu,
                                                exact)
    policy = zero_policy if zero_policy is not None else ZeroPolicy.keep()
    zero_cells = hist.freq_of(0)
    if zero_cells and policy.kind == "pseudocount":
        var += zero_cells * _family_cell_variance(family, policy.alpha, sigma,
                                                  nu, exact)
    elif zero_cells and policy.kind == "bernoulli":
        var += zero_cells * policy.p * (1.0 - policy.p)
    return var


def total_coverage(d, sd: float):
    """p(|synthetic total - original total| < d) = 2 Phi(d / sd) - 1."""
    d = np.asarray(d, dtype=np.float64)
    if sd <= 0.0:
        out = np.ones(d.shape)
        return out if out.ndim else float(out)
    out = 2.0 * normal_cdf(d / sd) - 1.0
    return out if out.ndim else float(out)


def total_report(hist: CellHistogram, family: str,
                 sigma: float | None = None, nu: float | None = None,
                 zero_policy: ZeroPolicy | None = None,
                 d_values=None) -> pd.DataFrame:
    """Analytic sd of the synthetic total and coverage over a grid of d."""
    var = total_variance_analytic(hist, family, sigma, nu, zero_policy)
    sd = float(np.sqrt(var))
    if d_values is None:
        base = sd if sd > 0 else 1.0
        d_values = base * np.arange(0.25, 3.25, 0.25)
    d_values = np.asarray(list(d_values), dtype=np.float64)
    return pd.DataFrame({
        "d": d_values,
        "total_sd": sd,
        "coverage": total_coverage(d_values, sd),
    })


def total_empirical(table: ContingencyTable, ensemble: SyntheticEnsemble,
                    d_values) -> pd.DataFrame:
    """Share of replicates whose total lands within d of the original."""
    totals = ensemble.replicates.sum(axis=1, dtype=np.float64)
    n = float(table.n)
    d_values = np.asarray(list(d_values), dtype=np.float64)
    cover = [(np.abs(totals - n) < d).mean() for d in d_values]
    return pd.DataFrame({
        "d": d_values,
        "coverage": cover,
        "mean_total": totals.mean(),
        "sd_total": totals.std(ddof=1) if totals.size > 1 else np.nan,
    })


# ---------------------------------------------------------------------------
# Risk-utility map


def inverse_logit(x):
    """Numerically stable 1 / (1 + exp(-x))."""
    arr = np.atleast_1d(np.asarray(x, dtype=np.float64))
    out = np.empty(arr.shape)
    pos = arr >= 0.0
    with np.errstate(under="ignore"):
        out[pos] = 1.0 / (1.0 + np.exp(-arr[pos]))
        ex = np.exp(arr[~pos])
        out[~pos] = ex / (1.0 + ex)
    if np.asarray(x).ndim == 0:
        return float(out[0])
    return out


@dataclass(frozen=True)
class RiskUtilityPoint:
    """One mechanism's position on the disclosure-risk / utility map.

    risk is the attribution probability at k = 1 (how believable a
    synthetic 1 is); utility maps the loss through 1 - inverse_logit(loss),
    so 0 loss gives 0.5 and the score saturates quickly -- the raw loss is
    kept because most realistic losses pin the transformed score near 0.
    """

    risk: float
    utility: float
    loss: float


def risk_utility_point(hist: CellHistogram, family: str,
                       sigma: float | None = None, nu: float | None = None,
                       m: int = 1,
                       zero_policy: ZeroPolicy | None = None) -> RiskUtilityPoint:
    taus = tau_analytic(hist, family, sigma, nu, zero_policy, ks=[1])
    risk = float(taus["p_orig_given_syn"].iloc[0])
    loss = loss_l1_analytic(hist, family, sigma, nu, m).value
    return RiskUtilityPoint(risk, float(1.0 - inverse_logit(loss)), loss)


# ---------------------------------------------------------------------------
# Combined report


def ensemble_report(table: ContingencyTable, ensemble: SyntheticEnsemble,
                    ks=None, d_values=None) -> dict:
    """Empirical and analytic metrics for a run, ready for JSON."""
    cfg = ensemble.config
    hist = CellHistogram.from_table(table)
    emp = tau_empirical(table, ensemble, ks)
    ana = tau_analytic(hist, cfg.family, cfg.sigma, cfg.nu, cfg.zero_policy,
                       ks)
    l_emp = loss_l1_empirical(table, ensemble)
    l_ana = loss_l1_analytic(hist, cfg.family, cfg.sigma, cfg.nu, cfg.m)
    var_ana = total_variance_analytic(hist, cfg.family, cfg.sigma, cfg.nu,
                                      cfg.zero_policy)
    sd = float(np.sqrt(var_ana))
    if d_values is None:
        base = sd if sd > 0 else 1.0
        d_values = [base * f for f in (0.5, 1.0, 1.5, 2.0, 2.5, 3.0)]
    tot_ana = total_report(hist, cfg.family, cfg.sigma, cfg.nu,
                           cfg.zero_policy, d_values)
    tot_emp = total_empirical(table, ensemble, d_values)
    ru = risk_utility_point(hist, cfg.family, cfg.sigma, cfg.nu, cfg.m,
                            cfg.zero_policy)
    return {
        "config": cfg.to_dict(),
        "n_cells": table.n_cells,
        "n": table.n,
        "tau_empirical": emp.to_dict(orient="records"),
        "tau_analytic": ana.to_dict(orient="records"),
        "loss_empirical": vars(l_emp) | {},
        "loss_analytic": vars(l_ana) | {},
        "total_analytic": tot_ana.to_dict(orient="records"),
        "total_empirical": tot_emp.to_dict(orient="records"),
        "risk_utility": vars(ru) | {},
        "clamped_draws": ensemble.clamped,
    }
