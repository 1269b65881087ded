"""Poisson log-linear fits and confidence-interval overlap.

Specific utility of a synthetic table is judged by fitting the same
log-linear model to the original and each synthetic replicate and scoring
how much the parameter confidence intervals overlap.  The fitter is a
plain iteratively reweighted least squares loop written against an explicit
convergence contract (score and deviance tolerances, iteration cap,
separation flagging) so those guarantees are part of this package rather
than inherited from whichever modelling library happens to be installed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .errors import ValidationError
from .synthesis import SyntheticEnsemble
from .table import ContingencyTable, TableSchema, marginal

_Z95 = 1.959963984540054  # two-sided 95% normal quantile


def design_matrix(schema: TableSchema, order: int = 2) -> tuple[np.ndarray, list[str]]:
    """Treatment-coded design over the cell space.

    First category of each variable is the reference.  ``order`` 1 gives
    the independence model, 2 adds every two-way interaction.  Terms are
    named ``VAR=cat`` and ``VAR=cat:VAR2=cat2``.
    """
    if order not in (1, 2):
        raise ValidationError("model order must be 1 or 2")
    k = schema.n_cells
    codes = np.unravel_index(np.arange(k), schema.shape)
    cols = [np.ones(k)]
    names = ["intercept"]
    dummies: list[list[tuple[str, np.ndarray]]] = []
    for ax, (name, cats) in enumerate(schema.variables):
        own = []
        for lvl in range(1, len(cats)):
            col = (codes[ax] == lvl).astype(np.float64)
            label = f"{name}={cats[lvl]}"
            cols.append(col)
            names.append(label)
            own.append((label, col))
        dummies.append(own)
    if order == 2:
        for i in range(len(dummies)):
            for j in range(i + 1, len(dummies)):
                for label_i, col_i in dummies[i]:
                    for label_j, col_j in dummies[j]:
                        cols.append(col_i * col_j)
                        names.append(f"{label_i}:{label_j}")
    return np.column_stack(cols), names


def _deviance(y: np.ndarray, mu: np.ndarray) -> float:
    with np.errstate(divide="ignore", invalid="ignore"):
        term = np.where(y > 0.0, y * np.log(y / mu), 0.0)
    return float(2.0 * np.sum(term - (y - mu)))


@dataclass
class FitResult:
    """One fitted log-linear model with Wald intervals."""

    terms: list[str]
    estimates: np.ndarray
    se: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    fitted: np.ndarray
    deviance: float
    converged: bool
    n_iter: int
    max_score: float
    flagged_terms: list[str]

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "term": self.terms,
            "estimate": self.estimates,
            "se": self.se,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
        })

    def estimate_of(self, term: str) -> float:
        return float(self.estimates[self.terms.index(term)])


def fit_loglinear(table: ContingencyTable, order: int = 2,
                  max_iter: int = 100, score_tol: float = 1e-8,
                  dev_tol: float = 1e-10) -> FitResult:
    """IRLS fit of a Poisson log-linear model to a (small) table.

    Stops when the largest score component falls below ``score_tol`` or the
    relative deviance change falls below ``dev_tol``; 100 iterations is the
    hard cap.  Estimates drifting past |30| or with huge standard errors
    are reported in ``flagged_terms`` (separation from sampling zeros).
    """
    x, names = design_matrix(table.schema, order)
    y = table.counts.astype(np.float64)
    n_par = x.shape[1]
    if n_par > y.size:
        raise ValidationError(
            f"model has {n_par} parameters for {y.size} cells"
        )

    mu = y + 0.5
    eta = np.log(mu)
    dev_old = _deviance(y, mu)
    converged = False
    n_iter = 0
    singular = False
    beta = np.zeros(n_par)
    for n_iter in range(1, max_iter + 1):
        w = mu
        z = eta + (y - mu) / mu
        xtw = x.T * w
        a = xtw @ x
        b = xtw @ z
        try:
            beta = np.linalg.solve(a, b)
        except np.linalg.LinAlgError:
            beta = np.linalg.lstsq(a, b, rcond=None)[0]
            singular = True
        eta = np.clip(x @ beta, -700.0, 700.0)
        mu = np.maximum(np.exp(eta), 1e-300)
        dev = _deviance(y, mu)
        score = x.T @ (y - mu)
        max_score = float(np.max(np.abs(score)))
        if max_score < score_tol or \
                abs(dev - dev_old) <= dev_tol * max(1.0, abs(dev)):
            converged = True
            break
        dev_old = dev

    w = mu
    a = (x.T * w) @ x
    try:
        cov = np.linalg.inv(a)
    except np.linalg.LinAlgError:
        cov = np.linalg.pinv(a)
        singular = True
    var = np.diag(cov).copy()
    var[var < 0] = np.nan
    se = np.sqrt(var)

    flagged = [
        nm for nm, est, s in zip(names, beta, se)
        if not np.isfinite(est) or not np.isfinite(s)
        or abs(est) > 30.0 or s > 1e3
    ]
    if singular:
        flagged = list(dict.fromkeys(flagged + ["<singular-information>"]))
    score = x.T @ (y - mu)
    return FitResult(
        terms=names,
        estimates=beta,
        se=se,
        ci_low=beta - _Z95 * se,
        ci_high=beta + _Z95 * se,
        fitted=mu,
        deviance=_deviance(y, mu),
        converged=converged,
        n_iter=n_iter,
        max_score=float(np.max(np.abs(score))),
        flagged_terms=flagged,
    )


def ci_overlap(fit_orig: FitResult, fit_syn: FitResult) -> pd.DataFrame:
    """Average fractional overlap of 95% intervals, term by term.

    For intervals (l1,u1) and (l2,u2) the score is the mean of the overlap
    length as a fraction of each interval, clamped below at 0; degenerate
    (zero-width or non-finite) intervals give NaN.
    """
    if fit_orig.terms != fit_syn.terms:
        raise ValidationError("fits have different terms; same model required")
    rows = []
    for i, term in enumerate(fit_orig.terms):
        l1, u1 = fit_orig.ci_low[i], fit_orig.ci_high[i]
        l2, u2 = fit_syn.ci_low[i], fit_syn.ci_high[i]
        w1, w2 = u1 - l1, u2 - l2
        if not (np.isfinite(w1) and np.isfinite(w2)) or w1 <= 0 or w2 <= 0:
            score = np.nan
        else:
            inter = min(u1, u2) - max(l1, l2)
            score = max(0.0, 0.5 * (inter / w1 + inter / w2))
        rows.append({"term": term, "overlap": score})
    return pd.DataFrame(rows)


def ensemble_ci_overlap(table: ContingencyTable, ensemble: SyntheticEnsemble,
                        variables, order: int = 2) -> pd.DataFrame:
    """Overlap of every replicate's fit against the original's, long format.

    The model is fit on the marginal over ``variables``.  Columns:
    replicate, term, overlap, syn_converged, syn_flagged.
    """
    if table.n_cells != ensemble.n_cells:
        raise ValidationError("table and ensemble cell spaces differ")
    base = marginal(table, variables)
    fit_o = fit_loglinear(base, order)
    frames = []
    for r in range(ensemble.m):
        syn_marg = marginal(ensemble.replicate_table(r), variables)
        fit_s = fit_loglinear(syn_marg, order)
        df = ci_overlap(fit_o, fit_s)
        df.insert(0, "replicate", r)
        df["syn_converged"] = fit_s.converged
        df["syn_flagged"] = [t in fit_s.flagged_terms for t in df["term"]]
        frames.append(df)
    return pd.concat(frames, ignore_index=True)


def overlap_summary(detail: pd.DataFrame) -> pd.DataFrame:
    """Median/mean overlap per term across replicates."""
    g = detail.groupby("term", sort=False)["overlap"]
    out = g.agg(median="median", mean="mean", defined="count").reset_index()
    return out
