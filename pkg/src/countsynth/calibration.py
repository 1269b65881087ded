"""Pick noise parameters to hit a target metric, and grid sweeps.

Calibration inverts one analytic metric (reproduction rate, attribution
rate, expected loss, or total coverage) for one free parameter (sigma or
nu) over explicit bounds.  The metric is scanned on a coarse grid first:
if the target is outside the attained range the problem is rejected with
that range, if the scan is monotone the root is bisected, and otherwise a
fine grid picks the closest point and the result is flagged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distributions import NbiParams, nbi_pmf, poisson_pmf
from .errors import CalibrationError, ValidationError
from .metrics import (
    loss_l1_analytic,
    reproduction_probability,
    risk_utility_point,
    tau_analytic,
    total_coverage,
    total_variance_analytic,
)
from .synthesis import ZeroPolicy
from .table import CellHistogram

DEFAULT_SIGMA_BOUNDS = (1e-3, 20.0)
DEFAULT_NU_BOUNDS = (-3.0, 1.0)

_SCAN_POINTS = 33
_FALLBACK_POINTS = 1025
_MAX_BISECT = 60

METRICS = ("p_syn_given_orig", "p_orig_given_syn", "loss", "coverage")
_NEEDS_HISTOGRAM = ("p_orig_given_syn", "loss", "coverage")


@dataclass(frozen=True)
class CalibrationTarget:
    """What to hit, with what free, holding what fixed."""

    metric: str
    target: float
    free: str = "sigma"
    family: str = "gaf"
    k: int = 1
    d: float | None = None
    sigma: float | None = None
    nu: float | None = None
    m: int = 1
    zero_policy: ZeroPolicy | None = None
    bounds: tuple[float, float] | None = None
    tolerance: float = 1e-6

    def __post_init__(self) -> None:
        if self.metric not in METRICS:
            raise ValidationError(
                f"unknown metric {self.metric!r}; expected one of {METRICS}"
            )
        if self.free not in ("sigma", "nu"):
            raise ValidationError("free parameter must be 'sigma' or 'nu'")
        if not np.isfinite(self.target):
            raise ValidationError("target must be finite")
        if self.free == "nu":
            if self.family != "gaf":
                raise ValidationError("only the gaf family has nu")
            if self.sigma is None:
                raise ValidationError("calibrating nu requires a fixed sigma")
        else:
            if self.family == "gaf" and self.nu is None:
                raise ValidationError("calibrating sigma for gaf needs nu")
            if self.family != "gaf" and self.nu is not None:
                raise ValidationError("nu only applies to the gaf family")
        if self.family == "poisson":
            raise ValidationError("the poisson family has nothing to calibrate")
        if self.metric == "coverage":
            if self.d is None or self.d <= 0:
                raise ValidationError("coverage calibration needs d > 0")
        if self.metric in ("p_syn_given_orig", "p_orig_given_syn"):
            if self.k < 1:
                raise ValidationError("tau calibration needs k >= 1")
        if self.m < 1:
            raise ValidationError("m must be at least 1")
        if self.tolerance <= 0:
            raise ValidationError("tolerance must be positive")
        if self.bounds is not None:
            lo, hi = self.bounds
            if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                raise ValidationError(f"bad bounds {self.bounds}")
            object.__setattr__(self, "bounds", (float(lo), float(hi)))

    def default_bounds(self) -> tuple[float, float]:
        if self.bounds is not None:
            return self.bounds
        return DEFAULT_SIGMA_BOUNDS if self.free == "sigma" \
            else DEFAULT_NU_BOUNDS


@dataclass(frozen=True)
class CalibrationResult:
    parameter: str
    value: float
    achieved: float
    target: float
    iterations: int
    monotone: bool
    converged: bool

    def to_dict(self) -> dict:
        return {
            "parameter": self.parameter,
            "value": self.value,
            "achieved": self.achieved,
            "target": self.target,
            "iterations": self.iterations,
            "monotone": self.monotone,
            "converged": self.converged,
        }


def _metric_value(target: CalibrationTarget, hist: CellHistogram | None,
                  x: float) -> float:
    sigma = x if target.free == "sigma" else target.sigma
    nu = x if target.free == "nu" else target.nu
    family = target.family
    if target.metric == "p_syn_given_orig":
        if family == "gaf":
            return reproduction_probability(target.k, sigma, nu)
        if family == "nbi":
            return float(nbi_pmf(target.k, NbiParams(float(target.k), sigma)))
        return float(poisson_pmf(target.k, float(target.k)))
    if target.metric == "p_orig_given_syn":
        row = tau_analytic(hist, family, sigma, nu, target.zero_policy,
                           ks=[target.k])
        return float(row["p_orig_given_syn"].iloc[0])
    if target.metric == "loss":
        return loss_l1_analytic(hist, family, sigma, nu, target.m).value
    # coverage
    var = total_variance_analytic(hist, family, sigma, nu, target.zero_policy)
    return float(total_coverage(target.d, float(np.sqrt(var))))


def calibrate(target: CalibrationTarget,
              hist: CellHistogram | None = None) -> CalibrationResult:
    """Solve for the free parameter; see the module docstring for strategy."""
    if target.metric in _NEEDS_HISTOGRAM and hist is None:
        raise ValidationError(
            f"metric {target.metric!r} needs a cell-size histogram"
        )
    lo, hi = target.default_bounds()
    if target.free == "sigma" and lo <= 0:
        raise ValidationError("sigma bounds must be positive")

    def f(x: float) -> float:
        return _metric_value(target, hist, float(x))

    xs = np.linspace(lo, hi, _SCAN_POINTS)
    gs = np.array([f(x) for x in xs])
    if not np.all(np.isfinite(gs)):
        raise CalibrationError(
            "metric is not finite everywhere on the bounds; tighten them"
        )
    t = target.target
    g_lo, g_hi = float(gs.min()), float(gs.max())
    if not (g_lo - target.tolerance <= t <= g_hi + target.tolerance):
        raise CalibrationError(
            f"target {t} is outside the attainable range "
            f"[{g_lo:.6g}, {g_hi:.6g}] on these bounds"
        )

    span = max(g_hi - g_lo, 1.0)
    slack = 1e-9 * span
    diffs = np.diff(gs)
    monotone = bool(np.all(diffs >= -slack) or np.all(diffs <= slack))

    if not monotone:
        xs2 = np.linspace(lo, hi, _FALLBACK_POINTS)
        gs2 = np.array([f(x) for x in xs2])
        i = int(np.argmin(np.abs(gs2 - t)))
        achieved = float(gs2[i])
        return CalibrationResult(
            parameter=target.free,
            value=float(xs2[i]),
            achieved=achieved,
            target=t,
            iterations=_FALLBACK_POINTS,
            monotone=False,
            converged=abs(achieved - t) <= target.tolerance,
        )

    # Bracket on the scan, then bisect.
    resid = gs - t
    best_i = int(np.argmin(np.abs(resid)))
    a_x, a_g = float(xs[best_i]), float(gs[best_i])
    bracket = None
    for i in range(_SCAN_POINTS - 1):
        if resid[i] == 0.0 or resid[i] * resid[i + 1] <= 0.0:
            bracket = (float(xs[i]), float(gs[i]),
                       float(xs[i + 1]), float(gs[i + 1]))
            break
    if bracket is None:
        # target equals an endpoint up to tolerance
        return CalibrationResult(target.free, a_x, a_g, t, 0, True,
                                 abs(a_g - t) <= target.tolerance)

    ax, ag, bx, bg = bracket
    best_x, best_g = (ax, ag) if abs(ag - t) <= abs(bg - t) else (bx, bg)
    iterations = 0
    for iterations in range(1, _MAX_BISECT + 1):
        mid = 0.5 * (ax + bx)
        gm = f(mid)
        if abs(gm - t) < abs(best_g - t):
            best_x, best_g = mid, gm
        if abs(gm - t) <= target.tolerance:
            return CalibrationResult(target.free, mid, float(gm), t,
                                     iterations, True, True)
        if (ag - t) * (gm - t) <= 0.0:
            bx, bg = mid, gm
        else:
            ax, ag = mid, gm
    return CalibrationResult(target.free, float(best_x), float(best_g), t,
                             iterations, True,
                             abs(best_g - t) <= target.tolerance)


def sweep(hist: CellHistogram,
          families=("gaf", "nbi"),
          sigmas=(0.5, 1.0, 2.0),
          nus=(0.0, -0.25, -0.5),
          m: int = 10,
          zero_policy: ZeroPolicy | None = None,
          k: int = 1):
    """Analytic metrics for every (family, sigma, nu) combination.

    Rows come out in deterministic (family, sigma, nu) order, gaf crossing
    the full sigma x nu grid, nbi using sigmas only, poisson a single row.
    The default zero policy is a 0.01 pseudocount, matching how empties are
    usually synthesized when attribution risk is the question.
    """
    import pandas as pd

    if zero_policy is None:
        zero_policy = ZeroPolicy.pseudocount(0.01)
    rows = []
    for family in families:
        if family == "gaf":
            combos = [(s, n) for s in sigmas for n in nus]
        elif family == "nbi":
            combos = [(s, None) for s in sigmas]
        elif family == "poisson":
            combos = [(None, None)]
        else:
            raise ValidationError(f"unknown family {family!r}")
        for sigma, nu in combos:
            taus = tau_analytic(hist, family, sigma, nu, zero_policy, ks=[k])
            loss = loss_l1_analytic(hist, family, sigma, nu, m)
            ru = risk_utility_point(hist, family, sigma, nu, m, zero_policy)
            row = taus.iloc[0]
            rows.append({
                "family": family,
                "sigma": sigma,
                "nu": nu,
                "k": k,
                "p_syn": row["p_syn"],
                "p_syn_given_orig": row["p_syn_given_orig"],
                "p_orig_given_syn": row["p_orig_given_syn"],
                "loss": loss.value,
                "risk": ru.risk,
                "utility": ru.utility,
            })
    return pd.DataFrame(rows)
