"""Count-noise families: Poisson, NBI, and the discretized GAF.

The GAF family is a gamma distribution reparameterized so its mean is mu and
its continuous variance is sigma^2 * mu^nu, then discretized onto the
non-negative integers by rounding half up:

    pmf(0) = F(1/2),   pmf(y) = F(y + 1/2) - F(y - 1/2)   for y >= 1,

where F is the gamma CDF.  nu is the power that links noise to cell size:
nu = 0 gives flat noise, negative nu shrinks noise as counts grow.

NBI is the gamma-mixed Poisson with mean mu and variance mu + sigma*mu^2,
sampled exactly as lambda ~ Gamma(1/sigma, sigma*mu), y ~ Poisson(lambda).

Discretization is *not* moment-neutral: rounding a continuous draw adds
roughly 1/12 to the variance when the continuous sd is around one, and
collapses variance toward zero when the sd is far below one.  Pmf objects
report exact moments of the discrete law so callers can see that drift
rather than assume it away.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ValidationError
from .samplers import gamma_rvs, poisson_rvs
from .special import log_gamma, reg_lower_gamma
from .streams import CellStream, CellStreams

INT64_MAX = np.iinfo(np.int64).max
DEFAULT_TAIL_EPS = 1e-12

# Hard cap on discrete support size so a runaway CDF cannot allocate the box.
_MAX_SUPPORT = 1 << 24

FAMILIES = ("poisson", "nbi", "gaf")


def _require_finite(name: str, value: float) -> float:
    value = float(value)
    if not np.isfinite(value):
        raise ValidationError(f"{name} must be finite, got {value!r}")
    return value


@dataclass(frozen=True)
class GafParams:
    """Mean/noise parameterization of the discretized-gamma family."""

    mu: float
    sigma: float
    nu: float

    def __post_init__(self) -> None:
        mu = _require_finite("mu", self.mu)
        sigma = _require_finite("sigma", self.sigma)
        nu = _require_finite("nu", self.nu)
        if mu <= 0.0:
            raise ValidationError(f"mu must be positive, got {mu}")
        if sigma <= 0.0:
            raise ValidationError(f"sigma must be positive, got {sigma}")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "nu", nu)
        if not (np.isfinite(self.shape) and self.shape > 0.0
                and np.isfinite(self.scale) and self.scale > 0.0):
            raise ValidationError(
                f"gaf parameters mu={mu}, sigma={sigma}, nu={nu} give a "
                f"degenerate gamma (shape={self.shape}, scale={self.scale})"
            )

    @property
    def sigma1(self) -> float:
        """Coefficient of the underlying constant-nu=... gamma: sigma * mu^(nu/2 - 1)."""
        return self.sigma * self.mu ** (self.nu / 2.0 - 1.0)

    @property
    def shape(self) -> float:
        # 1 / sigma1^2 == mu^(2 - nu) / sigma^2
        return self.mu ** (2.0 - self.nu) / self.sigma**2

    @property
    def scale(self) -> float:
        # sigma1^2 * mu == sigma^2 * mu^(nu - 1)
        return self.sigma**2 * self.mu ** (self.nu - 1.0)

    @property
    def mean(self) -> float:
        return self.mu

    @property
    def variance(self) -> float:
        """Variance of the continuous law, sigma^2 * mu^nu (pre-rounding)."""
        return self.sigma**2 * self.mu**self.nu


@dataclass(frozen=True)
class NbiParams:
    """Type-I negative binomial: mean mu, variance mu + sigma * mu^2."""

    mu: float
    sigma: float

    def __post_init__(self) -> None:
        mu = _require_finite("mu", self.mu)
        sigma = _require_finite("sigma", self.sigma)
        if mu <= 0.0:
            raise ValidationError(f"mu must be positive, got {mu}")
        if sigma <= 0.0:
            raise ValidationError(f"sigma must be positive, got {sigma}")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)

    @property
    def gamma_shape(self) -> float:
        return 1.0 / self.sigma

    @property
    def gamma_scale(self) -> float:
        return self.sigma * self.mu

    @property
    def mean(self) -> float:
        return self.mu

    @property
    def variance(self) -> float:
        return self.mu + self.sigma * self.mu**2


@dataclass(frozen=True)
class Pmf:
    """A finite probability mass function on offset, offset+1, ...

    ``probs`` holds the retained mass; anything truncated away is bounded by
    ``tail_eps``.  Moments are exact sums over the retained support.
    """

    offset: int
    probs: np.ndarray
    tail_eps: float = DEFAULT_TAIL_EPS

    def __post_init__(self) -> None:
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.ndim != 1 or probs.size == 0:
            raise ValidationError("pmf needs a non-empty 1-d probability array")
        if self.offset < 0:
            raise ValidationError("pmf support must be non-negative")
        if np.any(probs < 0.0):
            raise ValidationError("pmf probabilities must be non-negative")
        total = float(probs.sum())
        # Allow a little float slop on top of the truncation budget.
        if abs(total - 1.0) > self.tail_eps + 1e-9:
            raise ValidationError(
                f"pmf mass {total!r} is not within tail_eps of 1"
            )
        probs = probs.copy()
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @property
    def support(self) -> np.ndarray:
        return self.offset + np.arange(self.probs.size, dtype=np.int64)

    @property
    def total_mass(self) -> float:
        return float(self.probs.sum())

    @property
    def mean(self) -> float:
        return float(self.support @ self.probs)

    @property
    def variance(self) -> float:
        ys = self.support.astype(np.float64)
        m = self.mean
        return float(((ys - m) ** 2) @ self.probs)

    def at(self, y) -> np.ndarray | float:
        """Probability of y (0 outside the retained support); vectorized."""
        arr = np.asarray(y)
        idx = arr - self.offset
        valid = (idx >= 0) & (idx < self.probs.size)
        out = np.zeros(arr.shape, dtype=np.float64)
        out[valid] = self.probs[idx[valid].astype(np.int64)]
        if np.isscalar(y) or arr.ndim == 0:
            return float(out) if arr.ndim == 0 else float(out[0])
        return out


def discretize(cdf: Callable[[float], float],
               tail_eps: float = DEFAULT_TAIL_EPS) -> Pmf:
    """Turn a continuous CDF on [0, inf) into a rounded-count Pmf.

    pmf(0) = cdf(1/2) and pmf(y) = cdf(y+1/2) - cdf(y-1/2); support is
    truncated where the CDF leaves at most tail_eps/2 in either tail.
    """
    eps = float(tail_eps)
    if not (0.0 < eps < 1.0):
        raise ValidationError("tail_eps must be in (0, 1)")
    half = eps / 2.0

    upper = 1
    while 1.0 - float(cdf(upper + 0.5)) > half:
        upper *= 2
        if upper > _MAX_SUPPORT:
            raise ValidationError(
                "discretized support exceeds the implementation cap; "
                "check the cdf or loosen tail_eps"
            )

    # Largest starting point whose left tail is still within budget.
    lo, hi = 0, upper
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if float(cdf(mid - 0.5)) <= half:
            lo = mid
        else:
            hi = mid - 1
    lower = lo

    edges = np.arange(lower, upper + 2, dtype=np.float64) - 0.5
    edges[0] = max(edges[0], 0.0)
    try:
        values = np.asarray(cdf(edges), dtype=np.float64)
        if values.shape != edges.shape:
            raise TypeError
    except (TypeError, ValueError):
        values = np.array([float(cdf(e)) for e in edges])
    if lower == 0:
        values[0] = 0.0
    probs = np.diff(values)
    if np.any(probs < -1e-12):
        raise ValidationError("cdf is not monotone; cannot discretize")
    probs = np.clip(probs, 0.0, None)

    # Trim exact zeros created by the search granularity.
    nz = np.flatnonzero(probs)
    if nz.size == 0:
        raise ValidationError("cdf produced an empty pmf")
    probs = probs[nz[0]: nz[-1] + 1]
    return Pmf(lower + int(nz[0]), probs, eps)


# ---------------------------------------------------------------------------
# GAF


def gaf_pdf(w, params: GafParams):
    """Continuous density of the underlying gamma at w (0 for w <= 0)."""
    w = np.asarray(w, dtype=np.float64)
    a, s = params.shape, params.scale
    out = np.zeros(w.shape, dtype=np.float64)
    pos = w > 0.0
    if np.any(pos):
        wp = w[pos]
        with np.errstate(under="ignore"):
            out[pos] = np.exp(
                (a - 1.0) * np.log(wp) - wp / s - a * np.log(s) - log_gamma(a)
            )
    return out if out.ndim else float(out)


def gaf_cdf(w, params: GafParams):
    """Gamma CDF at w; 0 for w <= 0."""
    w = np.asarray(w, dtype=np.float64)
    x = np.clip(w / params.scale, 0.0, None)
    out = reg_lower_gamma(params.shape, x)
    return out if out.ndim else float(out)


def gaf_pmf(y, params: GafParams):
    """Discretized-GAF probability mass at integer y (vectorized)."""
    y = np.asarray(y)
    yf = y.astype(np.float64)
    hi = gaf_cdf(yf + 0.5, params)
    lo = np.where(yf >= 1.0, gaf_cdf(yf - 0.5, params), 0.0)
    out = np.where(yf >= 0.0, np.maximum(hi - lo, 0.0), 0.0)
    out = np.where(yf == np.floor(yf), out, 0.0)
    return out if out.ndim else float(out)


def gaf_pmf_obj(params: GafParams,
                tail_eps: float = DEFAULT_TAIL_EPS) -> Pmf:
    """Full discretized pmf of the GAF family as a Pmf object."""
    return discretize(lambda w: gaf_cdf(w, params), tail_eps)


def gaf_draw_values(mu, sigma: float, nu: float, streams: CellStreams,
                    lanes: np.ndarray | None = None) -> np.ndarray:
    """Rounded-half-up GAF draws for an array of cell means (float64)."""
    mu = np.asarray(mu, dtype=np.float64)
    if np.any(mu <= 0.0):
        raise ValidationError("gaf draws need strictly positive means")
    shape = mu ** (2.0 - nu) / sigma**2
    scale = sigma**2 * mu ** (nu - 1.0)
    if not (np.all(np.isfinite(shape)) and np.all(np.isfinite(scale))):
        raise ValidationError("gaf shape/scale overflowed for these means")
    w = gamma_rvs(shape, scale, streams, lanes)
    return np.floor(w + 0.5)


def gaf_sample(params: GafParams, stream: CellStream) -> int:
    """One synthetic count from the cell's own stream."""
    val = gaf_draw_values(params.mu, params.sigma, params.nu, stream)[0]
    return int(min(val, INT64_MAX))


# ---------------------------------------------------------------------------
# NBI


def nbi_pmf(x, params: NbiParams):
    """NBI probability mass at integer x (vectorized, log-space)."""
    x = np.asarray(x)
    xf = x.astype(np.float64)
    r = 1.0 / params.sigma
    sm = params.sigma * params.mu
    log_p = (
        log_gamma(xf + r) - log_gamma(xf + 1.0) - log_gamma(r)
        + xf * (np.log(sm) - np.log1p(sm)) - r * np.log1p(sm)
    )
    with np.errstate(under="ignore"):
        out = np.where((xf >= 0.0) & (xf == np.floor(xf)), np.exp(log_p), 0.0)
    return out if out.ndim else float(out)


def nbi_draw_values(mu, sigma: float, streams: CellStreams,
                    lanes: np.ndarray | None = None) -> np.ndarray:
    """Exact NBI draws via the gamma-Poisson mixture (float64 counts)."""
    mu = np.asarray(mu, dtype=np.float64)
    if np.any(mu <= 0.0):
        raise ValidationError("nbi draws need strictly positive means")
    lam = gamma_rvs(1.0 / sigma, sigma * mu, streams, lanes)
    return poisson_rvs(lam, streams, lanes)


def nbi_sample(params: NbiParams, stream: CellStream) -> int:
    val = nbi_draw_values(params.mu, params.sigma, stream)[0]
    return int(min(val, INT64_MAX))


# ---------------------------------------------------------------------------
# Poisson


def poisson_pmf(x, mu: float):
    """Poisson mass at integer x; handles mu == 0 as a point mass at 0."""
    x = np.asarray(x)
    xf = x.astype(np.float64)
    valid = (xf >= 0.0) & (xf == np.floor(xf))
    if mu < 0.0:
        raise ValidationError("poisson mean must be non-negative")
    if mu == 0.0:
        out = np.where(valid & (xf == 0.0), 1.0, 0.0)
        return out if out.ndim else float(out)
    with np.errstate(under="ignore"):
        out = np.where(
            valid,
            np.exp(xf * np.log(mu) - mu - log_gamma(xf + 1.0)),
            0.0,
        )
    return out if out.ndim else float(out)


def poisson_draw_values(mu, streams: CellStreams,
                        lanes: np.ndarray | None = None) -> np.ndarray:
    mu = np.asarray(mu, dtype=np.float64)
    return poisson_rvs(mu, streams, lanes)


def poisson_sample(mu: float, stream: CellStream) -> int:
    return int(min(poisson_draw_values(mu, stream)[0], INT64_MAX))


# ---------------------------------------------------------------------------
# Family-generic helpers


def _pointwise_pmf_obj(pmf_at: Callable[[np.ndarray], np.ndarray],
                       mean: float, sd: float, tail_eps: float) -> Pmf:
    """Build a Pmf by evaluating a pointwise mass function out to the tails."""
    half = tail_eps / 2.0
    upper = int(np.ceil(mean + 10.0 * sd + 10.0))
    for _ in range(64):
        xs = np.arange(0, upper + 1, dtype=np.int64)
        probs = pmf_at(xs)
        cum = np.cumsum(probs)
        if 1.0 - cum[-1] <= half:
            break
        upper *= 2
        if upper > _MAX_SUPPORT:
            raise ValidationError("pmf support exceeds the implementation cap")
    else:
        raise ValidationError("pmf tail search failed to terminate")
    keep_hi = int(np.searchsorted(cum, 1.0 - half) + 1)
    keep_hi = min(keep_hi, probs.size)
    below = cum - probs  # mass strictly left of each x
    keep_lo = int(np.searchsorted(below, half, side="right") - 1)
    keep_lo = max(keep_lo, 0)
    return Pmf(keep_lo, probs[keep_lo:keep_hi], tail_eps)


def family_pmf_obj(family: str, mu: float, sigma: float | None = None,
                   nu: float | None = None,
                   tail_eps: float = DEFAULT_TAIL_EPS) -> Pmf:
    """Pmf of any family at one mean; the common entry for reports and tools."""
    if family == "gaf":
        if sigma is None or nu is None:
            raise ValidationError("gaf needs sigma and nu")
        return gaf_pmf_obj(GafParams(mu, sigma, nu), tail_eps)
    if family == "nbi":
        if sigma is None:
            raise ValidationError("nbi needs sigma")
        p = NbiParams(mu, sigma)
        return _pointwise_pmf_obj(lambda xs: nbi_pmf(xs, p), p.mean,
                                  np.sqrt(p.variance), tail_eps)
    if family == "poisson":
        if mu == 0.0:
            return Pmf(0, np.array([1.0]), tail_eps)
        return _pointwise_pmf_obj(lambda xs: poisson_pmf(xs, mu), mu,
                                  np.sqrt(mu), tail_eps)
    raise ValidationError(f"unknown family {family!r}")


def family_pmf_at(family: str, y, mu: float, sigma: float | None = None,
                  nu: float | None = None):
    """Pointwise mass of any family (vectorized over y)."""
    if family == "gaf":
        if sigma is None or nu is None:
            raise ValidationError("gaf needs sigma and nu")
        return gaf_pmf(y, GafParams(mu, sigma, nu))
    if family == "nbi":
        if sigma is None:
            raise ValidationError("nbi needs sigma")
        return nbi_pmf(y, NbiParams(mu, sigma))
    if family == "poisson":
        return poisson_pmf(y, mu)
    raise ValidationError(f"unknown family {family!r}")


def dispersion(params: GafParams, rel_tol: float = 1e-12) -> str:
    """Classify sigma^2 * mu^nu against mu: 'under', 'equi', or 'over'.

    The comparison is done directly on the variance function rather than by
    rearranging for nu, which keeps mu = 1 (where the log rearrangement
    degenerates) and mu < 1 (where the inequality flips) honest.
    """
    var = params.variance
    mu = params.mu
    if abs(var - mu) <= rel_tol * max(abs(var), abs(mu)):
        return "equi"
    return "over" if var > mu else "under"
