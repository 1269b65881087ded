"""Exact variate generators driven by per-cell counter streams.

Every generator here consumes uniforms from a :class:`~countsynth.streams.CellStreams`
instance, one lane per cell, so a given cell's draw depends only on
(master_seed, replicate, cell_id) and never on chunking, thread count, or
the order in which other cells were processed.  numpy's bundled generators
cannot provide that contract cheaply, which is why these are hand-rolled.

All routines are rejection samplers or exact inversions -- no approximate
(e.g. normal-approximation) branches.
"""

from __future__ import annotations

import numpy as np

from .special import log_gamma, normal_ppf
from .streams import CellStreams

# Rejection loops converge in a handful of attempts with overwhelming
# probability; the cap only guards against implementation bugs.
_MAX_ATTEMPTS = 256


def _checked_lanes(streams: CellStreams, lanes: np.ndarray | None) -> np.ndarray:
    if lanes is None:
        return np.arange(streams.n)
    lanes = np.asarray(lanes, dtype=np.int64)
    return lanes


def standard_gamma(shape: np.ndarray, streams: CellStreams,
                   lanes: np.ndarray | None = None) -> np.ndarray:
    """Draw one Gamma(shape, 1) variate per lane (Marsaglia-Tsang squeeze).

    Shapes below one are boosted: draw at shape+1 and multiply by U^(1/shape),
    with the product formed in log space so that astronomically small results
    underflow cleanly to zero instead of losing the entire draw.
    """
    lanes = _checked_lanes(streams, lanes)
    a = np.broadcast_to(np.asarray(shape, dtype=np.float64), lanes.shape).copy()
    if not np.all(a > 0.0):
        raise ValueError("gamma shape parameters must be positive")

    small = a < 1.0
    a_eff = np.where(small, a + 1.0, a)
    d = a_eff - 1.0 / 3.0
    c = 1.0 / np.sqrt(9.0 * d)

    out = np.empty(lanes.shape, dtype=np.float64)
    pending = np.arange(lanes.size)
    attempts = 0
    while pending.size:
        attempts += 1
        if attempts > _MAX_ATTEMPTS:
            raise RuntimeError("gamma rejection sampler failed to converge")
        u_norm, u_acc = streams.next_uniform_pair(lanes[pending])
        x = normal_ppf(u_norm)
        t = 1.0 + c[pending] * x
        w = t * t * t
        positive = w > 0.0
        x2 = x * x
        accept = positive & (u_acc < 1.0 - 0.0331 * x2 * x2)
        needs_log = positive & ~accept
        if needs_log.any():
            logw = np.log(w, out=np.zeros_like(w), where=needs_log)
            full = needs_log & (
                np.log(u_acc) < 0.5 * x2 + d[pending] * (1.0 - w + logw)
            )
            accept |= full
        taken = pending[accept]
        out[taken] = d[taken] * w[accept]
        pending = pending[~accept]

    small_idx = np.flatnonzero(small)
    if small_idx.size:
        u_boost = streams.next_uniform(lanes[small_idx])
        with np.errstate(under="ignore"):
            out[small_idx] = np.exp(
                np.log(out[small_idx]) + np.log(u_boost) / a[small_idx]
            )
    return out


def gamma_rvs(shape: np.ndarray, scale: np.ndarray, streams: CellStreams,
              lanes: np.ndarray | None = None) -> np.ndarray:
    """Gamma(shape, scale) variates, one per lane."""
    lanes = _checked_lanes(streams, lanes)
    s = np.broadcast_to(np.asarray(scale, dtype=np.float64), lanes.shape)
    if not np.all(s > 0.0):
        raise ValueError("gamma scale parameters must be positive")
    with np.errstate(under="ignore", over="ignore"):
        return standard_gamma(shape, streams, lanes) * s


def _poisson_inversion(lam: np.ndarray, streams: CellStreams,
                       lanes: np.ndarray) -> np.ndarray:
    """Sequential-search CDF inversion; one uniform per draw.  lam < ~15."""
    u = streams.next_uniform(lanes)
    p = np.exp(-lam)
    cum = p.copy()
    k = np.zeros(lam.shape, dtype=np.int64)
    active = u > cum
    while active.any():
        k[active] += 1
        p[active] *= lam[active] / k[active]
        cum[active] += p[active]
        # Terms vanish once we are ~50 sd into the tail; a uniform landing in
        # the unrepresentable tail takes the last reachable quantile.
        active &= (u > cum) & (p > 1e-250)
    return k


def _poisson_ptrs(lam: np.ndarray, streams: CellStreams,
                  lanes: np.ndarray) -> np.ndarray:
    """Hormann's transformed rejection (PTRS); exact for lam >= 10."""
    loglam = np.log(lam)
    b = 0.931 + 2.53 * np.sqrt(lam)
    a = -0.059 + 0.02483 * b
    inv_alpha = 1.1239 + 1.1328 / (b - 3.4)
    v_r = 0.9277 - 3.6224 / (b - 2.0)

    out = np.empty(lam.shape, dtype=np.float64)
    pending = np.arange(lam.size)
    attempts = 0
    while pending.size:
        attempts += 1
        if attempts > _MAX_ATTEMPTS:
            raise RuntimeError("poisson PTRS sampler failed to converge")
        u, v = streams.next_uniform_pair(lanes[pending])
        u -= 0.5
        us = 0.5 - np.abs(u)
        bp = b[pending]
        kf = np.floor((2.0 * a[pending] / us + bp) * u + lam[pending] + 0.43)

        fast = (us >= 0.07) & (v <= v_r[pending])
        reject = (kf < 0.0) | ((us < 0.013) & (v > us))
        rest = ~fast & ~reject
        accept = fast
        if rest.any():
            with np.errstate(divide="ignore", invalid="ignore"):
                lhs = np.log(v * inv_alpha[pending] /
                             (a[pending] / (us * us) + bp))
            rhs = -lam[pending] + kf * loglam[pending] - log_gamma(kf + 1.0)
            accept = fast | (rest & (lhs <= rhs))

        taken = pending[accept]
        out[taken] = kf[accept]
        pending = pending[~accept]
    # Counts can exceed int64 only for absurd rates; callers clamp.
    return out


def poisson_rvs(lam: np.ndarray, streams: CellStreams,
                lanes: np.ndarray | None = None) -> np.ndarray:
    """Poisson(lam) variates per lane, returned as float64 counts.

    Returned values are exact non-negative integers stored in doubles so
    that ludicrous rates (possible when a heavy-tailed mixing draw feeds
    back in) do not overflow before the caller's clamp.
    """
    lanes = _checked_lanes(streams, lanes)
    lam = np.broadcast_to(np.asarray(lam, dtype=np.float64), lanes.shape).copy()
    if not np.all(lam >= 0.0):
        raise ValueError("poisson rates must be non-negative")

    out = np.zeros(lanes.shape, dtype=np.float64)
    small = (lam > 0.0) & (lam < 10.0)
    big = lam >= 10.0
    if small.any():
        idx = np.flatnonzero(small)
        out[idx] = _poisson_inversion(lam[idx], streams, lanes[idx])
    if big.any():
        idx = np.flatnonzero(big)
        out[idx] = _poisson_ptrs(lam[idx], streams, lanes[idx])
    return out


def bernoulli_rvs(p: np.ndarray, streams: CellStreams,
                  lanes: np.ndarray | None = None) -> np.ndarray:
    """Bernoulli(p) indicator per lane (one uniform each)."""
    lanes = _checked_lanes(streams, lanes)
    p = np.broadcast_to(np.asarray(p, dtype=np.float64), lanes.shape)
    if np.any((p < 0.0) | (p > 1.0)):
        raise ValueError("bernoulli probabilities must lie in [0, 1]")
    u = streams.next_uniform(lanes)
    return (u < p).astype(np.int64)
