"""Special functions used by the count distributions.

Thin wrappers around scipy.special, kept behind stable names so the rest of
the package (and its tests) can treat them as a single point of truth.  The
test suite validates each of these against independent series / continued
fraction implementations.
"""

import numpy as np
import scipy.special as sps


def log_gamma(x):
    """Natural log of the gamma function, ln Γ(x), for x > 0."""
    return sps.gammaln(x)


def reg_lower_gamma(a, x):
    """Regularized lower incomplete gamma function P(a, x) = γ(a, x) / Γ(a).

    P(a, 0) = 0 and P(a, x) → 1 as x → ∞; monotone increasing in x.
    Accurate for very small shapes (a ~ 1e-6), which the pseudocount path
    exercises.
    """
    return sps.gammainc(a, x)

def reg_lower_gamma_inv(a, q):
    """Inverse of ``reg_lower_gamma`` in x: returns x with P(a, x) = q."""
    return sps.gammaincinv(a, q)


def normal_cdf(z):
    """Standard normal CDF Φ(z)."""
    return sps.ndtr(z)


def normal_ppf(q):
    """Standard normal quantile function Φ⁻¹(q) for q in (0, 1)."""
    return sps.ndtri(q)


def log_factorial(n):
    """ln(n!) for non-negative integer arrays."""
    return sps.gammaln(np.asarray(n, dtype=np.float64) + 1.0)
