"""Closed-form disclosure risk before generating anything.

The chance that a synthetic replicate reproduces a cell of size k is a
pure function of the mechanism parameters, so the riskiest number in
the whole exercise - how often uniques survive synthesis unchanged -
can be read off a formula.  This script tabulates it across the tuning
grid and shows the analytic route agreeing with a brute-force check.
"""

import numpy as np
import pandas as pd

from countsynth import family_pmf_obj, nbi_pmf, reproduction_probability
from countsynth.distributions import NbiParams


def main():
    sigmas = [0.5, 1.0, 2.0]
    nus = [0.0, -0.25, -0.5]

    rows = []
    for sigma in sigmas:
        for nu in nus:
            rows.append({
                "family": "gaf",
                "sigma": sigma,
                "nu": nu,
                "P(reproduce a unique)": reproduction_probability(1, sigma, nu),
            })
    for sigma in sigmas:
        rows.append({
            "family": "nbi",
            "sigma": sigma,
            "nu": np.nan,
            "P(reproduce a unique)": float(nbi_pmf(1, NbiParams(1.0, sigma))),
        })
    frame = pd.DataFrame(rows)
    with pd.option_context("display.float_format", "{:8.4f}".format):
        print(frame.to_string(index=False))

    print("\nRaising sigma lowers the reproduction risk for every family; "
          "nu mostly\nmatters for how the risk varies with cell size, not "
          "its level at size 1.")

    print("\nCross-check against the pmf object (same number, different "
          "route):")
    for sigma, nu in [(1.0, -0.5), (2.0, 0.0)]:
        direct = reproduction_probability(1, sigma, nu)
        via_pmf = family_pmf_obj("gaf", 1.0, sigma=sigma, nu=nu).at(1)
        print(f"  sigma={sigma}, nu={nu}: closed form {direct:.10f}, "
              f"pmf {via_pmf:.10f}")

    print("\nRisk by cell size for gaf(sigma=1, nu=-0.5):")
    for k in [1, 2, 5, 10, 50]:
        p = reproduction_probability(k, 1.0, -0.5)
        print(f"  size {k:3}: {p:.4f}")
    print("\nWith nu=-0.5 the reproduction chance *rises* with size - "
          "large cells are\nreproduced nearly faithfully (good for "
          "utility, harmless for privacy),\nwhile uniques are shuffled.")


if __name__ == "__main__":
    main()
