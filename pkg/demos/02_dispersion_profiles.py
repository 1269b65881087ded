"""Compare how much noise each count family applies across cell sizes.

The Poisson mechanism adds variance equal to the cell size, the
gamma-mixture (negative binomial) family adds variance that grows
quadratically, and the three-parameter family can be tuned so its
variance *shrinks* as cells get bigger.  This script prints the
variance and dispersion profiles side by side, including the point
where the three-parameter family crosses from over- to underdispersed.
"""

import numpy as np
import pandas as pd

from countsynth import GafParams, dispersion, family_pmf_obj


def main():
    sizes = [0.5, 1, 2, 5, 10, 20, 50]
    rows = []
    for mu in sizes:
        poisson = family_pmf_obj("poisson", mu)
        nbi = family_pmf_obj("nbi", mu, sigma=0.5)
        gaf = family_pmf_obj("gaf", mu, sigma=1.0, nu=-0.5)
        rows.append({
            "cell size": mu,
            "poisson var": poisson.variance,
            "nbi var (sigma=0.5)": nbi.variance,
            "gaf var (sigma=1, nu=-0.5)": gaf.variance,
            "gaf var/mean": gaf.variance / gaf.mean,
        })
    frame = pd.DataFrame(rows)
    with pd.option_context("display.float_format", "{:10.3f}".format):
        print(frame.to_string(index=False))

    print("\nThe mixture family's noise explodes with size (1300+ at size "
          "50), while the\nthree-parameter family applies *less* absolute "
          "noise to large cells - the\nbehaviour that protects small "
          "counts without wrecking big ones.")

    print("\nDispersion labels for gaf(sigma=1, nu=-0.5):")
    for mu in [0.5, 1.0, 2.0, 10.0]:
        pmf = family_pmf_obj("gaf", mu, sigma=1.0, nu=-0.5)
        label = dispersion(GafParams(mu, 1.0, -0.5))
        print(f"  size {mu:4}: variance/mean = "
              f"{pmf.variance / pmf.mean:6.3f}  -> {label}")
    print("\nBelow size 1 the family is overdispersed like a mixture; "
          "above, it tightens\nup.  No Poisson mixture can do that - "
          "mixtures are overdispersed everywhere.")

    print("\nContinuous-formula variance sigma^2 * mu^nu vs the actual "
          "discrete variance:")
    for mu in [5.0, 10.0, 50.0]:
        pmf = family_pmf_obj("gaf", mu, sigma=1.0, nu=-0.5)
        formula = 1.0 * mu**-0.5
        print(f"  size {mu:4}: formula {formula:.4f}, discrete "
              f"{pmf.variance:.4f}")
    print("The gap is the price of returning integers: rounding a "
          "continuous draw\nwhose spread is under one unit adds "
          "variance the formula does not see.")


if __name__ == "__main__":
    main()
