"""Dial in a privacy target, then verify it empirically.

Policy usually arrives as a number ("uniques may survive synthesis at
most 15% of the time"), not as a sigma.  This script inverts the
closed-form risk metric to find the sigma that hits the target, then
synthesizes a fixture with that sigma and checks the realized rate.
"""

import numpy as np

from countsynth import (
    CalibrationTarget,
    MechanismConfig,
    TableSchema,
    ZeroPolicy,
    benchmark_target,
    calibrate,
    gen_fixture,
    histogram,
    reproduction_probability,
    synthesize,
    tau_empirical,
)


def main():
    target_rate = 0.15
    nu = -0.5
    print(f"Policy target: a unique may be reproduced at most "
          f"{target_rate:.0%} of the time.")

    result = calibrate(CalibrationTarget(
        metric="p_syn_given_orig",
        target=target_rate,
        free="sigma",
        family="gaf",
        k=1,
        nu=nu,
    ))
    sigma = result.value
    print(f"\nCalibrated sigma = {sigma:.6f}  "
          f"(achieved metric {result.achieved:.6f})")
    print(f"Check against the closed form: "
          f"{reproduction_probability(1, sigma, nu):.6f}")

    schema = TableSchema((
        ("A", tuple(f"a{i:03d}" for i in range(100))),
        ("B", tuple(f"b{i:03d}" for i in range(100))),
    ))
    table = gen_fixture(schema, benchmark_target(), seed=31)
    hist = histogram(table)
    uniques = int(hist.freq_of(1))
    print(f"\nFixture: {table.n_cells:,} cells, {len(table.nonzero_cells()):,} "
          f"occupied, {uniques} uniques")

    m = 200
    config = MechanismConfig(family="gaf", sigma=sigma, nu=nu,
                             zero_policy=ZeroPolicy.keep(), m=m,
                             master_seed=515_031)
    ensemble = synthesize(table, config)
    tau = tau_empirical(table, ensemble, ks=[1]).iloc[0]
    rate = tau["p_syn_given_orig"]
    se = tau["se_p_syn_given_orig"]
    print(f"\nRealized reproduction rate over {m} replicates: "
          f"{rate:.4f} (MC se {se:.4f})")
    print(f"Distance from target: {abs(rate - target_rate) / se:.2f} "
          f"standard errors")

    print("\nThe same machinery can target other metrics - expected "
          "squared error,\ngrand-total coverage at a chosen width, or the "
          "attribution probability -\nand can free nu instead of sigma "
          "where the histogram warrants it.")


if __name__ == "__main__":
    main()
