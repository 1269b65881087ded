"""Trace the risk-utility frontier of the two tunable families.

Generates a deterministic benchmark-shaped fixture (3.5M cells, ~90%
empty, a long tail of large counts), then evaluates every (family,
sigma, nu) combination analytically - no synthesis needed - and prints
the frontier.  The punchline: on this table shape the three-parameter
family is riskier *and* more useful at every grid point, so the two
families trace separate frontiers rather than trading places.
"""

import pandas as pd

from countsynth import (
    ZeroPolicy,
    benchmark_schema,
    benchmark_target,
    gen_fixture,
    histogram,
    sweep,
)


def main():
    print("Generating the benchmark-shaped fixture...")
    table = gen_fixture(benchmark_schema(), benchmark_target(), seed=123)
    hist = histogram(table)
    print(f"  {table.n_cells:,} cells, {len(table.nonzero_cells()):,} occupied, "
          f"grand total {table.n:,}")

    frame = sweep(hist, m=10, zero_policy=ZeroPolicy.pseudocount(0.01))
    cols = ["family", "sigma", "nu", "risk", "utility", "loss"]
    with pd.option_context("display.float_format", "{:10.4f}".format):
        print("\n" + frame[cols].to_string(index=False))

    gaf = frame[frame["family"] == "gaf"]
    nbi = frame[frame["family"] == "nbi"]
    print(f"\nthree-parameter family: risk in "
          f"[{gaf['risk'].min():.3f}, {gaf['risk'].max():.3f}], "
          f"loss in [{gaf['loss'].min():.0f}, {gaf['loss'].max():.0f}]")
    print(f"gamma-mixture family:   risk in "
          f"[{nbi['risk'].min():.3f}, {nbi['risk'].max():.3f}], "
          f"loss in [{nbi['loss'].min():.0f}, {nbi['loss'].max():.0f}]")

    if gaf["risk"].min() > nbi["risk"].max() and \
            gaf["loss"].max() < nbi["loss"].min():
        print("\nOn this shape the grids do not overlap: every "
              "three-parameter setting is\nriskier and lower-loss than "
              "every mixture setting.  Choosing between the\nfamilies is "
              "choosing which side of that gap to stand on; sigma then "
              "tunes\nposition within the chosen frontier.")

    print("\nWithin each family, raising sigma trades risk away for loss:")
    for family in ("gaf", "nbi"):
        sub = frame[frame["family"] == family].sort_values("sigma")
        sub = sub.drop_duplicates("sigma", keep="first")
        for _, row in sub.iterrows():
            print(f"  {family}  sigma={row['sigma']:>4}: "
                  f"risk {row['risk']:.3f}, loss {row['loss']:.0f}")


if __name__ == "__main__":
    main()
