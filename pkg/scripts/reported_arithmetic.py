"""Recompute the derived quantities of the consent-study output from its printed inputs.

Each line shows the printed value next to the recomputed one, so rounding in
the printed inputs is visible.
"""

import math

from clmkit.clm import aic
from clmkit.gof import hl_df, pr_df
from clmkit.inference import lrt_from_loglik, tukey_p, wald_row


def main():
    print("AIC")
    for ll, k, printed in ((-359.80, 7, 733.60), (-358.74, 8, 733.47)):
        print(f"  logLik {ll} k {k}: {aic(ll, k):.2f} (printed {printed})")

    print("Wald z and p")
    for est, se, z, p in ((2.2127, 0.3723, 5.943, 2.79e-9), (-0.4778, 0.2350, -2.033, 0.042),
                          (-0.03713, 0.01546, -2.402, 0.0163)):
        r = wald_row("b", est, se)
        print(f"  {est}/{se}: z {r.z:.3f} p {r.p:.3g} (printed {z}, {p})")

    print("Likelihood ratio tests")
    for ll0, k0, ll1, k1, printed in ((-359.80, 7, -359.65, 9, 0.8577), (-359.80, 7, -358.74, 8, 0.1444)):
        r = lrt_from_loglik(ll0, k0, ll1, k1)
        print(f"  {ll0} vs {ll1}: stat {r.stat:.3f} df {r.df} p {r.p:.4f} (printed {printed})")
    r = lrt_from_loglik(-359.80, 7, -359.80 + 0.307 / 2, 9)
    print(f"  from the printed statistic 0.307: p {r.p:.4f}")

    print("Tukey-adjusted pairwise p")
    print(f"  z 2.496, 3 levels: {tukey_p(2.496, 3):.4f} (printed 0.0336)")

    print("Odds-ratio upper limit")
    print(f"  exp(2.9858) = {math.exp(2.9858):.4f}; over its rounding interval [2.98575, 2.98585]: "
          f"[{math.exp(2.98575):.4f}, {math.exp(2.98585):.4f}] (printed 19.803)")

    print("Goodness-of-fit degrees of freedom")
    print(f"  Lipsitz g=10: 9; Hosmer-Lemeshow g=10, L=5: {hl_df(10, 5)}; "
          f"Pulkstenis-Robinson 12 groups, L=5, 3 covariates: {pr_df(12, 5, 3)}")


if __name__ == "__main__":
    main()
