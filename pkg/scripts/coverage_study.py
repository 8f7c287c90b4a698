"""Monte Carlo coverage of 95% Wald intervals for a logit CLM.

    python scripts/coverage_study.py --replicates 1000 --n 500 --workers 4
"""

import argparse

import numpy as np

from clmkit.simulate import SimConfig, recovery_study


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--replicates", type=int, default=1000)
    ap.add_argument("--n", type=int, default=500)
    ap.add_argument("--seed", type=int, default=11)
    ap.add_argument("--link", default="logit")
    ap.add_argument("--level", type=float, default=0.95)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args(argv)

    X = np.random.default_rng(args.seed).normal(size=(args.n, 2))
    cfg = SimConfig(theta=(-1.0, 0.0, 1.0), beta=(0.8, -0.5), link=args.link, seed=args.seed,
                    n_replicates=args.replicates)
    rep = recovery_study(cfg, X, level=args.level, workers=args.workers)
    # binomial Monte Carlo error of a coverage estimate at the nominal level
    mc = 1.96 * np.sqrt(args.level * (1 - args.level) / rep.n_used)
    print(f"{rep.n_used} replicates used, {rep.n_failed} failed; Monte Carlo band +/- {mc:.3f}")
    print(f"{'name':>8} {'truth':>7} {'coverage':>9} {'bias':>8}")
    for row in rep.as_rows():
        print(f"{row['name']:>8} {row['truth']:7.3f} {row['coverage']:9.3f} {row['bias']:8.4f}")


if __name__ == "__main__":
    main()
