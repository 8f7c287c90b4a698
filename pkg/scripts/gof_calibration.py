"""Null rejection rates of the Lipsitz, Hosmer-Lemeshow and Pulkstenis-Robinson tests.

    python scripts/gof_calibration.py --replicates 500 --n 600
"""

import argparse
import warnings

import numpy as np

from clmkit.clm import fit_newton
from clmkit.data import ColumnSchema, table_from_columns
from clmkit.errors import ClmWarning
from clmkit.formula import build_design
from clmkit.gof import hosmer_lemeshow_ordinal, lipsitz_test, pulkstenis_robinson
from clmkit.simulate import SimConfig, simulate_responses

NAMES = ("Lipsitz", "Hosmer-Lemeshow", "PR chi-squared", "PR deviance")


def replicate(r, n, seed, g):
    rng = np.random.default_rng(seed * 1_000_003 + r)
    study = rng.choice(["O", "R", "P"], n)
    sex = rng.choice(["F", "M"], n)
    age = rng.normal(0, 1, n)
    X = np.column_stack([study == "R", study == "P", sex == "M", age]).astype(float)
    cfg = SimConfig(theta=(-1.0, 0.0, 1.0), beta=(0.8, -0.4, 0.3, 0.5), seed=seed)
    y = simulate_responses(cfg, X, replicate=r)
    table = table_from_columns(
        [ColumnSchema("study", "categorical", ("O", "R", "P")), ColumnSchema("sex", "categorical", ("F", "M")),
         ColumnSchema("age", "numeric"), ColumnSchema("y", "ordinal", ("1", "2", "3", "4"))],
        {"study": list(study), "sex": list(sex), "age": age.tolist(), "y": [str(v) for v in y]},
    )
    d = build_design("y ~ study + sex + age", table)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ClmWarning)
        fit = fit_newton(d)
        return (lipsitz_test(fit, d, g).p, hosmer_lemeshow_ordinal(fit, d, g).p,
                pulkstenis_robinson(fit, d, ["study", "sex"]).p,
                pulkstenis_robinson(fit, d, ["study", "sex"], form="deviance").p)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--replicates", type=int, default=500)
    ap.add_argument("--n", type=int, default=600)
    ap.add_argument("--groups", type=int, default=10)
    ap.add_argument("--alpha", type=float, default=0.05)
    ap.add_argument("--seed", type=int, default=77)
    args = ap.parse_args(argv)

    ps = np.array([replicate(r, args.n, args.seed, args.groups) for r in range(args.replicates)])
    rates = (ps < args.alpha).mean(axis=0)
    mc = 1.96 * np.sqrt(args.alpha * (1 - args.alpha) / args.replicates)
    print(f"rejection at alpha={args.alpha} over {args.replicates} null replicates (Monte Carlo band +/- {mc:.3f})")
    for name, rate in zip(NAMES, rates):
        print(f"{name:>16} {rate:.3f}")


if __name__ == "__main__":
    main()
