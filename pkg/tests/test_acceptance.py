"""Acceptance criteria, one test each, at their stated tolerances.

Every test records a PASS/FAIL line that is printed in the terminal summary.
"""

import math
import warnings

import numpy as np
import pytest
from scipy import optimize, special, stats

from clmkit.clm import ClmProblem, aic, fit_newton
from clmkit.clmm import MixedProblem, fit_mixed, marginal_log_likelihood
from clmkit.data import ColumnSchema, table_from_columns
from clmkit.errors import BoundaryWarning, ClmWarning, ConditionWarning
from clmkit.formula import build_design, design_from_arrays
from clmkit.gof import hl_df, hosmer_lemeshow_ordinal, lipsitz_test, pr_df, pulkstenis_robinson
from clmkit.inference import fitted_probabilities, lrt, lrt_from_loglik, predict_cells, tukey_p, wald_row
from clmkit.links import LINKS, get_link
from clmkit.simulate import SimConfig, recovery_study, simulate_responses

from conftest import ACCEPTANCE, synthetic_xy
from oracles import fd_gradient, fd_hessian, norm_rel_err, random_point, rel_err, trapezoid_group_loglik


def record(n, title, ok, detail):
    ACCEPTANCE[n] = (title, bool(ok), detail)
    assert ok, f"criterion {n} ({title}) failed: {detail}"


def test_01_aic_identity():
    a, b = aic(-359.80, 7), aic(-358.74, 8)
    ok = abs(a - 733.60) <= 0.01 and abs(b - 733.47) <= 0.01
    record(1, "AIC identity", ok, f"{a:.4f} vs 733.60, {b:.4f} vs 733.47 (tol 0.01)")


def test_02_wald_arithmetic():
    cases = [
        ((2.2127, 0.3723), 5.943, 3, 2.79e-9, 0.005e-9),
        ((-0.4778, 0.2350), -2.033, 3, 0.042, 0.0005),
        ((-0.03713, 0.01546), -2.402, 3, 0.0163, 0.00005),
    ]
    parts, ok = [], True
    for (est, se), z, zd, p, ptol in cases:
        r = wald_row("b", est, se)
        good = round(r.z, zd) == z and abs(r.p - p) <= ptol
        ok &= good
        parts.append(f"z {r.z:.4f} p {r.p:.3g}")
    record(2, "Wald arithmetic", ok, "; ".join(parts))


@pytest.mark.xfail(strict=True, reason="rounded logLiks give p 0.8607, 0.00301 outside 0.8577 +/- 0.003; see ledger")
def test_03_lrt_arithmetic():
    r1 = lrt_from_loglik(-359.80, 7, -359.65, 9)
    r2 = lrt_from_loglik(-359.80, 7, -358.74, 8)
    ok1 = abs(r1.p - 0.8577) <= 0.003
    ok2 = abs(r2.stat - 2.12) <= 0.02 and abs(r2.p - 0.1444) <= 0.003
    # the printed LR.stat 0.307 is consistent with both printed logLiks
    r1b = lrt_from_loglik(-359.80, 7, -359.80 + 0.307 / 2, 9)
    detail = (f"rounded inputs: stat {r1.stat:.4f} p {r1.p:.5f} (target 0.8577 +/- 0.003) -> {'ok' if ok1 else 'MISS'}; "
              f"printed stat 0.307 gives p {r1b.p:.4f}; sigma test stat {r2.stat:.4f} p {r2.p:.4f} -> {'ok' if ok2 else 'MISS'}")
    record(3, "LRT arithmetic", ok1 and ok2, detail)


def test_03b_lrt_rounding_consistent_reconstruction():
    ll_alt = -359.80 + 0.307 / 2
    assert round(ll_alt, 2) == -359.65
    r = lrt_from_loglik(-359.80, 7, ll_alt, 9)
    assert abs(r.p - 0.8577) <= 0.003
    r2 = lrt_from_loglik(-359.80, 7, -358.74, 8)
    assert abs(r2.stat - 2.12) <= 0.02 and abs(r2.p - 0.1444) <= 0.003


def test_04_tukey():
    p = tukey_p(2.496, 3)
    oracle = stats.studentized_range.sf(2.496 * math.sqrt(2), 3, np.inf)
    record(4, "Tukey adjustment", abs(p - 0.0336) <= 0.0005, f"p {p:.6f} (scipy {oracle:.6f}), target 0.0336 +/- 0.0005")


def test_05_gof_df():
    from conftest import consent_shaped

    _s, _d, table = consent_shaped(seed=1, n_missing_age=12)
    d = build_design("response ~ study + sex + partner_age", table)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ClmWarning)
        fit = fit_newton(d)
        lip = lipsitz_test(fit, d, g=10).df
        hl = hosmer_lemeshow_ordinal(fit, d, g=10).df
        pr = pulkstenis_robinson(fit, d, ["study", "sex"]).df
    ok = (lip, hl, pr) == (9, 35, 41) and hl_df(10, 5) == 35 and pr_df(2 * 6, 5, 3) == 41
    record(5, "GoF df formulas", ok, f"Lipsitz {lip}, HL {hl}, PR {pr} (want 9, 35, 41)")


def _fits_for_coherence():
    rng = np.random.default_rng(6)
    out = []
    for i, link in enumerate(LINKS):
        for ti, ts in enumerate(("flexible", "symmetric", "equidistant")):
            for extra in ("", "nominal", "scale"):
                n = 400
                X = rng.normal(size=(n, 2))
                W = rng.choice([0.0, 1.0], size=(n, 1)) if extra == "nominal" else None
                Z = rng.choice([0.0, 1.0], size=(n, 1)) if extra == "scale" else None
                y = simulate_responses(SimConfig(theta=(-1.2, -0.3, 0.4, 1.3), beta=(0.6, -0.4), link=link,
                                                 seed=100 + i), X)
                d = design_from_arrays(X, y, L=5, W=W, Z=Z)
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", ClmWarning)
                    out.append((fit_newton(d, link, ts), d))
    return out


def test_06_probability_coherence():
    printed = round(0.8701 + 0.0461, 4) == 0.9162 and round(0.9162, 3) == 0.916
    worst = 0.0
    for fit, d in _fits_for_coherence():
        P = fitted_probabilities(fit, d.X, d.W, d.Z)
        worst = max(worst, float(np.max(np.abs(P.sum(axis=1) - 1))))
        link = get_link(fit.link)
        par = fit.params()
        theta = fit.theta
        thr = theta[None, :] - (d.W @ par.beta_nom.T if d.W.shape[1] else 0.0)
        s = np.exp(d.Z @ par.zeta) if d.Z.shape[1] else np.ones(d.n)
        cum = link.cdf((thr - (d.X @ par.beta)[:, None]) / s[:, None])
        worst = max(worst, float(np.max(np.abs(np.cumsum(P, axis=1)[:, :-1] - cum))))
    ok = printed and worst < 1e-10
    record(6, "Probability coherence", ok, f"0.8701 + 0.0461 = 0.9162 -> 0.916; max cum/prob identity error {worst:.1e} over 45 fits")


def _oracle_nll(params, X, y, K):
    theta = np.cumsum(np.concatenate([params[:1], np.exp(params[1:K])]))
    beta = params[K:]
    eta = X @ beta
    cut = np.concatenate([[-np.inf], theta, [np.inf]])
    hi = special.expit(cut[y] - eta)
    lo = special.expit(cut[y - 1] - eta)
    return -float(np.sum(np.log(hi - lo)))


def test_07_oracle_equivalence():
    worst_ll = worst_par = 0.0
    for seed in range(20):
        X, y, _ = synthetic_xy(seed, n=200, p=2)
        fit = fit_newton(design_from_arrays(X, y, L=4))
        K = 3
        start = np.zeros(K + 2)
        start[0] = -1.0
        f = lambda v: _oracle_nll(v, X, y, K)
        res = optimize.minimize(f, start, method="Powell", options={"xtol": 1e-10, "ftol": 1e-14, "maxfev": 100_000})
        res = optimize.minimize(f, res.x, method="Nelder-Mead",
                                options={"xatol": 1e-10, "fatol": 1e-14, "maxfev": 100_000, "maxiter": 100_000})
        theta = np.cumsum(np.concatenate([res.x[:1], np.exp(res.x[1:K])]))
        par = np.concatenate([theta, res.x[K:]])
        worst_ll = max(worst_ll, abs(-res.fun - fit.loglik))
        worst_par = max(worst_par, float(np.max(np.abs(par - fit.coef))))
    ok = worst_ll <= 1e-5 and worst_par <= 1e-4
    record(7, "Oracle equivalence", ok, f"max |dlogLik| {worst_ll:.1e} (tol 1e-5), max |dparam| {worst_par:.1e} (tol 1e-4) over 20 datasets")


def test_08_derivatives_vs_finite_differences():
    worst_g = worst_h = 0.0
    n_models = 0
    for li, link in enumerate(LINKS):
        for ti, ts in enumerate(("flexible", "symmetric", "equidistant")):
            for q, r in ((0, 0), (1, 0), (0, 1), (1, 1)):
                rng = np.random.default_rng(1000 * li + 100 * ti + 10 * q + r)
                n, L = 30, 5
                X = rng.normal(size=(n, 2))
                W = rng.normal(size=(n, q)) if q else None
                Z = rng.normal(size=(n, r)) if r else None
                y = rng.integers(1, L + 1, n)
                y[:L] = np.arange(1, L + 1)
                prob = ClmProblem(design_from_arrays(X, y, L=L, W=W, Z=Z), link, ts)
                n_models += 1
                for _ in range(50):
                    x = random_point(prob, rng)
                    g, H = prob.derivatives(x)
                    worst_g = max(worst_g, norm_rel_err(g, fd_gradient(prob.nll, x)))
                    worst_h = max(worst_h, norm_rel_err(H, fd_hessian(prob.gradient, x)))
    ok = worst_g < 1e-6 and worst_h < 1e-4
    record(8, "Gradient/Hessian vs finite differences", ok,
           f"max-norm rel err gradient {worst_g:.1e} (tol 1e-6), Hessian {worst_h:.1e} (tol 1e-4); {n_models} models x 50 points")


def test_09_binary_reduction():
    import statsmodels.api as sm

    rng = np.random.default_rng(9)
    X = rng.normal(size=(500, 2))
    y = simulate_responses(SimConfig(theta=(0.3,), beta=(0.9, -0.6), seed=9), X)
    fit = fit_newton(design_from_arrays(X, y, L=2))
    p_clm = fitted_probabilities(fit, X)[:, 0]
    oracle = sm.Logit((y == 1).astype(float), sm.add_constant(X)).fit(disp=0, tol=1e-12, maxiter=200)
    p_bin = oracle.predict(sm.add_constant(X))
    err = float(np.max(np.abs(p_clm - p_bin)))
    record(9, "L=2 logit reduction", err <= 1e-6, f"max |P(Y=1|x) difference| {err:.1e} (tol 1e-6), n=500")


def test_10_offset_invariance():
    X, y, _ = synthetic_xy(10, n=400, p=2)
    d = design_from_arrays(X, y, L=4)
    base = fit_newton(d)
    P0 = fitted_probabilities(base, X)
    link = get_link("logit")
    worst_t = worst_b = worst_p = 0.0
    for c in (-2.0, 0.5):
        fit = fit_newton(d, offset=c)
        worst_t = max(worst_t, float(np.max(np.abs(fit.theta - (base.theta + c)))))
        worst_b = max(worst_b, float(np.max(np.abs(fit.coef[3:] - base.coef[3:]))))
        cum = link.cdf(fit.theta[None, :] - (X @ fit.coef[3:])[:, None] - c)
        P = np.diff(np.column_stack([np.zeros(len(y)), cum, np.ones(len(y))]), axis=1)
        worst_p = max(worst_p, float(np.max(np.abs(P - P0))))
    ok = worst_t <= 1e-5 and worst_b <= 1e-6 and worst_p <= 1e-6
    record(10, "Intercept-shift invariance", ok,
           f"theta shift error {worst_t:.1e} (tol 1e-5), beta {worst_b:.1e}, probabilities {worst_p:.1e} (tol 1e-6)")


@pytest.mark.slow
def test_11_coverage():
    X = np.random.default_rng(11).normal(size=(500, 2))
    cfg = SimConfig(theta=(-1.0, 0.0, 1.0), beta=(0.8, -0.5), seed=11, n_replicates=1000)
    rep = recovery_study(cfg, X)
    rows = {r["name"]: r for r in rep.as_rows()}
    cov = {k: rows[k]["coverage"] for k in ("x1", "x2")}
    ok = all(0.93 <= v <= 0.97 for v in cov.values())
    thr = ", ".join(f"{k} {v['coverage']:.3f}" for k, v in rows.items() if k not in cov)
    record(11, "Wald coverage", ok,
           f"beta coverage {', '.join(f'{k} {v:.3f}' for k, v in cov.items())} (want [0.93, 0.97]); thresholds {thr}; "
           f"{rep.n_used} used, {rep.n_failed} failed")


def _mixed_data(seed, sigma, n_groups=30, size=4):
    rng = np.random.default_rng(seed)
    n = n_groups * size
    X = rng.normal(size=(n, 1))
    g = np.repeat(np.arange(n_groups), size)
    y = simulate_responses(SimConfig(theta=(-0.8, 0.4, 1.4), beta=(0.6,), sigma=sigma, seed=seed), X, groups=g)
    return design_from_arrays(X, y, L=4, groups=g)


@pytest.mark.slow
def test_12_clmm():
    X = np.array([[0.4], [-1.1]])
    theta, beta = np.array([0.25]), np.array([0.7])
    worst_q = 0.0
    for y in ((1, 1), (1, 2), (2, 1), (2, 2)):
        d = design_from_arrays(X, list(y), L=2, groups=[0, 0])
        got = marginal_log_likelihood(d, "logit", "flexible", np.concatenate([theta, beta]), 1.0, n_nodes=21)
        want = trapezoid_group_loglik("logit", theta, beta, X, list(y), 1.0)
        worst_q = max(worst_q, abs(got - want) / abs(want))
    d = _mixed_data(0, 1.0)
    fixed = fit_newton(d)
    exact = MixedProblem(d, "logit").marginal_loglik(fixed.coef, 0.0) == fixed.loglik
    stats_ = []
    for seed in range(100):
        d = _mixed_data(seed, [0.0, 0.5, 1.0][seed % 3])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ClmWarning)
            fixed = fit_newton(d)
            mixed = fit_mixed(d)
        stats_.append(lrt(fixed, mixed).stat)
    ok = worst_q < 1e-8 and exact and min(stats_) >= 0
    record(12, "CLMM quadrature and LRT", ok,
           f"AGQ(21) rel err {worst_q:.1e} at sigma=1 (tol 1e-8); sigma=0 exact {exact}; min LRT stat {min(stats_):.3g} over 100 fits")


def test_13_delta_vs_bootstrap():
    rng = np.random.default_rng(13)
    n = 500
    g = rng.choice(["a", "b", "c"], n)
    age = rng.normal(40, 10, n)
    X = np.column_stack([g == "b", g == "c", (age - 40) / 10]).astype(float)
    y = simulate_responses(SimConfig(theta=(-1.0, 0.0, 0.9, 1.8), beta=(0.7, -0.5, 0.4), seed=13), X)
    table = table_from_columns(
        [ColumnSchema("g", "categorical", ("a", "b", "c")), ColumnSchema("age", "numeric"),
         ColumnSchema("y", "ordinal", ("1", "2", "3", "4", "5"))],
        {"g": list(g), "age": age.tolist(), "y": [str(v) for v in y]},
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConditionWarning)  # raw age in years inflates cond(H)
        fit = fit_newton(build_design("y ~ g + age", table))
    cells = [{"g": lv, "age": a} for lv in ("a", "b", "c") for a in (30.0, 40.0, 55.0)]
    t = predict_cells(fit, cells, "prob")
    delta = np.array([r.se for r in t.rows]).reshape(len(cells), 5)
    draws = np.random.default_rng(14).multivariate_normal(fit.coef, fit.vcov, size=2000)
    X_cells, _, _ = fit.encoder.encode({"g": [c["g"] for c in cells], "age": [c["age"] for c in cells]})
    eta = draws[:, 4:] @ X_cells.T
    cum = special.expit(draws[:, None, :4] - eta[:, :, None])
    P = np.diff(np.concatenate([np.zeros(cum.shape[:2] + (1,)), cum, np.ones(cum.shape[:2] + (1,))], axis=2), axis=2)
    boot = P.std(axis=0, ddof=1)
    worst = float(np.max(np.abs(delta - boot) / boot))
    record(13, "Delta-method vs bootstrap SEs", worst <= 0.15,
           f"max relative difference {worst:.3f} (tol 0.15) over {delta.size} probabilities, 2000 draws")


def _calibration_replicate(r):
    rng = np.random.default_rng(10_000 + r)
    n = 600
    study = rng.choice(["O", "R", "P"], n)
    sex = rng.choice(["F", "M"], n)
    age = rng.normal(0, 1, n)
    X = np.column_stack([study == "R", study == "P", sex == "M", age]).astype(float)
    y = simulate_responses(SimConfig(theta=(-1.0, 0.0, 1.0), beta=(0.8, -0.4, 0.3, 0.5), seed=77, n_replicates=500),
                           X, replicate=r)
    table = table_from_columns(
        [ColumnSchema("study", "categorical", ("O", "R", "P")), ColumnSchema("sex", "categorical", ("F", "M")),
         ColumnSchema("age", "numeric"), ColumnSchema("y", "ordinal", ("1", "2", "3", "4"))],
        {"study": list(study), "sex": list(sex), "age": age.tolist(), "y": [str(v) for v in y]},
    )
    d = build_design("y ~ study + sex + age", table)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ClmWarning)
        fit = fit_newton(d)
        return (lipsitz_test(fit, d, 10).p, hosmer_lemeshow_ordinal(fit, d, 10).p,
                pulkstenis_robinson(fit, d, ["study", "sex"]).p,
                pulkstenis_robinson(fit, d, ["study", "sex"], form="deviance").p)


@pytest.mark.slow
def test_14_gof_calibration():
    ps = np.array([_calibration_replicate(r) for r in range(500)])
    rates = (ps < 0.05).mean(axis=0)
    names = ("Lipsitz", "Hosmer-Lemeshow", "Pulkstenis-Robinson chi-squared", "Pulkstenis-Robinson deviance")
    ok = all(0.02 <= v <= 0.09 for v in rates[:3])
    record(14, "GoF calibration", ok,
           ", ".join(f"{n} {v:.3f}" for n, v in zip(names, rates)) + " (want [0.02, 0.09] for the first three; 500 replicates)")
