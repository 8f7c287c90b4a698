import math
import warnings

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clmkit.clm import (
    ClmProblem,
    Control,
    Parameters,
    ThresholdStructure,
    aic,
    convergence_report,
    correct_decimals,
    fit_newton,
    gradient,
    hessian,
    negative_log_likelihood,
)
from clmkit.errors import BoundaryWarning, ConditionWarning, ConvergenceError, NoDataError, SingularHessianError
from clmkit.formula import design_from_arrays
from clmkit.links import LINKS, get_link, pdf

from conftest import synthetic_xy
from oracles import MP_CDF, MP_SF, fd_gradient, fd_hessian, naive_nll, norm_rel_err, random_point, rel_err

STRUCTURES = ("flexible", "equidistant", "symmetric")


def one_obs(y):
    return design_from_arrays(np.zeros((1, 0)), [y], L=2)


@pytest.mark.parametrize("y", [1, 2])
def test_single_observation_nll(y):
    p = Parameters(np.array([0.0]), np.zeros(0), np.zeros((1, 0)), np.zeros(0))
    assert negative_log_likelihood(one_obs(y), "logit", "flexible", p) == pytest.approx(math.log(2), abs=1e-15)


@pytest.mark.parametrize("link", ["logit", "probit", "cauchit"])
@pytest.mark.parametrize("y, sign", [(1, -1), (2, 1)])
def test_single_observation_gradient(link, y, sign):
    p = Parameters(np.array([0.0]), np.zeros(0), np.zeros((1, 0)), np.zeros(0))
    g = gradient(one_obs(y), link, "flexible", p)
    assert g[0] == pytest.approx(sign * pdf(link, 0.0) / 0.5, rel=1e-14)


def _problem(seed, link="logit", ts="flexible", L=4, n=40, p=2, q=0, r=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, p))
    W = rng.normal(size=(n, q)) if q else None
    Z = rng.normal(size=(n, r)) if r else None
    y = rng.integers(1, L + 1, n)
    y[:L] = np.arange(1, L + 1)
    d = design_from_arrays(X, y, L=L, W=W, Z=Z)
    return ClmProblem(d, link, ts), rng


@settings(max_examples=60, deadline=None)
@given(
    seed=st.integers(0, 10_000),
    link=st.sampled_from(LINKS),
    ts=st.sampled_from(STRUCTURES),
    L=st.integers(2, 6),
    q=st.integers(0, 1),
    r=st.integers(0, 1),
)
def test_nll_matches_naive_oracle(seed, link, ts, L, q, r):
    prob, rng = _problem(seed, link, ts, L, n=15, q=q, r=r)
    x = random_point(prob, rng)
    par = prob.unpack(x)
    theta = prob.thresholds(x)
    want = naive_nll(link, theta, par.beta, prob.X, prob.y, W=prob.W, B=par.beta_nom, Z=prob.Z, zeta=par.zeta)
    assert prob.nll(x) == pytest.approx(want, rel=1e-12, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(
    seed=st.integers(0, 10_000),
    link=st.sampled_from(LINKS),
    ts=st.sampled_from(STRUCTURES),
    q=st.integers(0, 1),
    r=st.integers(0, 1),
)
def test_derivatives_match_finite_differences(seed, link, ts, q, r):
    prob, rng = _problem(seed, link, ts, L=5, n=30, q=q, r=r)
    x = random_point(prob, rng)
    g, H = prob.derivatives(x)
    assert norm_rel_err(g, fd_gradient(prob.nll, x)) < 1e-6
    assert norm_rel_err(H, fd_hessian(prob.gradient, x)) < 1e-4


def _mp_hessian(link, X, Z, y, x, h="1e-12"):
    """Second differences of the flexible-threshold nll in 80-digit arithmetic."""
    K = len(x) - X.shape[1] - Z.shape[1]

    def nll(v):
        th, b, z = v[:K], v[K: K + X.shape[1]], v[K + X.shape[1]:]
        tot = mpmath.mpf(0)
        for i in range(len(y)):
            s = mpmath.exp(sum(mpmath.mpf(Z[i, j]) * z[j] for j in range(len(z))))
            lp = sum(mpmath.mpf(X[i, j]) * b[j] for j in range(len(b)))
            cuts = [(t - lp) / s for t in th]
            if y[i] > 1 and cuts[y[i] - 2] > 0:
                S = [mpmath.mpf(1)] + [MP_SF[link](c) for c in cuts] + [mpmath.mpf(0)]
                tot -= mpmath.log(S[y[i] - 1] - S[y[i]])
            else:
                F = [mpmath.mpf(0)] + [MP_CDF[link](c) for c in cuts] + [mpmath.mpf(1)]
                tot -= mpmath.log(F[y[i]] - F[y[i] - 1])
        return tot

    with mpmath.workdps(80):
        v0 = [mpmath.mpf(float(t)) for t in x]
        d = mpmath.mpf(h)
        p = len(x)
        out = np.zeros((p, p))

        def at(i, si, j, sj):
            v = list(v0)
            v[i] += si * d
            v[j] += sj * d
            return nll(v)

        for i in range(p):
            for j in range(i, p):
                val = (at(i, 1, j, 1) - at(i, 1, j, -1) - at(i, -1, j, 1) + at(i, -1, j, -1)) / (4 * d * d)
                out[i, j] = out[j, i] = float(val)
    return out


@pytest.mark.parametrize("link", LINKS)
def test_hessian_exact_in_deep_tails(link):
    # small scale pushes rows far into the tails, where f'/p - (f/p)^2 cancels
    rng = np.random.default_rng(8)
    n, L = 12, 4
    X = rng.normal(size=(n, 2))
    Z = np.ones((n, 1))
    y = np.tile(np.arange(1, L + 1), n // L)
    prob = ClmProblem(design_from_arrays(X, y, L=L, Z=Z), link, "flexible")
    x = np.array([-2.0, 0.0, 2.5, 1.2, -0.8, math.log(0.08)])
    H = prob.hessian(x)
    M = _mp_hessian(link, X, Z, y, x)
    assert norm_rel_err(H, M) < 1e-9
    assert rel_err(H, M) < 1e-7


def test_functional_interface_agrees_with_problem():
    prob, rng = _problem(3, q=1, r=1)
    x = random_point(prob, rng)
    par = prob.unpack(x)
    d = prob.design
    assert negative_log_likelihood(d, "logit", "flexible", par) == prob.nll(x)
    assert np.array_equal(gradient(d, "logit", "flexible", par), prob.gradient(x))
    assert np.array_equal(hessian(d, "logit", "flexible", par), prob.hessian(x))


def test_invalid_thresholds_signal_inf():
    prob, _ = _problem(1)
    x = np.zeros(prob.npar)
    x[:3] = [0.5, 0.2, 1.0]
    assert prob.nll(x) == math.inf


@pytest.mark.parametrize("link", LINKS)
def test_closed_form_mle_without_covariates(link):
    rng = np.random.default_rng(5)
    y = rng.choice([1, 2, 3, 4], size=400, p=[0.1, 0.2, 0.3, 0.4])
    fit = fit_newton(design_from_arrays(None, y, L=4), link)
    cum = np.cumsum(np.bincount(y, minlength=5)[1:4]) / y.size
    assert fit.converged
    assert np.allclose(fit.theta, get_link(link).quantile(cum), atol=1e-8)


def test_null_effects_estimated_near_zero():
    X, y, _ = synthetic_xy(9, n=2000, beta=(0.0, 0.0), theta=(-1.4, -0.4, 0.4, 1.4))
    fit = fit_newton(design_from_arrays(X, y))
    sl = fit.slices()["beta"]
    assert np.all(np.abs(fit.coef[sl]) < 3 * fit.se[sl])


def test_deterministic_fit():
    X, y, _ = synthetic_xy(2)
    a = fit_newton(design_from_arrays(X, y))
    b = fit_newton(design_from_arrays(X, y))
    assert a.coef.tobytes() == b.coef.tobytes()
    assert a.vcov.tobytes() == b.vcov.tobytes()
    assert (a.niter, a.n_halvings, a.loglik) == (b.niter, b.n_halvings, b.loglik)


def test_aic_identity():
    assert aic(-359.80, 7) == pytest.approx(733.60, abs=1e-9)
    X, y, _ = synthetic_xy(4)
    fit = fit_newton(design_from_arrays(X, y))
    assert fit.aic == -2 * fit.loglik + 2 * fit.n_params


def test_fit_diagnostics():
    X, y, _ = synthetic_xy(6, n=300)
    fit = fit_newton(design_from_arrays(X, y))
    assert fit.converged and fit.max_grad < 1e-8
    assert fit.niter_str == f"{fit.niter}({fit.n_halvings})"
    lam = np.linalg.eigvalsh(np.linalg.inv(fit.vcov))
    assert fit.cond_H == pytest.approx(lam.max() / lam.min(), rel=1e-6)
    assert np.all(np.linalg.eigvalsh(fit.vcov) > 0)
    assert np.allclose(fit.vcov, fit.vcov.T)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), link=st.sampled_from(LINKS), ts=st.sampled_from(STRUCTURES))
def test_thresholds_strictly_increasing(seed, link, ts):
    X, y, _ = synthetic_xy(seed, n=150, theta=(-1.5, -0.5, 0.5, 1.5))
    if np.unique(y).size < 5:
        return
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        fit = fit_newton(design_from_arrays(X, y, L=5), link, ts)
    assert np.all(np.diff(fit.theta) > 0)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_structured_fits_never_beat_flexible(seed):
    X, y, _ = synthetic_xy(seed, n=150, theta=(-1.5, -0.3, 0.4, 1.5))
    if np.unique(y).size < 5:
        return
    d = design_from_arrays(X, y, L=5)
    flex = fit_newton(d, "logit", "flexible")
    for ts in ("equidistant", "symmetric"):
        assert fit_newton(d, "logit", ts).loglik <= flex.loglik + 1e-9


@pytest.mark.parametrize(
    "counts, ts",
    [((2, 3, 3, 2), "equidistant"), ((2, 3, 3, 2), "symmetric"), ((10, 20, 40, 20, 10), "symmetric"),
     ((20, 30, 30, 20), "equidistant")],
)
def test_structured_equals_flexible_when_data_satisfy_structure(counts, ts):
    # cumulative odds 1/4, 1, 4 are log-equidistant and symmetric about zero
    y = np.repeat(np.arange(1, len(counts) + 1), counts)
    d = design_from_arrays(None, y, L=len(counts))
    assert fit_newton(d, "logit", ts).loglik == pytest.approx(fit_newton(d, "logit", "flexible").loglik, abs=1e-9)


def test_threshold_structure_matrices():
    assert np.array_equal(ThresholdStructure("equidistant").matrix(4), [[1, 0], [1, 1], [1, 2], [1, 3]])
    sym = ThresholdStructure("symmetric")
    assert sym.n_free(4) == 3 and sym.n_free(3) == 2 and sym.n_free(1) == 1
    theta = sym.matrix(4) @ np.array([0.5, 0.4, 1.2])
    assert np.allclose(theta - 0.5, -(theta - 0.5)[::-1])


def test_binary_reduces_to_logistic_regression():
    import statsmodels.api as sm

    X, y, _ = synthetic_xy(8, n=500, theta=(0.2,), beta=(0.8, -0.5))
    fit = fit_newton(design_from_arrays(X, y, L=2))
    lr = sm.Logit((y == 1).astype(float), sm.add_constant(X)).fit(disp=0, tol=1e-12, maxiter=200)
    par = fit.params()
    p_clm = get_link("logit").cdf(fit.theta[0] - X @ par.beta)
    assert np.max(np.abs(p_clm - lr.predict(sm.add_constant(X)))) < 1e-6


@pytest.mark.parametrize("c", [-2.0, 0.5])
def test_intercept_shift_invariance(c):
    X, y, _ = synthetic_xy(10, n=300)
    d = design_from_arrays(X, y)
    base = fit_newton(d)
    shifted = fit_newton(d, offset=np.full(d.n, c))
    assert np.allclose(shifted.theta, base.theta + c, atol=1e-5)
    sl = base.slices()["beta"]
    assert np.allclose(shifted.coef[sl], base.coef[sl], atol=1e-6)


def test_unobserved_extreme_level_is_boundary():
    X, y, _ = synthetic_xy(11, n=100)
    y = np.minimum(y, 3)
    with pytest.warns(BoundaryWarning):
        fit = fit_newton(design_from_arrays(X, y, L=4))
    assert fit.boundary and not fit.converged


def test_single_observed_level_rejected():
    from clmkit.errors import ClmError

    with pytest.raises(ClmError):
        fit_newton(design_from_arrays(None, [2, 2, 2], L=3))


def test_empty_design_rejected():
    with pytest.raises(NoDataError):
        fit_newton(design_from_arrays(np.zeros((0, 1)), np.zeros(0, dtype=int), L=3))


def test_singular_hessian_names_direction():
    X, y, _ = synthetic_xy(12, n=200)
    X = np.column_stack([X, X[:, 0]])
    with pytest.raises(SingularHessianError, match="x1|x3"):
        fit_newton(design_from_arrays(X, y))


def test_condition_warning():
    X, y, _ = synthetic_xy(13, n=200)
    X = X * np.array([1.0, 1e3])
    with pytest.warns(ConditionWarning):
        fit = fit_newton(design_from_arrays(X, y))
    assert fit.cond_H > 1e4


def test_scale_effect_recovered():
    from clmkit.simulate import SimConfig, simulate_responses

    rng = np.random.default_rng(14)
    X = rng.normal(size=(4000, 1))
    Z = rng.choice([0.0, 1.0], size=(4000, 1))
    cfg = SimConfig(theta=(-1.0, 0.0, 1.0), beta=(0.7,), zeta=(0.5,), seed=14)
    y = simulate_responses(cfg, X, Z=Z)
    fit = fit_newton(design_from_arrays(X, y, Z=Z))
    assert abs(fit.coef[fit.index("scale:z1")] - 0.5) < 4 * fit.se[fit.index("scale:z1")]


def test_nominal_effect_recovered():
    from clmkit.simulate import SimConfig, simulate_responses

    rng = np.random.default_rng(15)
    W = rng.choice([0.0, 1.0], size=(5000, 1))
    cfg = SimConfig(theta=(-1.0, 0.0, 1.0), beta_nom=((0.3,), (0.0,), (-0.4,)), seed=15)
    y = simulate_responses(cfg, np.zeros((5000, 0)), W=W)
    fit = fit_newton(design_from_arrays(None, y, W=W))
    nom = fit.params().beta_nom[:, 0]
    se = fit.se[fit.slices()["nominal"]]
    assert np.all(np.abs(nom - np.array([0.3, 0.0, -0.4])) < 4 * se)


def test_correct_decimals_arithmetic():
    assert correct_decimals(0.004) == 2
    assert correct_decimals(4e-13) == 12
    assert correct_decimals(0.0) == 15


def test_convergence_report():
    X, y, _ = synthetic_xy(16, n=300)
    fit = fit_newton(design_from_arrays(X, y), control=Control(grad_tol=1e-12))
    rows = convergence_report(fit)
    assert fit.max_grad < 1e-12
    assert [r.name for r in rows] == list(fit.names)
    assert all(r.correct_decimals >= 10 for r in rows)


def test_convergence_report_refuses_unconverged():
    X, y, _ = synthetic_xy(17, n=300)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        fit = fit_newton(design_from_arrays(X, y), control=Control(max_iter=1))
    assert not fit.converged
    with pytest.raises(ConvergenceError):
        convergence_report(fit)


def test_step_halving_counted():
    # a start far from the optimum forces the first full step to overshoot
    X, y, _ = synthetic_xy(18, n=300, beta=(3.0, -3.0))
    d = design_from_arrays(X, y)
    fit = fit_newton(d, control=Control(start=np.array([-6.0, -5.9, -5.8, 8.0, -8.0])))
    assert fit.converged
    assert fit.niter >= 1 and fit.n_halvings >= 0


def test_separated_data_not_reported_as_converged():
    from clmkit.errors import SeparationWarning

    x = np.arange(1.0, 10.0)[:, None]
    d = design_from_arrays(x, [1, 1, 1, 2, 2, 2, 3, 3, 3], L=3)
    with pytest.warns(SeparationWarning):
        fit = fit_newton(d)
    assert not fit.converged and not fit.boundary
    assert any("separated" in m for m in fit.messages)
