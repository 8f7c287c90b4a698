"""Random-intercept cumulative link mixed models.

The marginal likelihood integrates a normal random intercept u_g out of each
group's product of CLM probabilities, with u entering the latent predictor
additively. Integrals are approximated by adaptive Gauss-Hermite quadrature
centred at each group's conditional mode; one node is the Laplace
approximation.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import optimize
from scipy.special import logsumexp

from .clm import (
    COND_H_WARN,
    ClmProblem,
    Control,
    FitResult,
    Parameters,
    ThresholdStructure,
    _hessian_summary,
    fit_newton,
    interval_terms,
    response_fingerprint,
)
from .errors import BoundaryWarning, ClmError, ConditionWarning
from .formula import DesignMatrices

LOG_SIGMA_BOUNDARY = -8.0
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class MixedFitResult(FitResult):
    sigma: float = 0.0
    n_quad: int = 7
    n_groups: int = 0
    fixed_loglik: float = float("nan")


@dataclass(frozen=True)
class MixedControl:
    n_nodes: int = 7
    max_iter: int = 500
    grad_tol: float = 1e-5
    fd_step: float = 1e-5
    start_sigma: float = 1.0


class MixedProblem:
    """Marginal likelihood of a random-intercept CLM as a function of (core params, sigma)."""

    def __init__(self, design: DesignMatrices, link, ts="flexible", offset=None):
        if design.group_index is None:
            raise ClmError("a mixed model needs a grouping variable, e.g. '(1 | id)'")
        self.core = ClmProblem(design, link, ts, offset)
        self.groups = np.asarray(design.group_index, dtype=np.int64)
        self.G = int(self.groups.max()) + 1 if self.groups.size else 0
        self.labels = design.group_labels or tuple(str(i) for i in range(self.G))

    def _gsum(self, v):
        return np.bincount(self.groups, weights=v, minlength=self.G)

    def _row_parts(self, x, u_rows):
        core = self.core
        eta, s, _, _ = core._eta(x, extra=u_rows)
        lo, hi = core._bounds(eta)
        logp, r_lo, r_hi, h_lo, h_hi = interval_terms(core.link, lo, hi)
        return logp, r_lo, r_hi, h_lo, h_hi, s

    def conditional_modes(self, x, sigma, max_iter: int = 100, tol: float = 1e-11):
        """Maximise h_g(u) = sum_i log p_i(u) + log phi(u; sigma) for every group.

        Returns the modes and the curvature -h''(mode).
        """
        u = np.zeros(self.G)
        inv_var = 1.0 / (sigma * sigma)

        def h_and_derivs(u):
            logp, r_lo, r_hi, h_lo, h_hi, s = self._row_parts(x, u[self.groups])
            d1 = -(r_hi - r_lo) / s
            d2 = (h_hi + h_lo + 2.0 * r_hi * r_lo) / s**2
            h = self._gsum(logp) - 0.5 * u * u * inv_var
            return h, self._gsum(d1) - u * inv_var, self._gsum(d2) - inv_var

        h, g1, g2 = h_and_derivs(u)
        for _ in range(max_iter):
            if np.all(np.abs(g1) < tol * (1.0 + np.abs(h))):
                break
            curv = np.where(g2 < 0, -g2, np.abs(g2) + inv_var)
            step = g1 / curv
            t = np.ones(self.G)
            for _h in range(30):
                hn, g1n, g2n = h_and_derivs(u + t * step)
                bad = ~(hn >= h - 1e-13 * np.abs(h)) | ~np.isfinite(hn)
                if not bad.any():
                    break
                t = np.where(bad, 0.5 * t, t)
            u = u + t * step
            h, g1, g2 = hn, g1n, g2n
        bad = ~np.isfinite(h) | ~np.isfinite(g2) | (g2 >= 0) | (np.abs(g1) > 1e-6 * (1.0 + np.abs(h)))
        if bad.any():
            j = int(np.flatnonzero(bad)[0])
            raise ClmError(f"conditional mode search failed for group {self.labels[j]!r}")
        return u, -g2

    def marginal_loglik(self, x, sigma: float, n_nodes: int = 7) -> float:
        if n_nodes < 1 or n_nodes % 2 == 0:
            raise ValueError("n_nodes must be odd and >= 1")
        if sigma < 0:
            raise ValueError("sigma must be >= 0")
        if not self.core.valid(x):
            return -math.inf
        if sigma == 0.0:
            return -self.core.nll(x)
        try:
            mode, curv = self.conditional_modes(x, sigma)
        except ClmError:
            raise
        scale = np.sqrt(2.0 / curv)
        nodes, weights = np.polynomial.hermite.hermgauss(n_nodes)
        log_terms = np.empty((n_nodes, self.G))
        for k, (xk, wk) in enumerate(zip(nodes, weights)):
            u = mode + scale * xk
            logp = self._row_parts(x, u[self.groups])[0]
            h = self._gsum(logp) - 0.5 * (u / sigma) ** 2 - math.log(sigma) - _HALF_LOG_2PI
            log_terms[k] = math.log(wk) + xk * xk + h
        per_group = np.log(scale) + logsumexp(log_terms, axis=0)
        return math.fsum(per_group.tolist())


def marginal_log_likelihood(design: DesignMatrices, link, ts, params, sigma: float, n_nodes: int = 7, offset=None) -> float:
    x = params.flat() if isinstance(params, Parameters) else np.asarray(params, dtype=float)
    return MixedProblem(design, link, ts, offset).marginal_loglik(x, sigma, n_nodes)


def _fd_gradient(f, x, h):
    g = np.empty_like(x)
    for j in range(x.size):
        step = h * (1.0 + abs(x[j]))
        e = np.zeros_like(x)
        e[j] = step
        g[j] = (f(x + e) - f(x - e)) / (2 * step)
    return g


def _fd_hessian(grad, x, h):
    n = x.size
    H = np.empty((n, n))
    for j in range(n):
        step = h * (1.0 + abs(x[j]))
        e = np.zeros(n)
        e[j] = step
        H[:, j] = (grad(x + e) - grad(x - e)) / (2 * step)
    return 0.5 * (H + H.T)


def fit_mixed(
    design: DesignMatrices,
    link="logit",
    ts: ThresholdStructure | str = "flexible",
    control: MixedControl | None = None,
    offset=None,
) -> MixedFitResult:
    """Maximise the marginal likelihood over (thresholds, coefficients, log sigma).

    The fixed-effects fit supplies starting values and is also the sigma = 0
    boundary candidate: when the interior optimum drifts below
    log sigma = -8 or does not beat the fixed fit, the boundary solution is
    returned with ``boundary=True``.
    """
    control = control or MixedControl()
    mp = MixedProblem(design, link, ts, offset)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        fixed = fit_newton(design, link, ts, Control(), offset)
    n_core = mp.core.npar

    def objective(v):
        try:
            val = mp.marginal_loglik(v[:n_core], math.exp(v[n_core]), control.n_nodes)
        except ClmError:
            return math.inf
        return -val if math.isfinite(val) else math.inf

    h = control.fd_step

    def grad(v):
        return _fd_gradient(objective, v, h)

    v0 = np.concatenate([fixed.coef, [math.log(control.start_sigma)]])
    res = optimize.minimize(objective, v0, jac=grad, method="BFGS",
                            options={"gtol": control.grad_tol, "maxiter": control.max_iter})
    v = res.x
    f = float(res.fun)
    names = list(fixed.names) + ["log.sigma"]
    messages = list(fixed.messages)
    boundary = False
    if v[n_core] < LOG_SIGMA_BOUNDARY or not (f <= -fixed.loglik):
        boundary = True
        msg = "random-effect standard deviation estimated at the boundary (sigma = 0)"
        warnings.warn(msg, BoundaryWarning, stacklevel=2)
        messages.append(msg)
        npar = n_core + 1
        vcov = np.full((npar, npar), np.nan)
        vcov[:n_core, :n_core] = fixed.vcov
        coef = np.concatenate([fixed.coef, [-math.inf]])
        return MixedFitResult(
            coef=coef, names=tuple(names), vcov=vcov, loglik=fixed.loglik, nobs=design.n,
            n_dropped=design.n_dropped, niter=int(res.nit), n_halvings=0,
            max_grad=fixed.max_grad, cond_H=fixed.cond_H, converged=fixed.converged,
            link=fixed.link, threshold=fixed.threshold, response_labels=fixed.response_labels,
            n_alpha=fixed.n_alpha, x_names=fixed.x_names, w_names=fixed.w_names, z_names=fixed.z_names,
            boundary=True, formula=design.formula, encoder=design.encoder,
            gradient=None, last_step=None, response_fingerprint=fixed.response_fingerprint,
            messages=tuple(messages), sigma=0.0, n_quad=control.n_nodes, n_groups=mp.G,
            fixed_loglik=fixed.loglik,
        )
    g = grad(v)
    H = _fd_hessian(grad, v, 1e-4)
    cond = _hessian_summary(H, names, strict=True)
    max_grad = float(np.max(np.abs(g)))
    converged = bool(max_grad < control.grad_tol * 10) and fixed.converged
    if cond > COND_H_WARN:
        msg = f"cond.H = {cond:.2g} exceeds {COND_H_WARN:g}; the model may be ill-defined"
        warnings.warn(msg, ConditionWarning, stacklevel=2)
        messages.append(msg)
    try:
        vcov = np.linalg.inv(H)
        vcov = 0.5 * (vcov + vcov.T)
    except np.linalg.LinAlgError:
        vcov = np.full_like(H, np.nan)
    return MixedFitResult(
        coef=v, names=tuple(names), vcov=vcov, loglik=-f, nobs=design.n,
        n_dropped=design.n_dropped, niter=int(res.nit), n_halvings=0,
        max_grad=max_grad, cond_H=cond, converged=converged,
        link=fixed.link, threshold=fixed.threshold, response_labels=fixed.response_labels,
        n_alpha=fixed.n_alpha, x_names=fixed.x_names, w_names=fixed.w_names, z_names=fixed.z_names,
        boundary=False, formula=design.formula, encoder=design.encoder,
        gradient=g, last_step=np.linalg.solve(H, g) if np.isfinite(cond) else None,
        response_fingerprint=response_fingerprint(mp.core.y),
        messages=tuple(messages), sigma=float(math.exp(v[n_core])), n_quad=control.n_nodes,
        n_groups=mp.G, fixed_loglik=fixed.loglik,
    )
