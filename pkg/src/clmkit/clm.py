"""Cumulative link models: likelihood, analytic derivatives, Newton-Raphson fit.

The model for row i and cut k is

    P(Y_i <= k) = F(eta_ik),  eta_ik = (theta_k - w_i' B_k - x_i' beta - o_i) / exp(z_i' zeta)

with ``theta = J @ alpha`` for a threshold structure matrix ``J``, nominal
coefficients ``B`` (one row per cut), location ``beta``, scale ``zeta`` and
a known offset ``o`` (zero unless given). The flat parameter vector is
ordered ``[alpha, vec(B) cut-major, beta, zeta]``.
"""

from __future__ import annotations

import hashlib
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy import stats

from .errors import (
    BoundaryWarning,
    ClmError,
    ConditionWarning,
    ConvergenceError,
    NoDataError,
    SeparationWarning,
    SingularHessianError,
)
from .formula import DesignEncoder, DesignMatrices
from .links import LinkFamily, get_link, log1mexp

COND_H_WARN = 1e4
# Near a finite optimum the next Newton step is tiny; along a diverging
# direction it stays O(1) while the gradient decays exponentially.
DIVERGENT_STEP = 1e-4


class InvalidParameters(ClmError):
    """Parameters outside the valid region (non-increasing thresholds, zero cell probability)."""


# ---------------------------------------------------------------------------
# threshold structures
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ThresholdStructure:
    kind: str = "flexible"

    def __post_init__(self):
        if self.kind not in ("flexible", "symmetric", "equidistant"):
            raise ValueError(f"unknown threshold structure {self.kind!r}")

    def matrix(self, K: int) -> np.ndarray:
        """Linear map from free parameters to the K materialised thresholds."""
        if self.kind == "flexible":
            return np.eye(K)
        if self.kind == "equidistant":
            if K < 2:
                return np.ones((K, 1))
            return np.column_stack([np.ones(K), np.arange(K, dtype=float)])
        # symmetric: central value plus half-distances, innermost first
        h = K // 2
        J = np.zeros((K, 1 + h))
        J[:, 0] = 1.0
        for j in range(h):
            m = h - j
            J[j, m] = -1.0
            J[K - 1 - j, m] = 1.0
        return J

    def n_free(self, K: int) -> int:
        return self.matrix(K).shape[1]

    def names(self, cut_labels: Sequence[str]) -> list[str]:
        K = len(cut_labels)
        if self.kind == "flexible":
            return list(cut_labels)
        if self.kind == "equidistant":
            return ["threshold.1", "spacing"][: self.n_free(K)]
        return ["central"] + [f"spacing.{m}" for m in range(1, K // 2 + 1)]

    def start(self, theta: np.ndarray) -> np.ndarray:
        J = self.matrix(len(theta))
        alpha, *_ = np.linalg.lstsq(J, theta, rcond=None)
        return alpha


# ---------------------------------------------------------------------------
# parameters
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Parameters:
    theta_free: np.ndarray
    beta: np.ndarray
    beta_nom: np.ndarray  # shape (L-1, q)
    zeta: np.ndarray

    def flat(self) -> np.ndarray:
        return np.concatenate([self.theta_free, self.beta_nom.ravel(), self.beta, self.zeta])

    @classmethod
    def from_flat(cls, x, m: int, K: int, q: int, p: int, r: int) -> "Parameters":
        x = np.asarray(x, dtype=float)
        i = 0
        alpha = x[i:i + m]; i += m
        nom = x[i:i + K * q].reshape(K, q); i += K * q
        beta = x[i:i + p]; i += p
        zeta = x[i:i + r]
        return cls(alpha.copy(), beta.copy(), nom.copy(), zeta.copy())


# ---------------------------------------------------------------------------
# per-row interval probabilities
# ---------------------------------------------------------------------------


def _median(link: LinkFamily) -> float:
    return float(link.quantile(0.5))


def interval_terms(link: LinkFamily, lo: np.ndarray, hi: np.ndarray):
    """log p, f/p at both ends and the second derivatives of log p in each end.

    p = F(hi) - F(lo). Works in log space throughout so that rows deep in a
    tail keep a finite log-likelihood. The mixed derivative is r_lo * r_hi.
    Below the median p is factored as F(hi)(1 - F(lo)/F(hi)), above it as
    S(lo)(1 - S(hi)/S(lo)), and all derivatives go through the link's own
    log-derivatives; f/p and f'/p - (f/p)^2 formed directly cancel
    catastrophically in exponential tails. Infinite ends contribute zeros.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    upper = lo > _median(link)
    fin_lo, fin_hi = np.isfinite(lo), np.isfinite(hi)
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        lc_hi, lc_lo = link.logcdf(hi), link.logcdf(lo)
        ls_hi, ls_lo = link.logsf(hi), link.logsf(lo)
        # ratio of each end's cdf (sf) mass to p
        neg_w = log1mexp(np.minimum(lc_lo - lc_hi, 0.0))
        neg_v = log1mexp(np.minimum(ls_hi - ls_lo, 0.0))
        logp = np.where(upper, ls_lo + neg_v, lc_hi + neg_w)
        logp = np.where(hi > lo, logp, -np.inf)
        logp = np.where(np.isnan(logp), -np.inf, logp)
        w, u = np.exp(-neg_w), np.exp(lc_lo - lc_hi - neg_w)
        v, t = np.exp(-neg_v), np.exp(ls_hi - ls_lo - neg_v)
        lam_hi, lam_lo = link.dlogcdf(hi), link.dlogcdf(lo)
        mu_hi, mu_lo = -link.dlogsf(hi), -link.dlogsf(lo)
        r_hi = np.where(upper, t * mu_hi, w * lam_hi)
        r_lo = np.where(upper, v * mu_lo, u * lam_lo)
        h_hi = np.where(upper,
                        -t * link.d2logsf(hi) - t * v * mu_hi**2,
                        w * link.d2logcdf(hi) - w * u * lam_hi**2)
        h_lo = np.where(upper,
                        v * link.d2logsf(lo) - v * t * mu_lo**2,
                        -u * link.d2logcdf(lo) - u * w * lam_lo**2)
        r_hi, h_hi = np.where(fin_hi, r_hi, 0.0), np.where(fin_hi, h_hi, 0.0)
        r_lo, h_lo = np.where(fin_lo, r_lo, 0.0), np.where(fin_lo, h_lo, 0.0)
    return logp, r_lo, r_hi, h_lo, h_hi


# ---------------------------------------------------------------------------
# the model object working on flat vectors
# ---------------------------------------------------------------------------


class ClmProblem:
    """Precomputed design pieces for fast likelihood evaluation."""

    def __init__(self, design: DesignMatrices, link, ts: ThresholdStructure | str = "flexible", offset=None):
        self.design = design
        self.link = get_link(link)
        self.ts = ts if isinstance(ts, ThresholdStructure) else ThresholdStructure(ts)
        self.K = design.L - 1
        self.J = self.ts.matrix(self.K)
        self.m = self.J.shape[1]
        self.X, self.W, self.Z = design.X, design.W, design.Z
        self.p, self.q, self.r = self.X.shape[1], self.W.shape[1], self.Z.shape[1]
        self.y = np.asarray(design.response_idx, dtype=np.int64)
        self.n = self.y.shape[0]
        self.offset = np.zeros(self.n) if offset is None else np.broadcast_to(np.asarray(offset, dtype=float), (self.n,)).copy()
        self.npar = self.m + self.K * self.q + self.p + self.r
        if self.n and (self.y.min() < 1 or self.y.max() > design.L):
            raise ClmError("response index outside 1..L")

    # -- parameter bookkeeping ------------------------------------------------
    def unpack(self, x) -> Parameters:
        return Parameters.from_flat(x, self.m, self.K, self.q, self.p, self.r)

    def names(self) -> list[str]:
        d = self.design
        cuts = [f"{a}|{b}" for a, b in zip(d.response_labels[:-1], d.response_labels[1:])]
        out = self.ts.names(cuts)
        out += [f"{w}:{c}" for c in cuts for w in d.w_names]
        out += list(d.x_names)
        out += [f"scale:{z}" for z in d.z_names]
        return out

    def thresholds(self, x) -> np.ndarray:
        return self.J @ np.asarray(x[: self.m])

    # -- core evaluation ----------------------------------------------------
    def _eta(self, x, extra=None):
        """Return (eta (n, K), scale s (n,), per-row thresholds (n, K))."""
        par = self.unpack(x)
        theta = self.J @ par.theta_free
        thr = np.broadcast_to(theta, (self.n, self.K))
        if self.q:
            thr = thr - self.W @ par.beta_nom.T
        lp = self.X @ par.beta + self.offset
        if extra is not None:
            lp = lp + extra
        s = np.exp(self.Z @ par.zeta) if self.r else np.ones(self.n)
        eta = (thr - lp[:, None]) / s[:, None]
        return eta, s, thr, theta

    def valid(self, x) -> bool:
        if not np.all(np.isfinite(x)):
            return False
        _, _, thr, theta = self._eta(x)
        if self.K > 1:
            if np.any(np.diff(theta) <= 0):
                return False
            if self.q and np.any(np.diff(thr, axis=1) <= 0):
                return False
        return True

    def _bounds(self, eta):
        idx = np.arange(self.n)
        hi = np.where(self.y < self.K + 1, eta[idx, np.minimum(self.y - 1, self.K - 1)], np.inf)
        lo = np.where(self.y > 1, eta[idx, np.maximum(self.y - 2, 0)], -np.inf)
        return lo, hi

    def row_logprob(self, x, extra=None) -> np.ndarray:
        eta, _, _, _ = self._eta(x, extra)
        lo, hi = self._bounds(eta)
        return interval_terms(self.link, lo, hi)[0]

    def nll(self, x, extra=None) -> float:
        """Negative log-likelihood; ``inf`` signals an invalid parameter point."""
        if not self.valid(x):
            return math.inf
        lp = self.row_logprob(x, extra)
        if not np.all(np.isfinite(lp)):
            return math.inf
        return float(-lp.sum())

    def _eta_derivs(self, eta, s, which):
        """Derivative of eta at the chosen end (lo or hi) w.r.t. all parameters.

        Returns ``(D, D_lin, eta_end)`` where D is (n, npar), D_lin the
        location/threshold part (zeta columns zero) and eta_end the end values
        with infinities replaced by zero.
        """
        n, K = self.n, self.K
        if which == "hi":
            k = self.y - 1
            active = self.y <= K
        else:
            k = self.y - 2
            active = self.y >= 2
        kk = np.clip(k, 0, K - 1)
        e = np.where(active, eta[np.arange(n), kk], 0.0)
        inv_s = np.where(active, 1.0 / s, 0.0)
        D = np.zeros((n, self.npar))
        D[:, : self.m] = self.J[kk] * inv_s[:, None]
        off = self.m
        if self.q:
            block = np.zeros((n, K, self.q))
            block[np.arange(n), kk, :] = -self.W * inv_s[:, None]
            D[:, off: off + K * self.q] = block.reshape(n, K * self.q)
        off += K * self.q
        D[:, off: off + self.p] = -self.X * inv_s[:, None]
        off += self.p
        D_lin = D.copy()
        if self.r:
            D[:, off: off + self.r] = -e[:, None] * self.Z
        return D, D_lin, e

    def derivatives(self, x, hessian: bool = True):
        """Gradient and Hessian of the negative log-likelihood."""
        if not self.valid(x):
            raise InvalidParameters("thresholds are not strictly increasing")
        eta, s, _, _ = self._eta(x)
        lo, hi = self._bounds(eta)
        logp, r_lo, r_hi, h_lo, h_hi = interval_terms(self.link, lo, hi)
        if not np.all(np.isfinite(logp)):
            raise InvalidParameters("zero probability for an observed response")
        D_hi, Dl_hi, e_hi = self._eta_derivs(eta, s, "hi")
        D_lo, Dl_lo, e_lo = self._eta_derivs(eta, s, "lo")
        g_rows = r_hi[:, None] * D_hi - r_lo[:, None] * D_lo
        grad = -g_rows.sum(axis=0)
        if not hessian:
            return grad, None
        C = D_hi.T @ ((r_hi * r_lo)[:, None] * D_lo)
        H = D_hi.T @ (h_hi[:, None] * D_hi) + D_lo.T @ (h_lo[:, None] * D_lo) + C + C.T
        if self.r:
            zs = slice(self.npar - self.r, self.npar)
            A = r_hi[:, None] * Dl_hi - r_lo[:, None] * Dl_lo
            cross = -A.T @ self.Z
            H[:, zs] += cross
            H[zs, :] += cross.T
            c = r_hi * e_hi - r_lo * e_lo
            H[zs, zs] += self.Z.T @ (c[:, None] * self.Z)
        return grad, -H

    def gradient(self, x):
        return self.derivatives(x, hessian=False)[0]

    def hessian(self, x):
        return self.derivatives(x)[1]

    # -- starting values ----------------------------------------------------
    def start(self) -> np.ndarray:
        counts = np.bincount(self.y, minlength=self.K + 2)[1: self.K + 1]
        cum = np.clip(np.cumsum(counts) / max(self.n, 1), 0.01, 0.99)
        theta = np.asarray(self.link.quantile(cum), dtype=float).reshape(-1)
        for k in range(1, self.K):
            theta[k] = max(theta[k], theta[k - 1] + 0.01)
        theta = theta + (self.offset.mean() if self.n else 0.0)
        alpha = self.ts.start(theta)
        x = np.zeros(self.npar)
        x[: self.m] = alpha
        return x


# ---------------------------------------------------------------------------
# public functional interface
# ---------------------------------------------------------------------------


def negative_log_likelihood(design: DesignMatrices, link, ts, params: Parameters, offset=None) -> float:
    return ClmProblem(design, link, ts, offset).nll(params.flat())


def gradient(design: DesignMatrices, link, ts, params: Parameters, offset=None) -> np.ndarray:
    return ClmProblem(design, link, ts, offset).gradient(params.flat())


def hessian(design: DesignMatrices, link, ts, params: Parameters, offset=None) -> np.ndarray:
    return ClmProblem(design, link, ts, offset).hessian(params.flat())


# ---------------------------------------------------------------------------
# fit results
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Control:
    max_iter: int = 100
    grad_tol: float = 1e-8
    max_halvings: int = 10
    start: np.ndarray | None = None


@dataclass(frozen=True)
class FitResult:
    coef: np.ndarray
    names: tuple[str, ...]
    vcov: np.ndarray
    loglik: float
    nobs: int
    n_dropped: int
    niter: int
    n_halvings: int
    max_grad: float
    cond_H: float
    converged: bool
    link: str
    threshold: str
    response_labels: tuple[str, ...]
    n_alpha: int
    x_names: tuple[str, ...] = ()
    w_names: tuple[str, ...] = ()
    z_names: tuple[str, ...] = ()
    boundary: bool = False
    formula: str = ""
    encoder: DesignEncoder | None = None
    gradient: np.ndarray | None = None
    last_step: np.ndarray | None = None
    response_fingerprint: str = ""
    messages: tuple[str, ...] = ()

    @property
    def L(self) -> int:
        return len(self.response_labels)

    @property
    def n_params(self) -> int:
        return int(len(self.coef))

    @property
    def aic(self) -> float:
        return aic(self.loglik, self.n_params)

    @property
    def niter_str(self) -> str:
        return f"{self.niter}({self.n_halvings})"

    @property
    def se(self) -> np.ndarray:
        with np.errstate(invalid="ignore"):
            return np.sqrt(np.diag(self.vcov))

    @property
    def threshold_structure(self) -> ThresholdStructure:
        return ThresholdStructure(self.threshold)

    @property
    def cut_labels(self) -> list[str]:
        r = self.response_labels
        return [f"{a}|{b}" for a, b in zip(r[:-1], r[1:])]

    def params(self) -> Parameters:
        K = self.L - 1
        return Parameters.from_flat(self.coef[: self.n_core], self.n_alpha, K, len(self.w_names), len(self.x_names), len(self.z_names))

    @property
    def n_core(self) -> int:
        """Number of CLM parameters (excludes any random-effect variance)."""
        K = self.L - 1
        return self.n_alpha + K * len(self.w_names) + len(self.x_names) + len(self.z_names)

    @property
    def theta(self) -> np.ndarray:
        """Materialised thresholds."""
        return self.threshold_structure.matrix(self.L - 1) @ self.coef[: self.n_alpha]

    def slices(self) -> dict[str, slice]:
        K = self.L - 1
        a = self.n_alpha
        b = a + K * len(self.w_names)
        c = b + len(self.x_names)
        d = c + len(self.z_names)
        return {"alpha": slice(0, a), "nominal": slice(a, b), "beta": slice(b, c), "zeta": slice(c, d)}

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"unknown parameter {name!r}; known: {list(self.names)}") from None


def aic(loglik: float, k: int) -> float:
    return -2.0 * loglik + 2.0 * k


def response_fingerprint(y) -> str:
    y = np.ascontiguousarray(np.asarray(y, dtype=np.int64))
    return hashlib.sha256(y.tobytes()).hexdigest()[:16]


def _solve_step(H: np.ndarray, g: np.ndarray) -> np.ndarray:
    try:
        c = np.linalg.cholesky(H)
        z = np.linalg.solve(c, g)
        return np.linalg.solve(c.T, z)
    except np.linalg.LinAlgError:
        lam, V = np.linalg.eigh(H)
        big = np.max(np.abs(lam)) if lam.size else 1.0
        lam = np.maximum(np.abs(lam), 1e-8 * max(big, 1e-300))
        return V @ ((V.T @ g) / lam)


def _hessian_summary(H: np.ndarray, names: Sequence[str], strict: bool):
    lam, V = np.linalg.eigh(H)
    absl = np.abs(lam)
    if absl.size == 0:
        return 1.0
    hi, lo = absl.max(), absl.min()
    if strict and (lo <= 1e-12 * hi or lo == 0.0):
        j = int(np.argmin(absl))
        k = int(np.argmax(np.abs(V[:, j])))
        raise SingularHessianError(
            f"Hessian is singular; smallest eigenvalue {lam[j]:.3g} points mainly along {names[k]!r}"
        )
    return float(hi / lo) if lo > 0 else math.inf


def newton(problem: ClmProblem, control: Control = Control()):
    """Damped Newton-Raphson minimisation of ``problem.nll``.

    Returns ``(x, f, g, H, niter, nhalf, converged, step)``.
    """
    x = problem.start() if control.start is None else np.asarray(control.start, dtype=float).copy()
    f = problem.nll(x)
    if not math.isfinite(f):
        raise InvalidParameters("starting values are outside the valid parameter region")
    g, H = problem.derivatives(x)
    niter = nhalf = 0
    converged = False
    step = np.zeros_like(x)
    for _ in range(control.max_iter):
        if np.max(np.abs(g), initial=0.0) < control.grad_tol:
            converged = True
            break
        step = _solve_step(H, g)
        niter += 1
        t = 1.0
        accepted = False
        for _h in range(control.max_halvings + 1):
            xn = x - t * step
            fn = problem.nll(xn)
            if math.isfinite(fn) and fn <= f + 1e-12 * max(1.0, abs(f)):
                accepted = True
                break
            t *= 0.5
            nhalf += 1
        if not accepted:
            break
        x, f = xn, fn
        g, H = problem.derivatives(x)
    else:
        converged = np.max(np.abs(g), initial=0.0) < control.grad_tol
    if not converged and np.max(np.abs(g), initial=0.0) < control.grad_tol:
        converged = True
    final_step = _solve_step(H, g) if H.size else step
    return x, f, g, H, niter, nhalf, converged, final_step


def fit_newton(
    design: DesignMatrices,
    link="logit",
    ts: ThresholdStructure | str = "flexible",
    control: Control | None = None,
    offset=None,
) -> FitResult:
    """Maximum likelihood fit of a cumulative link model."""
    control = control or Control()
    if design.n == 0:
        raise NoDataError("no data to fit")
    problem = ClmProblem(design, link, ts, offset)
    observed = np.unique(problem.y)
    if observed.size < 2:
        raise ClmError("the response must use at least two observed levels")
    messages = []
    boundary = False
    unobserved = sorted(set(range(1, design.L + 1)) - set(observed.tolist()))
    if unobserved:
        boundary = True
        labels = [design.response_labels[i - 1] for i in unobserved]
        msg = f"response level(s) {labels} never observed; adjacent thresholds are on the boundary"
        warnings.warn(msg, BoundaryWarning, stacklevel=2)
        messages.append(msg)
    x, f, g, H, niter, nhalf, converged, step = newton(problem, control)
    names = problem.names()
    cond = _hessian_summary(H, names, strict=not boundary)
    if boundary:
        converged = False
    elif converged and np.max(np.abs(step), initial=0.0) > DIVERGENT_STEP:
        converged = False
        j = int(np.argmax(np.abs(step)))
        msg = (f"estimates diverge (Newton step {np.max(np.abs(step)):.3g} along {names[j]!r} at a vanishing gradient); "
               "the data may be separated")
        warnings.warn(msg, SeparationWarning, stacklevel=2)
        messages.append(msg)
    if converged and cond > COND_H_WARN:
        msg = f"cond.H = {cond:.2g} exceeds {COND_H_WARN:g}; the model may be ill-defined"
        warnings.warn(msg, ConditionWarning, stacklevel=2)
        messages.append(msg)
    try:
        vcov = np.linalg.inv(H)
        vcov = 0.5 * (vcov + vcov.T)
    except np.linalg.LinAlgError:
        vcov = np.full_like(H, np.nan)
    if not converged:
        messages.append("fit did not converge")
    return FitResult(
        coef=x, names=tuple(names), vcov=vcov, loglik=-f, nobs=design.n,
        n_dropped=design.n_dropped, niter=niter, n_halvings=nhalf,
        max_grad=float(np.max(np.abs(g), initial=0.0)), cond_H=cond,
        converged=bool(converged), link=problem.link.name, threshold=problem.ts.kind,
        response_labels=tuple(design.response_labels), n_alpha=problem.m,
        x_names=tuple(design.x_names), w_names=tuple(design.w_names), z_names=tuple(design.z_names),
        boundary=boundary, formula=design.formula, encoder=design.encoder,
        gradient=g, last_step=step, response_fingerprint=response_fingerprint(problem.y),
        messages=tuple(messages),
    )


@dataclass(frozen=True)
class ConvergenceRow:
    name: str
    estimate: float
    error_bound: float
    correct_decimals: int


MAX_DECIMALS = 15


def correct_decimals(bound: float) -> int:
    """floor(-log10(2 * bound)), capped at double precision."""
    if bound <= 0:
        return MAX_DECIMALS
    return int(min(MAX_DECIMALS, math.floor(-math.log10(2.0 * bound))))


def convergence_report(fit: FitResult) -> list[ConvergenceRow]:
    """Per-parameter error bound |H^-1 g| and count of correct decimals."""
    if not fit.converged:
        raise ConvergenceError("convergence report requires a converged fit")
    step = np.zeros(fit.n_params) if fit.last_step is None else np.abs(fit.last_step)
    return [
        ConvergenceRow(n, float(e), float(b), correct_decimals(float(b)))
        for n, e, b in zip(fit.names, fit.coef, step)
    ]
