"""Wald and likelihood-ratio inference, delta-method predictions, marginal
means over a reference grid and Tukey-adjusted pairwise contrasts."""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import integrate, special, stats

from .clm import FitResult, ThresholdStructure, interval_terms
from .errors import (
    DataMismatchError,
    ExtrapolationWarning,
    NestingError,
    SchemaError,
)
from .links import get_link

MODES = ("prob", "cum.prob", "exc.prob", "latent")


# ---------------------------------------------------------------------------
# Wald
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WaldRow:
    name: str
    estimate: float
    se: float
    z: float
    p: float | None


def two_sided_p(z: float) -> float:
    return float(2.0 * special.ndtr(-abs(z)))


def wald_row(name: str, estimate: float, se: float, with_p: bool = True) -> WaldRow:
    z = estimate / se if se > 0 else (0.0 if estimate == 0 else math.copysign(math.inf, estimate))
    return WaldRow(name, float(estimate), float(se), float(z), two_sided_p(z) if with_p else None)


def wald_table(fit: FitResult) -> list[WaldRow]:
    """Coefficient rows (with p) followed by threshold rows (without p)."""
    se = fit.se
    sl = fit.slices()
    rows = []
    for part in ("beta", "nominal", "zeta"):
        for j in range(sl[part].start, sl[part].stop):
            rows.append(wald_row(fit.names[j], fit.coef[j], se[j]))
    for j in range(sl["alpha"].start, sl["alpha"].stop):
        rows.append(wald_row(fit.names[j], fit.coef[j], se[j], with_p=False))
    return rows


def normal_quantile(level: float) -> float:
    if not 0.0 < level < 1.0:
        raise ValueError("confidence level must be in (0, 1)")
    return float(special.ndtri(1.0 - (1.0 - level) / 2.0))


def wald_interval(estimate: float, se: float, level: float = 0.95) -> tuple[float, float]:
    z = normal_quantile(level)
    return estimate - z * se, estimate + z * se


def wald_ci(fit: FitResult, names: Sequence[str] | None = None, level: float = 0.95) -> dict[str, tuple[float, float]]:
    names = list(fit.names[: fit.n_core]) if names is None else list(names)
    se = fit.se
    out = {}
    for n in names:
        j = fit.index(n)
        out[n] = wald_interval(float(fit.coef[j]), float(se[j]), level)
    return out


def odds_ratio(fit: FitResult, name: str, level: float = 0.95) -> tuple[float, tuple[float, float]]:
    """exp(beta) with its exponentiated Wald interval; logit link only."""
    if fit.link != "logit":
        raise ValueError(
            f"odds ratios need the logit link; the interpretation of coefficients depends on the link ({fit.link})"
        )
    lo, hi = wald_ci(fit, [name], level)[name]
    return math.exp(fit.coef[fit.index(name)]), (math.exp(lo), math.exp(hi))


# ---------------------------------------------------------------------------
# likelihood ratio
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LrtResult:
    stat: float
    df: int
    p: float


def lrt_from_loglik(ll_null: float, k_null: int, ll_alt: float, k_alt: int) -> LrtResult:
    stat = 2.0 * (ll_alt - ll_null)
    df = int(k_alt - k_null)
    if df < 0:
        raise NestingError("the alternative model has fewer parameters than the null model")
    if stat < -1e-8:
        raise NestingError(f"negative LR statistic {stat:.3g}: models are not nested")
    stat = max(stat, 0.0)
    p = 1.0 if (df == 0 or stat == 0.0) else float(stats.chi2.sf(stat, df))
    return LrtResult(stat, df, p)


def lrt(fit_null, fit_alt) -> LrtResult:
    """Likelihood ratio test of nested fits on the same observations."""
    if fit_null.nobs != fit_alt.nobs:
        raise DataMismatchError(f"models were fitted to different data (nobs {fit_null.nobs} vs {fit_alt.nobs})")
    fa, fb = getattr(fit_null, "response_fingerprint", ""), getattr(fit_alt, "response_fingerprint", "")
    if fa and fb and fa != fb:
        raise DataMismatchError("models were fitted to different responses")
    return lrt_from_loglik(fit_null.loglik, fit_null.n_params, fit_alt.loglik, fit_alt.n_params)


# ---------------------------------------------------------------------------
# studentized range (infinite df)
# ---------------------------------------------------------------------------


def studentized_range_sf(q: float, k: int) -> float:
    """P(Q > q) for the range of k iid standard normals.

    Uses sf = k * int phi(z) [Phi(z)^(k-1) - (Phi(z) - Phi(z-q))^(k-1)] dz,
    with the bracket evaluated as a^m * (1 - (1 - b/a)^m) so small tails keep
    their relative precision.
    """
    if k < 2:
        raise ValueError("need at least two groups")
    if q <= 0:
        return 1.0
    m = k - 1

    def integrand(z):
        a = special.ndtr(z)
        if a <= 0.0:
            return 0.0
        b = special.ndtr(z - q)
        bracket = -math.expm1(m * math.log1p(-b / a)) if b < a else 1.0
        return math.exp(-0.5 * z * z) / math.sqrt(2 * math.pi) * a**m * bracket

    val, _ = integrate.quad(integrand, -12.0, q + 12.0, points=[0.0, q / 2, q],
                            epsabs=1e-14, epsrel=1e-11, limit=400)
    return float(min(1.0, max(0.0, k * val)))


def tukey_p(z: float, k: int) -> float:
    return studentized_range_sf(abs(z) * math.sqrt(2.0), k)


# ---------------------------------------------------------------------------
# predictions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PredictionRow:
    cell: Mapping[str, object]
    response: str
    estimate: float
    se: float
    lower: float
    upper: float
    df: float = math.inf


@dataclass(frozen=True)
class PredictionTable:
    mode: str
    rows: tuple[PredictionRow, ...]
    level: float = 0.95
    cut: str | None = None
    averaged_over: tuple[str, ...] = ()

    def records(self) -> list[dict]:
        out = []
        for r in self.rows:
            d = {k: v for k, v in r.cell.items()}
            d.update({
                "response": r.response, "mode": self.mode, "cut": self.cut or "",
                "estimate": r.estimate, "se": r.se, "df": "Inf", "lcl": r.lower, "ucl": r.upper,
            })
            out.append(d)
        return out

    def to_csv(self) -> str:
        recs = self.records()
        buf = io.StringIO()
        if not recs:
            return ""
        w = csv.DictWriter(buf, fieldnames=list(recs[0]), lineterminator="\n")
        w.writeheader()
        for rec in recs:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in rec.items()})
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"mode": self.mode, "cut": self.cut, "level": self.level,
                           "averaged_over": list(self.averaged_over), "rows": self.records()}, indent=2)

    def estimates(self) -> np.ndarray:
        return np.array([r.estimate for r in self.rows])


def _core_vcov(fit: FitResult) -> np.ndarray:
    n = fit.n_core
    return fit.vcov[:n, :n]


def _encode(fit: FitResult, cells: Sequence[Mapping]):
    enc = fit.encoder
    if enc is None:
        raise SchemaError("this fit carries no design encoder; predictions need covariate codings")
    variables = enc.variables
    data = {}
    for v in variables:
        vals = []
        for c in cells:
            if v not in c:
                raise SchemaError(f"prediction cell does not give a value for {v!r}")
            vals.append(c[v])
        coding = enc.codings[v]
        if coding.kind == "numeric":
            arr = np.asarray(vals, dtype=float)
            if np.any((arr < coding.lo) | (arr > coding.hi)):
                warnings.warn(f"{v}: predicting outside the observed range [{coding.lo:g}, {coding.hi:g}]",
                              ExtrapolationWarning, stacklevel=3)
            data[v] = arr
        else:
            for x in vals:
                if str(x) not in coding.levels:
                    raise SchemaError(f"{v}: level {x!r} was not seen when fitting")
            data[v] = [str(x) for x in vals]
    return enc.encode(data)


def _cut_index(fit: FitResult, cut) -> int:
    labels = fit.cut_labels
    if isinstance(cut, (int, np.integer)):
        if not 1 <= cut <= len(labels):
            raise ValueError(f"cut index must be in 1..{len(labels)}")
        return int(cut) - 1
    if cut not in labels:
        raise ValueError(f"unknown cut {cut!r}; expected one of {labels}")
    return labels.index(cut)


def _quantities(fit: FitResult, X, W, Z, mode: str, cut_idx: int | None = None):
    """Estimates (n, m) and Jacobians (n, m, n_core) for every row.

    For ``prob`` m = L (one column per level); for cumulative modes m = 1
    at the requested cut; for ``latent`` m = 1 with value x'beta.
    """
    n = X.shape[0]
    par = fit.params()
    sl = fit.slices()
    npar = fit.n_core
    K = fit.L - 1
    link = get_link(fit.link)
    if mode == "latent":
        est = (X @ par.beta)[:, None]
        J = np.zeros((n, 1, npar))
        J[:, 0, sl["beta"]] = X
        return est, J
    Jt = ThresholdStructure(fit.threshold).matrix(K)
    theta = Jt @ par.theta_free
    thr = np.broadcast_to(theta, (n, K)).copy()
    if W.shape[1]:
        thr -= W @ par.beta_nom.T
    lp = X @ par.beta
    s = np.exp(Z @ par.zeta) if Z.shape[1] else np.ones(n)
    eta = (thr - lp[:, None]) / s[:, None]
    # d eta_k / d params: (n, K, npar)
    D = np.zeros((n, K, npar))
    D[:, :, sl["alpha"]] = Jt[None, :, :] / s[:, None, None]
    q = W.shape[1]
    if q:
        for k in range(K):
            start = sl["nominal"].start + k * q
            D[:, k, start:start + q] = -W / s[:, None]
    D[:, :, sl["beta"]] = -X[:, None, :] / s[:, None, None]
    if Z.shape[1]:
        D[:, :, sl["zeta"]] = -eta[:, :, None] * Z[:, None, :]
    f = link.pdf(eta)
    if mode in ("cum.prob", "exc.prob"):
        k = cut_idx
        F = link.cdf(eta[:, k])
        dF = f[:, k, None] * D[:, k, :]
        if mode == "cum.prob":
            return F[:, None], dF[:, None, :]
        return link.sf(eta[:, k])[:, None], -dF[:, None, :]
    if mode != "prob":
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    L = K + 1
    lo = np.concatenate([np.full((n, 1), -np.inf), eta], axis=1)
    hi = np.concatenate([eta, np.full((n, 1), np.inf)], axis=1)
    est = np.exp(interval_terms(link, lo, hi)[0])
    Dh = np.concatenate([D, np.zeros((n, 1, npar))], axis=1)
    Dl = np.concatenate([np.zeros((n, 1, npar)), D], axis=1)
    fh = np.concatenate([f, np.zeros((n, 1))], axis=1)
    fl = np.concatenate([np.zeros((n, 1)), f], axis=1)
    Jac = fh[:, :, None] * Dh - fl[:, :, None] * Dl
    return est, Jac


def fitted_probabilities(fit: FitResult, X, W=None, Z=None) -> np.ndarray:
    """Category probabilities (n, L) at the fitted parameters (u = 0 for mixed fits)."""
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    W = np.zeros((n, 0)) if W is None else np.asarray(W, dtype=float).reshape(n, -1)
    Z = np.zeros((n, 0)) if Z is None else np.asarray(Z, dtype=float).reshape(n, -1)
    par = fit.params()
    K = fit.L - 1
    link = get_link(fit.link)
    theta = ThresholdStructure(fit.threshold).matrix(K) @ par.theta_free
    thr = np.broadcast_to(theta, (n, K)).copy()
    if W.shape[1]:
        thr -= W @ par.beta_nom.T
    s = np.exp(Z @ par.zeta) if Z.shape[1] else np.ones(n)
    eta = (thr - (X @ par.beta)[:, None]) / s[:, None]
    lo = np.concatenate([np.full((n, 1), -np.inf), eta], axis=1)
    hi = np.concatenate([eta, np.full((n, 1), np.inf)], axis=1)
    return np.exp(interval_terms(link, lo, hi)[0])


def _rows_for(fit, cells_groups, mode, cut, level, shown):
    """Average quantities over each group of full cells and build table rows."""
    V = _core_vcov(fit)
    z = normal_quantile(level)
    cut_idx = _cut_index(fit, cut) if mode in ("cum.prob", "exc.prob") else None
    rows = []
    for display, cells in cells_groups:
        X, W, Z = _encode(fit, cells)
        est, J = _quantities(fit, X, W, Z, mode, cut_idx)
        est = est.mean(axis=0)
        J = J.mean(axis=0)
        if mode == "prob":
            labels = list(fit.response_labels)
        elif mode == "latent":
            labels = ["latent"]
        else:
            labels = [fit.cut_labels[cut_idx]]
        for j, lab in enumerate(labels):
            var = float(J[j] @ V @ J[j])
            se = math.sqrt(max(var, 0.0))
            e = float(est[j])
            rows.append(PredictionRow(dict(display), lab, e, se, e - z * se, e + z * se))
    return rows


def _check_mode(mode, cut):
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    if mode in ("cum.prob", "exc.prob") and cut is None:
        raise ValueError(f"mode {mode!r} needs a cut")
    if mode in ("prob", "latent") and cut is not None:
        raise ValueError(f"mode {mode!r} does not take a cut")


def predict_cells(fit: FitResult, grid: Sequence[Mapping], mode: str = "prob", cut=None, level: float = 0.95) -> PredictionTable:
    """Delta-method predictions at fully specified covariate cells."""
    _check_mode(mode, cut)
    groups = [(dict(c), [dict(c)]) for c in grid]
    rows = _rows_for(fit, groups, mode, cut, level, None)
    return PredictionTable(mode, tuple(rows), level, cut if cut is None else fit.cut_labels[_cut_index(fit, cut)])


def reference_grid(fit: FitResult, by: Sequence[str] = (), at: Mapping | None = None):
    """Cells of the reference grid, grouped by the ``by`` variables.

    Factors enumerate all their levels, numeric covariates sit at their sample
    mean unless pinned in ``at``. A list in ``at`` restricts a factor or
    expands a numeric covariate; such variables are shown, not averaged.
    Returns ``(groups, averaged_over)`` with groups a list of
    ``(display_cell, [full cells])``.
    """
    enc = fit.encoder
    if enc is None:
        raise SchemaError("this fit carries no design encoder")
    at = dict(at or {})
    by = list(by)
    for v in by + list(at):
        if v not in enc.codings:
            raise SchemaError(f"{v!r} is not a variable of the model")
    values = {}
    for v, c in enc.codings.items():
        if v in at:
            val = at[v]
            vals = list(val) if isinstance(val, (list, tuple, np.ndarray)) else [val]
            if c.kind != "numeric":
                for x in vals:
                    if str(x) not in c.levels:
                        raise SchemaError(f"{v}: level {x!r} was not seen when fitting")
                vals = [str(x) for x in vals]
            values[v] = vals
        elif c.kind == "numeric":
            values[v] = [c.mean]
        else:
            values[v] = list(c.levels)
    shown = [v for v in enc.codings if v in by or v in at]
    averaged = [v for v in enc.codings if v not in shown and len(values[v]) > 1]
    order = by + [v for v in shown if v not in by]
    groups = []
    for combo in itertools.product(*[values[v] for v in order]):
        display = dict(zip(order, combo))
        rest = [v for v in enc.codings if v not in display]
        cells = []
        for rc in itertools.product(*[values[v] for v in rest]):
            cell = dict(display)
            cell.update(zip(rest, rc))
            cells.append(cell)
        groups.append((display, cells))
    return groups, tuple(averaged)


def marginal_means(
    fit: FitResult,
    by: Sequence[str] = (),
    mode: str = "latent",
    cut=None,
    at: Mapping | None = None,
    level: float = 0.95,
) -> PredictionTable:
    """Equal-weight averages over the reference grid for every ``by`` cell."""
    _check_mode(mode, cut)
    groups, averaged = reference_grid(fit, by, at)
    rows = _rows_for(fit, groups, mode, cut, level, by)
    return PredictionTable(mode, tuple(rows), level,
                           cut if cut is None else fit.cut_labels[_cut_index(fit, cut)], averaged)


@dataclass(frozen=True)
class ContrastRow:
    contrast: str
    estimate: float
    se: float
    z: float
    p: float


@dataclass(frozen=True)
class ContrastTable:
    factor: str
    adjust: str
    rows: tuple[ContrastRow, ...]
    averaged_over: tuple[str, ...] = ()

    def records(self) -> list[dict]:
        return [asdict(r) | {"adjust": self.adjust} for r in self.rows]


def pairwise_compare(fit: FitResult, factor: str, adjust: str = "tukey", at: Mapping | None = None) -> ContrastTable:
    """All pairwise differences of latent-scale marginal means of ``factor``."""
    if adjust not in ("none", "tukey"):
        raise ValueError("adjust must be 'none' or 'tukey'")
    enc = fit.encoder
    if enc is None or factor not in enc.codings or enc.codings[factor].kind != "categorical":
        raise SchemaError(f"{factor!r} is not a factor of the model")
    levels = enc.codings[factor].levels
    k = len(levels)
    if k < 2:
        raise ValueError("need a factor with at least two levels")
    groups, averaged = reference_grid(fit, [factor], at)
    V = _core_vcov(fit)
    means, jacs = [], []
    for _display, cells in groups:
        X, W, Z = _encode(fit, cells)
        est, J = _quantities(fit, X, W, Z, "latent")
        means.append(float(est.mean()))
        jacs.append(J.mean(axis=0)[0])
    rows = []
    for i, j in itertools.combinations(range(k), 2):
        d = means[i] - means[j]
        c = jacs[i] - jacs[j]
        se = math.sqrt(max(float(c @ V @ c), 0.0))
        z = d / se if se > 0 else 0.0
        p = tukey_p(z, k) if adjust == "tukey" else two_sided_p(z)
        rows.append(ContrastRow(f"{levels[i]} - {levels[j]}", d, se, z, p))
    return ContrastTable(factor, adjust, tuple(rows), averaged)
