"""Goodness-of-fit tests for cumulative link models.

All three tests group observations by the expected score
s_i = sum_l l * pi_il (levels scored 1..L) and compare observed with
expected counts, either through a refit (Lipsitz) or a contingency-table
statistic (Hosmer-Lemeshow, Pulkstenis-Robinson).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy import stats

from .clm import ClmProblem, Control, FitResult, newton
from .errors import ClmError, SparseCellWarning
from .formula import DesignMatrices
from .inference import fitted_probabilities, lrt_from_loglik

SPARSE_MSG = "Chi-square approximation may be incorrect"


@dataclass(frozen=True)
class GofResult:
    test: str
    statistic: float
    df: int
    p: float
    warnings: tuple[str, ...] = ()
    observed: np.ndarray | None = field(default=None, repr=False, compare=False)
    expected: np.ndarray | None = field(default=None, repr=False, compare=False)


def _check_design(fit: FitResult, design: DesignMatrices):
    if design.n != fit.nobs or tuple(design.x_names) != tuple(fit.x_names):
        raise ClmError("the design does not match the fit (different rows or columns)")


def expected_scores(fit: FitResult, design: DesignMatrices) -> tuple[np.ndarray, np.ndarray]:
    """Per-row category probabilities and expected scores with scores 1..L."""
    _check_design(fit, design)
    P = fitted_probabilities(fit, design.X, design.W, design.Z)
    return P, P @ np.arange(1, fit.L + 1, dtype=float)


def score_groups(scores: np.ndarray, g: int) -> np.ndarray:
    """Equal-frequency groups 0..g-1 by score; tied scores share a group.

    Row i goes to floor(g * #{j: s_j < s_i} / n), so groups can be unequal
    when there are ties. Scores are rounded to 12 significant digits first so
    rows with the same covariates always tie.
    """
    if g < 2:
        raise ValueError("need at least 2 groups")
    s = np.asarray(scores, dtype=float)
    n = s.size
    s = np.array([float(f"{v:.12g}") for v in s])
    smaller = np.searchsorted(np.sort(s), s, side="left")
    grp = (g * smaller) // n
    counts = np.bincount(grp, minlength=g)
    if np.any(counts == 0):
        empty = [int(i) + 1 for i in np.flatnonzero(counts == 0)]
        raise ClmError(f"score groups {empty} are empty (ties or too few rows); use a smaller number of groups")
    return grp


def _table(y: np.ndarray, P: np.ndarray, grp: np.ndarray, G: int) -> tuple[np.ndarray, np.ndarray]:
    L = P.shape[1]
    O = np.zeros((G, L))
    np.add.at(O, (grp, y - 1), 1.0)
    E = np.zeros((G, L))
    np.add.at(E, grp, P)
    return O, E


def _sparse(E: np.ndarray) -> list[str]:
    if np.any(E < 1.0):
        msg = f"{SPARSE_MSG} ({int(np.sum(E < 1.0))} expected counts below 1)"
        warnings.warn(msg, SparseCellWarning, stacklevel=3)
        return [msg]
    return []


def pearson(O: np.ndarray, E: np.ndarray) -> float:
    return float(np.sum((O - E) ** 2 / E))


def deviance(O: np.ndarray, E: np.ndarray) -> float:
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(O > 0, O * np.log(O / E), 0.0)
    return float(2.0 * np.sum(t))


def hl_df(g: int, L: int) -> int:
    return (g - 2) * (L - 1) + (L - 2)


def pr_df(n_groups: int, L: int, c: int) -> int:
    return (n_groups - 1) * (L - 1) - c


def lipsitz_test(fit: FitResult, design: DesignMatrices, g: int = 10, control: Control | None = None) -> GofResult:
    """Refit with g-1 score-group indicators and test them by likelihood ratio."""
    P, s = expected_scores(fit, design)
    grp = score_groups(s, g)
    ind = np.column_stack([(grp == k).astype(float) for k in range(1, g)])
    names = tuple(design.x_names) + tuple(f".lipsitz{k + 1}" for k in range(1, g))
    aug = replace(design, X=np.column_stack([design.X, ind]), x_names=names, encoder=None)
    # Score groups can nearly alias factor dummies, leaving a flat direction
    # in the augmented likelihood. Only its maximum is needed, so the refit
    # skips the Hessian checks a full fit would apply.
    x, f, _g, _H, _ni, _nh, converged, _st = newton(ClmProblem(aug, fit.link, fit.threshold), control or Control())
    if not converged:
        raise ClmError("the Lipsitz augmented model did not converge")
    res = lrt_from_loglik(fit.loglik, fit.n_params, -f, fit.n_params + g - 1)
    return GofResult("Lipsitz", res.stat, res.df, res.p)


def hosmer_lemeshow_ordinal(fit: FitResult, design: DesignMatrices, g: int = 10) -> GofResult:
    """Pearson statistic over the g x L table of score groups by response level."""
    P, s = expected_scores(fit, design)
    grp = score_groups(s, g)
    O, E = _table(design.response_idx, P, grp, g)
    msgs = _sparse(E)
    df = hl_df(g, fit.L)
    stat = pearson(O, E)
    return GofResult("Hosmer-Lemeshow (ordinal)", stat, df, float(stats.chi2.sf(stat, df)), tuple(msgs), O, E)


def _catvar_columns(fit: FitResult, catvars: Sequence[str]) -> int:
    enc = fit.encoder
    c = 0
    for term in enc.fixed_terms:
        if all(v in catvars for v in term):
            k = 1
            for v in term:
                k *= len(enc.codings[v].contrasts)
            c += k
    return c


def pulkstenis_robinson(
    fit: FitResult,
    design: DesignMatrices,
    catvars: Sequence[str],
    form: str = "chisq",
    values: dict | None = None,
) -> GofResult:
    """Covariate patterns of ``catvars``, each split at its median expected score.

    ``values`` maps each catvar to its per-row labels or codes; by default
    they are recovered from the design columns.
    """
    if form not in ("chisq", "deviance"):
        raise ValueError("form must be 'chisq' or 'deviance'")
    enc = fit.encoder
    if enc is None:
        raise ClmError("the fit carries no covariate codings")
    catvars = list(catvars)
    if not catvars:
        raise ValueError("need at least one categorical variable")
    for v in catvars:
        if v not in enc.codings or enc.codings[v].kind != "categorical":
            raise ClmError(f"{v!r} is not a categorical covariate of the model")
    P, s = expected_scores(fit, design)
    n = design.n
    keys = np.zeros((n, len(catvars)), dtype=np.int64)
    for j, v in enumerate(catvars):
        if values is not None:
            codes = values[v]
            lvl = {l: i for i, l in enumerate(enc.codings[v].levels)}
            keys[:, j] = [lvl[str(c)] if str(c) in lvl else int(c) for c in codes]
        else:
            keys[:, j] = _codes_from_design(enc.codings[v], design)
    patterns, pid = np.unique(keys, axis=0, return_inverse=True)
    pid = pid.ravel()
    msgs = []
    grp = np.empty(n, dtype=np.int64)
    G = 0
    for k in range(len(patterns)):
        rows = np.flatnonzero(pid == k)
        if rows.size < 2:
            msgs.append(f"pattern {k + 1} has fewer than 2 rows and is not split")
            warnings.warn(msgs[-1], SparseCellWarning, stacklevel=2)
            grp[rows] = G
            G += 1
            continue
        med = np.median(s[rows])
        low = s[rows] <= med
        if low.all() or not low.any():
            msgs.append(f"pattern {k + 1} has a constant score and is not split")
            grp[rows] = G
            G += 1
            continue
        grp[rows[low]] = G
        grp[rows[~low]] = G + 1
        G += 2
    O, E = _table(design.response_idx, P, grp, G)
    msgs += _sparse(E)
    c = _catvar_columns(fit, catvars)
    df = pr_df(G, fit.L, c)
    if df < 1:
        raise ClmError(f"Pulkstenis-Robinson df would be {df}; too few covariate patterns")
    stat = pearson(O, E) if form == "chisq" else deviance(O, E)
    name = "Pulkstenis-Robinson chi-squared" if form == "chisq" else "Pulkstenis-Robinson deviance"
    return GofResult(name, stat, df, float(stats.chi2.sf(stat, df)), tuple(msgs), O, E)


def _codes_from_design(coding, design: DesignMatrices) -> np.ndarray:
    """Recover a factor's level codes from its main-effect dummy columns."""
    names = list(design.x_names)
    cols = []
    for lvl in coding.contrasts:
        nm = f"{coding.name}{lvl}"
        if nm not in names:
            raise ClmError(f"{coding.name!r} has no main-effect columns; pass its values explicitly")
        cols.append(design.X[:, names.index(nm)])
    lookup = {l: i for i, l in enumerate(coding.levels)}
    codes = np.full(design.n, lookup[coding.reference], dtype=np.int64)
    for lvl, col in zip(coding.contrasts, cols):
        codes[col == 1.0] = lookup[lvl]
    return codes
