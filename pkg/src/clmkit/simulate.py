"""Ordinal responses from the latent-variable model, and parameter-recovery studies.

Random numbers come from numpy's Philox-4x64 counter-based generator. The
128-bit key is ``seed + (replicate << 64)`` with the counter starting at
zero, so every (seed, replicate) pair is an independent, order-free stream.
Within a stream, group intercepts are drawn first (standard normals via
``Generator.standard_normal``) and then one uniform per row, formed as
``(k + 0.5) / 2**53`` from a 53-bit integer ``k`` so it lies strictly
inside (0, 1).
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .clm import Control, Parameters, ThresholdStructure, fit_newton
from .errors import ClmError
from .formula import design_from_arrays
from .inference import normal_quantile
from .links import get_link

METHODS = ("latent", "inverse_cdf")
_TWO53 = float(2**53)


def philox(seed: int, replicate: int = 0) -> np.random.Generator:
    if seed < 0 or seed >= 2**64:
        raise ValueError("seed must be a 64-bit unsigned integer")
    return np.random.Generator(np.random.Philox(key=int(seed) + (int(replicate) << 64)))


def open_uniforms(rng: np.random.Generator, n: int) -> np.ndarray:
    k = rng.integers(0, 2**53, size=n, dtype=np.uint64)
    return (k.astype(float) + 0.5) / _TWO53


@dataclass(frozen=True)
class SimConfig:
    """True parameters of a CLM plus the random source.

    ``theta`` holds the materialised thresholds; ``beta_nom`` is (L-1, q).
    """

    theta: tuple[float, ...]
    beta: tuple[float, ...] = ()
    link: str = "logit"
    sigma: float = 0.0
    seed: int = 0
    n_replicates: int = 1
    method: str = "latent"
    beta_nom: tuple[tuple[float, ...], ...] = ()
    zeta: tuple[float, ...] = ()

    def __post_init__(self):
        th = np.asarray(self.theta, dtype=float)
        if th.size < 1 or np.any(np.diff(th) <= 0):
            raise ValueError("thresholds must be strictly increasing")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")

    @property
    def L(self) -> int:
        return len(self.theta) + 1


def _row_thresholds(config: SimConfig, n: int, W) -> np.ndarray:
    thr = np.broadcast_to(np.asarray(config.theta, dtype=float), (n, config.L - 1)).copy()
    if config.beta_nom:
        B = np.asarray(config.beta_nom, dtype=float)
        thr -= np.asarray(W, dtype=float) @ B.T
    return thr


def simulate_responses(config: SimConfig, X=None, groups=None, W=None, Z=None, replicate: int = 0, n: int | None = None) -> np.ndarray:
    """Draw responses coded 1..L for the rows of ``X``.

    ``latent`` forms S = x'b + u + exp(z'zeta) * eps with eps = F^-1(U) and
    cuts S at the row's thresholds; ``inverse_cdf`` compares U with the row's
    cumulative probabilities. Both give the same distribution.
    """
    if X is None:
        if n is None:
            raise ValueError("give X or n")
        X = np.zeros((n, 0))
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    link = get_link(config.link)
    rng = philox(config.seed, replicate)
    lp = X @ np.asarray(config.beta, dtype=float) if X.shape[1] else np.zeros(n)
    if config.sigma > 0:
        if groups is None:
            raise ValueError("sigma > 0 needs group labels")
        labels = [str(g) for g in groups]
        uniq = list(dict.fromkeys(labels))
        pos = {u: i for i, u in enumerate(uniq)}
        u = config.sigma * rng.standard_normal(len(uniq))
        lp = lp + u[np.array([pos[g] for g in labels], dtype=np.int64)]
    s = np.exp(np.asarray(Z, dtype=float) @ np.asarray(config.zeta, dtype=float)) if config.zeta else np.ones(n)
    thr = _row_thresholds(config, n, W)
    if np.any(np.diff(thr, axis=1) <= 0):
        raise ValueError("row thresholds must be strictly increasing")
    U = open_uniforms(rng, n)
    if config.method == "latent":
        S = lp + s * link.quantile(U)
        return 1 + np.sum(S[:, None] > thr, axis=1).astype(np.int64)
    cum = link.cdf((thr - lp[:, None]) / s[:, None])
    return 1 + np.sum(U[:, None] > cum, axis=1).astype(np.int64)


def category_probabilities(config: SimConfig, X) -> np.ndarray:
    """Model probabilities (n, L) at u = 0."""
    X = np.asarray(X, dtype=float)
    link = get_link(config.link)
    lp = X @ np.asarray(config.beta, dtype=float) if X.shape[1] else np.zeros(X.shape[0])
    cum = link.cdf(np.asarray(config.theta)[None, :] - lp[:, None])
    cum = np.concatenate([np.zeros((X.shape[0], 1)), cum, np.ones((X.shape[0], 1))], axis=1)
    return np.diff(cum, axis=1)


@dataclass(frozen=True)
class RecoveryReport:
    names: tuple[str, ...]
    truth: tuple[float, ...]
    coverage: tuple[float, ...]
    bias: tuple[float, ...]
    rejection: tuple[float, ...]
    n_used: int
    n_failed: int
    level: float = 0.95

    def as_rows(self) -> list[dict]:
        return [
            {"name": n, "truth": t, "coverage": c, "bias": b, "rejection": r}
            for n, t, c, b, r in zip(self.names, self.truth, self.coverage, self.bias, self.rejection)
        ]


def _one_replicate(args):
    config, X, r, link, threshold, level = args
    y = simulate_responses(config, X, replicate=r)
    if np.unique(y).size < config.L:
        return None
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            fit = fit_newton(design_from_arrays(X, y, L=config.L), link, threshold)
    except ClmError:
        return None
    if not fit.converged:
        return None
    return fit.coef.copy(), fit.se.copy(), fit.names


def recovery_study(config: SimConfig, X, level: float = 0.95, threshold: str = "flexible", workers: int = 1) -> RecoveryReport:
    """Simulate, refit and score Wald intervals over ``config.n_replicates`` replicates.

    Non-converged replicates (or ones missing a response level) are counted
    in ``n_failed`` and excluded. Results do not depend on ``workers``.
    """
    X = np.asarray(X, dtype=float)
    K = config.L - 1
    ts = ThresholdStructure(threshold)
    truth_alpha = ts.start(np.asarray(config.theta, dtype=float))
    truth = np.concatenate([truth_alpha, np.asarray(config.beta, dtype=float)])
    z = normal_quantile(level)
    jobs = [(config, X, r, config.link, threshold, level) for r in range(config.n_replicates)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            results = list(ex.map(_one_replicate, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        results = [_one_replicate(j) for j in jobs]
    ok = [r for r in results if r is not None]
    failed = len(results) - len(ok)
    if not ok:
        raise ClmError("every replicate failed to converge")
    est = np.array([r[0] for r in ok])
    se = np.array([r[1] for r in ok])
    names = ok[0][2]
    lo, hi = est - z * se, est + z * se
    cover = ((lo <= truth) & (truth <= hi)).mean(axis=0)
    bias = est.mean(axis=0) - truth
    reject = (np.abs(est / se) > z).mean(axis=0)
    return RecoveryReport(tuple(names), tuple(truth.tolist()), tuple(cover.tolist()), tuple(bias.tolist()),
                          tuple(reject.tolist()), len(ok), failed, level)
