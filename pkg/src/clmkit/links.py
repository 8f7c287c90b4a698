"""Inverse link functions: distributions of the latent error.

Each family exposes the cdf, survival function, density and their logs, plus
``dlogpdf`` (the derivative of the log density, i.e. f'/f) which the
likelihood machinery uses to build second derivatives without ever dividing
two underflowed numbers.

Conventions:

* ``cloglog``: F(t) = 1 - exp(-exp(t))
* ``loglog``:  F(t) = exp(-exp(-t))
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special

from .errors import DomainError

LINKS = ("logit", "probit", "cloglog", "loglog", "cauchit")

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def log1mexp(x):
    """log(1 - exp(x)) for x <= 0, accurate over the whole range."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(x > -math.log(2.0), np.log(-np.expm1(x)), np.log1p(-np.exp(x)))


class LinkFamily:
    """Base class; subclasses implement the vectorised primitives."""

    name = ""
    symmetric = False

    def cdf(self, t):
        raise NotImplementedError

    def sf(self, t):
        raise NotImplementedError

    def logcdf(self, t):
        raise NotImplementedError

    def logsf(self, t):
        raise NotImplementedError

    def _logpdf(self, t):
        raise NotImplementedError

    def _dlogpdf(self, t):
        raise NotImplementedError

    def _quantile(self, p):
        raise NotImplementedError

    def logpdf(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(over="ignore", invalid="ignore"):
            out = self._logpdf(t)
        return np.where(np.isinf(t), -np.inf, out)

    def pdf(self, t):
        return np.exp(self.logpdf(t))

    def dlogpdf(self, t):
        """d/dt log f(t) = f'(t)/f(t); zero at infinite arguments by convention."""
        t = np.asarray(t, dtype=float)
        with np.errstate(over="ignore", invalid="ignore"):
            out = self._dlogpdf(t)
        return np.where(np.isinf(t), 0.0, out)

    def dpdf(self, t):
        return self.pdf(t) * self.dlogpdf(t)

    # The generic log-derivatives lose relative accuracy where f/F grows
    # exponentially; links with such tails override them in closed form.
    def dlogcdf(self, t):
        """d/dt log F(t) = f/F."""
        t = np.asarray(t, dtype=float)
        with np.errstate(over="ignore", invalid="ignore"):
            return np.exp(self.logpdf(t) - self.logcdf(t))

    def dlogsf(self, t):
        """d/dt log S(t) = -f/S."""
        t = np.asarray(t, dtype=float)
        with np.errstate(over="ignore", invalid="ignore"):
            return -np.exp(self.logpdf(t) - self.logsf(t))

    def d2logcdf(self, t):
        """d^2/dt^2 log F(t)."""
        lam = self.dlogcdf(t)
        with np.errstate(over="ignore", invalid="ignore"):
            return lam * (self.dlogpdf(t) - lam)

    def d2logsf(self, t):
        """d^2/dt^2 log S(t)."""
        mu = -self.dlogsf(t)
        with np.errstate(over="ignore", invalid="ignore"):
            return -mu * (self.dlogpdf(t) + mu)

    def quantile(self, p):
        p = np.asarray(p, dtype=float)
        if np.any(~((p > 0.0) & (p < 1.0))):
            raise DomainError(f"{self.name} quantile requires 0 < p < 1")
        out = self._quantile(p)
        return float(out) if out.ndim == 0 else out

    def __repr__(self):
        return f"LinkFamily({self.name!r})"

    def __eq__(self, other):
        return isinstance(other, LinkFamily) and other.name == self.name

    def __hash__(self):
        return hash(self.name)


class Logit(LinkFamily):
    name = "logit"
    symmetric = True

    def cdf(self, t):
        return special.expit(np.asarray(t, dtype=float))

    def sf(self, t):
        return special.expit(-np.asarray(t, dtype=float))

    def logcdf(self, t):
        return special.log_expit(np.asarray(t, dtype=float))

    def logsf(self, t):
        return special.log_expit(-np.asarray(t, dtype=float))

    def _logpdf(self, t):
        return special.log_expit(t) + special.log_expit(-t)

    def _dlogpdf(self, t):
        return -np.tanh(0.5 * t)

    def dlogcdf(self, t):
        return self.sf(t)

    def dlogsf(self, t):
        return -self.cdf(t)

    def d2logcdf(self, t):
        return -self.pdf(t)

    def d2logsf(self, t):
        return -self.pdf(t)

    def _quantile(self, p):
        return special.logit(p)


class Probit(LinkFamily):
    name = "probit"
    symmetric = True

    def cdf(self, t):
        return special.ndtr(np.asarray(t, dtype=float))

    def sf(self, t):
        return special.ndtr(-np.asarray(t, dtype=float))

    def logcdf(self, t):
        return special.log_ndtr(np.asarray(t, dtype=float))

    def logsf(self, t):
        return special.log_ndtr(-np.asarray(t, dtype=float))

    def _logpdf(self, t):
        return -0.5 * t * t - _LOG_SQRT_2PI

    def _dlogpdf(self, t):
        return -t

    def _quantile(self, p):
        return special.ndtri(p)


class Cloglog(LinkFamily):
    name = "cloglog"

    def cdf(self, t):
        with np.errstate(over="ignore"):
            return -np.expm1(-np.exp(np.asarray(t, dtype=float)))

    def sf(self, t):
        with np.errstate(over="ignore"):
            return np.exp(-np.exp(np.asarray(t, dtype=float)))

    def logcdf(self, t):
        with np.errstate(over="ignore"):
            return log1mexp(-np.exp(np.asarray(t, dtype=float)))

    def logsf(self, t):
        with np.errstate(over="ignore"):
            return -np.exp(np.asarray(t, dtype=float))

    def _logpdf(self, t):
        return t - np.exp(t)

    def _dlogpdf(self, t):
        return 1.0 - np.exp(t)

    def dlogsf(self, t):
        with np.errstate(over="ignore"):
            return -np.exp(np.asarray(t, dtype=float))

    def d2logsf(self, t):
        with np.errstate(over="ignore"):
            return -np.exp(np.asarray(t, dtype=float))

    def _quantile(self, p):
        return np.log(-np.log1p(-p))


class Loglog(LinkFamily):
    name = "loglog"

    def cdf(self, t):
        with np.errstate(over="ignore"):
            return np.exp(-np.exp(-np.asarray(t, dtype=float)))

    def sf(self, t):
        with np.errstate(over="ignore"):
            return -np.expm1(-np.exp(-np.asarray(t, dtype=float)))

    def logcdf(self, t):
        with np.errstate(over="ignore"):
            return -np.exp(-np.asarray(t, dtype=float))

    def logsf(self, t):
        with np.errstate(over="ignore"):
            return log1mexp(-np.exp(-np.asarray(t, dtype=float)))

    def _logpdf(self, t):
        return -t - np.exp(-t)

    def _dlogpdf(self, t):
        return np.exp(-t) - 1.0

    def dlogcdf(self, t):
        with np.errstate(over="ignore"):
            return np.exp(-np.asarray(t, dtype=float))

    def d2logcdf(self, t):
        with np.errstate(over="ignore"):
            return -np.exp(-np.asarray(t, dtype=float))

    def _quantile(self, p):
        return -np.log(-np.log(p))


class Cauchit(LinkFamily):
    name = "cauchit"
    symmetric = True

    # arctan2 keeps full relative precision in both tails
    def cdf(self, t):
        return np.arctan2(1.0, -np.asarray(t, dtype=float)) / math.pi

    def sf(self, t):
        return np.arctan2(1.0, np.asarray(t, dtype=float)) / math.pi

    def logcdf(self, t):
        return np.log(self.cdf(t))

    def logsf(self, t):
        return np.log(self.sf(t))

    def _logpdf(self, t):
        return -math.log(math.pi) - np.log1p(t * t)

    def _dlogpdf(self, t):
        return -2.0 * t / (1.0 + t * t)

    def _quantile(self, p):
        lower = p < 0.5
        with np.errstate(divide="ignore"):
            lo = -1.0 / np.tan(math.pi * p)
            hi = 1.0 / np.tan(math.pi * (1.0 - p))
        return np.where(lower, lo, hi)


_REGISTRY = {cls.name: cls() for cls in (Logit, Probit, Cloglog, Loglog, Cauchit)}


def get_link(link) -> LinkFamily:
    if isinstance(link, LinkFamily):
        return link
    try:
        return _REGISTRY[str(link)]
    except KeyError:
        raise ValueError(f"unknown link {link!r}; expected one of {', '.join(LINKS)}") from None


def cdf(link, t):
    return get_link(link).cdf(t)


def pdf(link, t):
    return get_link(link).pdf(t)


def quantile(link, p):
    return get_link(link).quantile(p)
