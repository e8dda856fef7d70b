"""Parametric marginal loss distributions.

Each marginal exposes pdf/logpdf/dlogpdf/cdf/quantile in closed form.
dlogpdf is d/dx log f(x), needed for gradient-based sampling; quantile
is the generalized inverse inf{x : F(x) >= u}.
"""

import math

import numpy as np
from scipy import special

_LOG_2PI = math.log(2.0 * math.pi)


class Marginal:
    """Base class. Subclasses set ``support`` and the five evaluations."""

    support = "real-line"  # or "nonnegative-half-line"

    @property
    def support_min(self):
        return 0.0 if self.support == "nonnegative-half-line" else -np.inf

    def in_support(self, x):
        return np.asarray(x) >= self.support_min

    def pdf(self, x):
        return np.exp(self.logpdf(x))

    def logpdf(self, x):
        raise NotImplementedError

    def dlogpdf(self, x):
        raise NotImplementedError

    def cdf(self, x):
        raise NotImplementedError

    def quantile(self, u):
        raise NotImplementedError

    def _check_quantile_arg(self, u):
        u = np.asarray(u, dtype=float)
        if np.any(u <= 0.0) or np.any(u >= 1.0):
            raise ValueError("quantile argument must lie in (0, 1)")
        return u

    def _check_dlogpdf_arg(self, x):
        if np.any(~self.in_support(x)):
            raise ValueError(f"{type(self).__name__}: x outside support")


class GPD(Marginal):
    """Generalized Pareto distribution with cdf 1 - (1 + xi*x/beta)^(-1/xi).

    Heavy-tail regime xi >= 0 only; xi = 0 degenerates to Exp(1/beta).
    """

    support = "nonnegative-half-line"

    def __init__(self, xi: float, beta: float):
        if xi < 0.0:
            raise ValueError("GPD shape xi must be >= 0")
        if beta <= 0.0:
            raise ValueError("GPD scale beta must be > 0")
        self.xi = float(xi)
        self.beta = float(beta)

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.xi == 0.0:
            out = -x / self.beta - math.log(self.beta)
        else:
            out = (-1.0 / self.xi - 1.0) * np.log1p(self.xi * x / self.beta) - math.log(self.beta)
        return np.where(x >= 0.0, out, -np.inf)

    def dlogpdf(self, x):
        self._check_dlogpdf_arg(x)
        x = np.asarray(x, dtype=float)
        return -(self.xi + 1.0) / (self.beta + self.xi * x)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        xc = np.maximum(x, 0.0)
        if self.xi == 0.0:
            out = -np.expm1(-xc / self.beta)
        else:
            out = -np.expm1((-1.0 / self.xi) * np.log1p(self.xi * xc / self.beta))
        return out

    def quantile(self, u):
        u = self._check_quantile_arg(u)
        if self.xi == 0.0:
            return -self.beta * np.log1p(-u)
        return (self.beta / self.xi) * np.expm1(-self.xi * np.log1p(-u))


class Pareto(Marginal):
    """Pareto (Lomax) distribution with cdf 1 - (lam/(lam+x))^theta, x >= 0."""

    support = "nonnegative-half-line"

    def __init__(self, lam: float, theta: float):
        if lam <= 0.0:
            raise ValueError("Pareto scale lam must be > 0")
        if theta <= 0.0:
            raise ValueError("Pareto shape theta must be > 0")
        self.lam = float(lam)
        self.theta = float(theta)

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        out = (
            math.log(self.theta)
            + self.theta * math.log(self.lam)
            - (self.theta + 1.0) * np.log(self.lam + np.maximum(x, 0.0))
        )
        return np.where(x >= 0.0, out, -np.inf)

    def dlogpdf(self, x):
        self._check_dlogpdf_arg(x)
        x = np.asarray(x, dtype=float)
        return -(self.theta + 1.0) / (self.lam + x)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        xc = np.maximum(x, 0.0)
        return -np.expm1(self.theta * (np.log(self.lam) - np.log(self.lam + xc)))

    def quantile(self, u):
        u = self._check_quantile_arg(u)
        return self.lam * np.expm1((-1.0 / self.theta) * np.log1p(-u))


class StudentT(Marginal):
    """Student t with degrees of freedom nu, location mu and scale sigma."""

    support = "real-line"

    def __init__(self, nu: float, mu: float = 0.0, sigma: float = 1.0):
        if nu <= 0.0:
            raise ValueError("StudentT degrees of freedom nu must be > 0")
        if sigma <= 0.0:
            raise ValueError("StudentT scale sigma must be > 0")
        self.nu = float(nu)
        self.mu = float(mu)
        self.sigma = float(sigma)
        self._lognorm = (
            special.gammaln((self.nu + 1.0) / 2.0)
            - special.gammaln(self.nu / 2.0)
            - 0.5 * math.log(self.nu * math.pi)
            - math.log(self.sigma)
        )

    def logpdf(self, x):
        z = (np.asarray(x, dtype=float) - self.mu) / self.sigma
        return self._lognorm - 0.5 * (self.nu + 1.0) * np.log1p(z * z / self.nu)

    def dlogpdf(self, x):
        z = (np.asarray(x, dtype=float) - self.mu) / self.sigma
        return -(self.nu + 1.0) * z / (self.nu + z * z) / self.sigma

    def cdf(self, x):
        z = (np.asarray(x, dtype=float) - self.mu) / self.sigma
        return special.stdtr(self.nu, z)

    def quantile(self, u):
        u = self._check_quantile_arg(u)
        return self.mu + self.sigma * special.stdtrit(self.nu, u)


class Normal(Marginal):
    """Gaussian with mean mu and standard deviation sigma."""

    support = "real-line"

    def __init__(self, mu: float = 0.0, sigma: float = 1.0):
        if sigma <= 0.0:
            raise ValueError("Normal scale sigma must be > 0")
        self.mu = float(mu)
        self.sigma = float(sigma)

    def logpdf(self, x):
        z = (np.asarray(x, dtype=float) - self.mu) / self.sigma
        return -0.5 * z * z - math.log(self.sigma) - 0.5 * _LOG_2PI

    def dlogpdf(self, x):
        z = (np.asarray(x, dtype=float) - self.mu) / self.sigma
        return -z / self.sigma

    def cdf(self, x):
        z = (np.asarray(x, dtype=float) - self.mu) / self.sigma
        return special.ndtr(z)

    def quantile(self, u):
        u = self._check_quantile_arg(u)
        return self.mu + self.sigma * special.ndtri(u)


_MARGINAL_KINDS = {
    "gpd": (GPD, ("xi", "beta")),
    "pareto": (Pareto, ("lam", "theta")),
    "studentt": (StudentT, ("nu", "mu", "sigma")),
    "normal": (Normal, ("mu", "sigma")),
}


def marginal_from_dict(cfg: dict) -> Marginal:
    """Build a marginal from {"kind": ..., "params": [...]} (config-file schema)."""
    kind = str(cfg["kind"]).lower()
    if kind not in _MARGINAL_KINDS:
        raise ValueError(f"unknown marginal kind {cfg['kind']!r}; "
                         f"expected one of {sorted(_MARGINAL_KINDS)}")
    cls, _ = _MARGINAL_KINDS[kind]
    return cls(*[float(p) for p in cfg["params"]])
