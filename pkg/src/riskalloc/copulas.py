"""Copulas with densities, log-density gradients, full conditional
(h-)functions and their inverses, and samplers.

The h-function of coordinate j is the full conditional copula

    C_{j|-j}(u_j | u_-j) = D_-j C(u) / D_-j C(u_1, ..., 1, ..., u_d),

the cdf of U_j given U_-j = u_-j.  Its inverse enables exact inversion
sampling of full conditionals, which is what the Gibbs engine runs on.

Closed forms used here:

  Clayton(theta), generator psi(t) = (1 + theta*t)^(-1/theta), with
  w(u) = sum(u_i^-theta) - d + 1:
    log c(u) = sum_{k=1..d-1} log(1+k*theta) - (theta+1) sum log u_i
               - (1/theta + d) log w(u)
    d/du_j log c = -(theta+1)/u_j + (1 + d*theta) u_j^(-theta-1) / w(u)
    h(u_j|u_-j) = ((w_rest + u_j^-theta - 1)/w_rest)^-(1/theta + d - 1),
                  w_rest = sum_{i != j}(u_i^-theta) - d + 2

  Survival Clayton: the distribution of 1 - U for U ~ Clayton, so
    c_s(u) = c(1-u) and h_s(u_j|u_-j) = 1 - h(1-u_j | 1-u_-j).

  Gaussian(R) and Student t(nu, R): mapped to normal / t scores; the
  conditional score distribution is normal, resp. univariate t with
  nu + d - 1 degrees of freedom and the usual location/scale.
"""

import math

import numpy as np
from scipy import special

# probability-scale clamp applied before copula evaluations; samplers can
# land arbitrarily close to 0/1 where the formulas overflow
U_EPS = 1e-12


def clip01(u):
    return np.clip(u, U_EPS, 1.0 - U_EPS)


def _check_interior(u):
    u = np.asarray(u, dtype=float)
    if np.any(u <= 0.0) or np.any(u >= 1.0):
        raise ValueError("copula argument must lie in the open unit cube")
    return u


class Copula:
    """Base class; subclasses are immutable after construction."""

    def __init__(self, dim: int):
        if dim < 2:
            raise ValueError("copula dimension must be >= 2")
        self.dim = int(dim)

    def logdensity(self, u):
        raise NotImplementedError

    def density(self, u):
        return math.exp(self.logdensity(u))

    def grad_logdensity(self, u):
        raise NotImplementedError

    def hfun(self, j, uj, u_rest):
        """Conditional cdf of U_j at uj given the other coordinates.

        uj may be a scalar or an array (shared conditioning vector).
        """
        raise NotImplementedError

    def hfun_inv(self, j, p, u_rest):
        raise NotImplementedError

    def sample(self, n, rng):
        raise NotImplementedError

    def _check_j(self, j, u_rest):
        if not 0 <= j < self.dim:
            raise ValueError(f"coordinate index {j} out of range for d={self.dim}")
        u_rest = np.asarray(u_rest, dtype=float)
        if u_rest.shape != (self.dim - 1,):
            raise ValueError(f"u_rest must have length {self.dim - 1}")
        return u_rest


class Independence(Copula):
    def logdensity(self, u):
        _check_interior(u)
        return 0.0

    def grad_logdensity(self, u):
        _check_interior(u)
        return np.zeros(self.dim)

    def hfun(self, j, uj, u_rest):
        self._check_j(j, u_rest)
        return np.asarray(uj, dtype=float)

    def hfun_inv(self, j, p, u_rest):
        self._check_j(j, u_rest)
        return np.asarray(p, dtype=float)

    def sample(self, n, rng):
        return rng.uniform(size=(n, self.dim))


class Clayton(Copula):
    def __init__(self, theta: float, dim: int):
        super().__init__(dim)
        if theta <= 0.0:
            raise ValueError("Clayton theta must be > 0")
        self.theta = float(theta)
        d = self.dim
        self._logconst = sum(math.log1p(k * self.theta) for k in range(1, d))
        # h exponent 1/theta + d - 1 and its reciprocal for the inverse
        self._hexp = 1.0 / self.theta + d - 1.0

    def logdensity(self, u):
        u = _check_interior(u)
        th, d = self.theta, self.dim
        w = np.sum(u ** -th) - d + 1.0
        return self._logconst - (th + 1.0) * float(np.sum(np.log(u))) - (1.0 / th + d) * math.log(w)

    def grad_logdensity(self, u):
        u = _check_interior(u)
        th, d = self.theta, self.dim
        t = u ** (-th - 1.0)
        w = np.sum(t * u) - d + 1.0
        return -(th + 1.0) / u + (1.0 + d * th) * t / w

    def hfun(self, j, uj, u_rest):
        u_rest = self._check_j(j, u_rest)
        th = self.theta
        w_rest = np.sum(clip01(u_rest) ** -th) - self.dim + 2.0
        uj = clip01(uj)
        ratio = 1.0 + (uj ** -th - 1.0) / w_rest
        return ratio ** -self._hexp

    def hfun_inv(self, j, p, u_rest):
        u_rest = self._check_j(j, u_rest)
        th = self.theta
        w_rest = np.sum(clip01(u_rest) ** -th) - self.dim + 2.0
        p = clip01(p)
        a = p ** (-1.0 / self._hexp) - 1.0
        return clip01((1.0 + w_rest * a) ** (-1.0 / th))

    def sample(self, n, rng):
        # Marshall-Olkin frailty: V ~ Gamma(1/theta, 1), U_j = (1 + E_j/V)^(-1/theta)
        v = rng.gamma(1.0 / self.theta, 1.0, size=n)
        e = rng.exponential(size=(n, self.dim))
        return clip01((1.0 + e / v[:, None]) ** (-1.0 / self.theta))


class SurvivalClayton(Copula):
    """Clayton rotated by 180 degrees (upper tail dependent)."""

    def __init__(self, theta: float, dim: int):
        super().__init__(dim)
        self.base = Clayton(theta, dim)
        self.theta = self.base.theta

    def logdensity(self, u):
        u = _check_interior(u)
        return self.base.logdensity(1.0 - u)

    def grad_logdensity(self, u):
        u = _check_interior(u)
        return -self.base.grad_logdensity(1.0 - u)

    def hfun(self, j, uj, u_rest):
        u_rest = self._check_j(j, u_rest)
        return 1.0 - self.base.hfun(j, 1.0 - np.asarray(uj, dtype=float), 1.0 - u_rest)

    def hfun_inv(self, j, p, u_rest):
        u_rest = self._check_j(j, u_rest)
        return 1.0 - self.base.hfun_inv(j, 1.0 - np.asarray(p, dtype=float), 1.0 - u_rest)

    def sample(self, n, rng):
        return 1.0 - self.base.sample(n, rng)


def _check_corr(corr, dim=None):
    r = np.asarray(corr, dtype=float)
    if r.ndim != 2 or r.shape[0] != r.shape[1]:
        raise ValueError("correlation matrix must be square")
    if dim is not None and r.shape[0] != dim:
        raise ValueError("correlation matrix dimension mismatch")
    if not np.allclose(r, r.T, atol=1e-12):
        raise ValueError("correlation matrix must be symmetric")
    if not np.allclose(np.diag(r), 1.0, atol=1e-12):
        raise ValueError("correlation matrix must have unit diagonal")
    try:
        np.linalg.cholesky(r)
    except np.linalg.LinAlgError as exc:
        raise ValueError("correlation matrix must be positive definite") from exc
    return r


class _EllipticalCopula(Copula):
    """Shared conditioning-block machinery for the Gaussian and t copulas."""

    def __init__(self, corr, dim=None):
        r = _check_corr(corr, dim)
        super().__init__(r.shape[0])
        self.corr = r
        self._chol = np.linalg.cholesky(r)
        self._rinv = np.linalg.inv(r)
        self._logdet = 2.0 * float(np.sum(np.log(np.diag(self._chol))))
        # per-coordinate conditioning blocks: b_j = R_{j,-j} R_{-j,-j}^{-1},
        # schur_j = 1 - b_j . R_{-j,j}
        self._b = []
        self._rrest_inv = []
        self._schur = []
        d = self.dim
        for j in range(d):
            rest = [i for i in range(d) if i != j]
            rr = r[np.ix_(rest, rest)]
            rr_inv = np.linalg.inv(rr)
            b = r[j, rest] @ rr_inv
            self._b.append(b)
            self._rrest_inv.append(rr_inv)
            self._schur.append(float(1.0 - b @ r[rest, j]))


class GaussianCopula(_EllipticalCopula):
    def _scores(self, u):
        return special.ndtri(clip01(u))

    def logdensity(self, u):
        u = _check_interior(u)
        z = self._scores(u)
        return -0.5 * self._logdet - 0.5 * float(z @ (self._rinv @ z) - z @ z)

    def grad_logdensity(self, u):
        u = _check_interior(u)
        z = self._scores(u)
        dlogc_dz = z - self._rinv @ z
        # dz/du = 1/phi(z)
        phi = np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
        return dlogc_dz / phi

    def hfun(self, j, uj, u_rest):
        u_rest = self._check_j(j, u_rest)
        z_rest = self._scores(u_rest)
        m = float(self._b[j] @ z_rest)
        s = math.sqrt(self._schur[j])
        return special.ndtr((self._scores(uj) - m) / s)

    def hfun_inv(self, j, p, u_rest):
        u_rest = self._check_j(j, u_rest)
        z_rest = self._scores(u_rest)
        m = float(self._b[j] @ z_rest)
        s = math.sqrt(self._schur[j])
        return clip01(special.ndtr(m + s * special.ndtri(clip01(p))))

    def sample(self, n, rng):
        z = rng.standard_normal((n, self.dim)) @ self._chol.T
        return clip01(special.ndtr(z))


class StudentTCopula(_EllipticalCopula):
    def __init__(self, nu: float, corr, dim=None):
        super().__init__(corr, dim)
        if nu <= 0.0:
            raise ValueError("StudentT copula nu must be > 0")
        self.nu = float(nu)
        d, nu = self.dim, self.nu
        self._mvt_lognorm = (
            special.gammaln((nu + d) / 2.0)
            - special.gammaln(nu / 2.0)
            - 0.5 * d * math.log(nu * math.pi)
            - 0.5 * self._logdet
        )
        self._uni_lognorm = (
            special.gammaln((nu + 1.0) / 2.0)
            - special.gammaln(nu / 2.0)
            - 0.5 * math.log(nu * math.pi)
        )

    def _scores(self, u):
        return special.stdtrit(self.nu, clip01(u))

    def _uni_logpdf(self, z):
        return self._uni_lognorm - 0.5 * (self.nu + 1.0) * np.log1p(z * z / self.nu)

    def logdensity(self, u):
        u = _check_interior(u)
        z = self._scores(u)
        nu, d = self.nu, self.dim
        q = float(z @ (self._rinv @ z))
        log_joint = self._mvt_lognorm - 0.5 * (nu + d) * math.log1p(q / nu)
        return log_joint - float(np.sum(self._uni_logpdf(z)))

    def grad_logdensity(self, u):
        u = _check_interior(u)
        z = self._scores(u)
        nu, d = self.nu, self.dim
        rz = self._rinv @ z
        q = float(z @ rz)
        djoint_dz = -(nu + d) * rz / (nu + q)
        duni_dz = -(nu + 1.0) * z / (nu + z * z)
        pdf_z = np.exp(self._uni_logpdf(z))
        return (djoint_dz - duni_dz) / pdf_z

    def _cond_moments(self, j, z_rest):
        m = float(self._b[j] @ z_rest)
        q_rest = float(z_rest @ (self._rrest_inv[j] @ z_rest))
        s2 = (self.nu + q_rest) / (self.nu + self.dim - 1.0) * self._schur[j]
        return m, math.sqrt(s2)

    def hfun(self, j, uj, u_rest):
        u_rest = self._check_j(j, u_rest)
        m, s = self._cond_moments(j, self._scores(u_rest))
        return special.stdtr(self.nu + self.dim - 1.0, (self._scores(uj) - m) / s)

    def hfun_inv(self, j, p, u_rest):
        u_rest = self._check_j(j, u_rest)
        m, s = self._cond_moments(j, self._scores(u_rest))
        z = m + s * special.stdtrit(self.nu + self.dim - 1.0, clip01(p))
        return clip01(special.stdtr(self.nu, z))

    def sample(self, n, rng):
        z = rng.standard_normal((n, self.dim)) @ self._chol.T
        w = rng.chisquare(self.nu, size=n) / self.nu
        return clip01(special.stdtr(self.nu, z / np.sqrt(w)[:, None]))


def copula_from_dict(cfg: dict, dim: int) -> Copula:
    """Build a copula from {"kind": ..., ...} (config-file schema)."""
    kind = str(cfg["kind"]).lower()
    if kind == "independence":
        return Independence(dim)
    if kind == "clayton":
        return Clayton(float(cfg["theta"]), dim)
    if kind == "survivalclayton":
        return SurvivalClayton(float(cfg["theta"]), dim)
    if kind == "gaussian":
        return GaussianCopula(np.asarray(cfg["corr"], dtype=float), dim)
    if kind == "studentt":
        return StudentTCopula(float(cfg["nu"]), np.asarray(cfg["corr"], dtype=float), dim)
    raise ValueError(f"unknown copula kind {cfg['kind']!r}")
