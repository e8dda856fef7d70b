"""Random-scan Gibbs sampling on band-constrained sum events.

Each update draws one coordinate index from fixed selection probabilities
and replaces that coordinate by an exact draw from its full conditional
distribution truncated to the band slice, obtained by inverting the
conditional copula cdf.  There is no accept/reject step: the acceptance
probability is identically one.

The selection probabilities come from Schur-complement conditional
variances of the conditional presample covariance, and the thinning
interval from prerun autocorrelations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .copulas import clip01
from .events import ConcreteCrisisEvent
from .measures import acf

DEGENERATE_MASS = 1e-14
MAX_DEGENERATE_REDRAWS = 100


class DegenerateSliceError(RuntimeError):
    """The truncated conditional slice carries (numerically) no mass."""


@dataclass(frozen=True, eq=False)
class BandEvent:
    """The event {x : v1 <= h.x <= v2}; either bound may be infinite."""

    h: np.ndarray
    v1: float
    v2: float

    def __post_init__(self):
        h = np.atleast_1d(np.asarray(self.h, dtype=float))
        if h.ndim != 1 or not np.any(h != 0.0):
            raise ValueError("band normal must be a nonzero vector")
        h.setflags(write=False)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "v1", float(self.v1))
        object.__setattr__(self, "v2", float(self.v2))
        if not self.v1 < self.v2:
            raise ValueError(f"band needs v1 < v2, got [{self.v1}, {self.v2}]")

    def contains(self, x, rtol: float = 1e-9) -> bool:
        s = float(self.h @ np.asarray(x, dtype=float))
        tol = rtol * max(1.0, abs(self.v1) if np.isfinite(self.v1) else 1.0,
                         abs(self.v2) if np.isfinite(self.v2) else 1.0)
        return self.v1 - tol <= s <= self.v2 + tol


def band_from_event(event: ConcreteCrisisEvent) -> BandEvent:
    """Convert a sum-constraint crisis event into its band form."""
    if event.sum_equality is not None:
        raise ValueError(
            "the coordinate-update sampler cannot target the exact var "
            "event (a zero-width band); use a positive delta band or the "
            "hmc engine"
        )
    d = event.dim
    ones = np.ones(d)
    if event.kind == "es":
        return BandEvent(ones, event.thresholds["v"], np.inf)
    if event.kind == "rvar":
        return BandEvent(ones, event.thresholds["v1"], event.thresholds["v2"])
    return BandEvent(ones, event.thresholds["v_lo"], event.thresholds["v_hi"])


@dataclass(frozen=True, eq=False)
class GibbsParams:
    p: np.ndarray
    thin_T: int
    n_pre: int = 100
    rho_target: float = 0.15

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        if p.ndim != 1 or np.any(p <= 0.0):
            raise ValueError("selection probabilities must be positive")
        if abs(p.sum() - 1.0) > 1e-9:
            raise ValueError("selection probabilities must sum to one")
        p = p / p.sum()
        p.setflags(write=False)
        object.__setattr__(self, "p", p)
        if not (isinstance(self.thin_T, (int, np.integer)) and self.thin_T >= 1):
            raise ValueError("thinning interval must be a positive integer")
        object.__setattr__(self, "thin_T", int(self.thin_T))


@dataclass(frozen=True, eq=False)
class GibbsDiagnostics:
    coordinates_updated: np.ndarray
    n_degenerate_redraws: int


def select_probs(cov) -> np.ndarray:
    """Selection probabilities proportional to conditional variances.

    p_j is the Schur complement cov_jj - cov_j,-j cov_-j,-j^{-1} cov_-j,j,
    normalized to sum one.
    """
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    d = cov.shape[0]
    if cov.shape != (d, d) or not np.allclose(cov, cov.T, atol=1e-10):
        raise ValueError("covariance must be a symmetric square matrix")
    if d == 1:
        return np.ones(1)
    out = np.empty(d)
    for j in range(d):
        idx = [i for i in range(d) if i != j]
        sub = cov[np.ix_(idx, idx)]
        try:
            sol = np.linalg.solve(sub, cov[idx, j])
        except np.linalg.LinAlgError:
            raise ValueError(
                f"conditioning block for coordinate {j} is singular"
            ) from None
        out[j] = cov[j, j] - float(cov[j, idx] @ sol)
    if np.any(out <= 0.0):
        raise ValueError("covariance is not positive definite")
    return out / out.sum()


class ThinResult(NamedTuple):
    interval: int
    capped: bool


def thin_interval(prerun_path, rho_target: float = 0.15) -> ThinResult:
    """Smallest lag at which every marginal autocorrelation is <= rho_target.

    Capped at n_pre/4; the cap being hit is flagged rather than fatal.
    """
    x = np.atleast_2d(np.asarray(prerun_path, dtype=float))
    n_pre, d = x.shape
    if n_pre < 50:
        raise ValueError(f"prerun too short to estimate thinning: {n_pre} < 50")
    cap = max(1, n_pre // 4)
    acfs = np.column_stack([acf(x[:, j], cap) for j in range(d)])
    for lag in range(1, cap + 1):
        if np.all(acfs[lag] <= rho_target):
            return ThinResult(lag, False)
    return ThinResult(cap, True)


# -- truncated full-conditional inversion ---------------------------------------


def _slice_interval(j: int, x_rest, band: BandEvent):
    """Truncation interval for coordinate j given the others, in x_j space."""
    h_rest = np.delete(band.h, j)
    s_rest = float(h_rest @ np.asarray(x_rest, dtype=float))
    hj = float(band.h[j])
    if hj == 0.0:
        return -np.inf, np.inf
    a = (band.v1 - s_rest) / hj if np.isfinite(band.v1) else -np.inf * np.sign(hj)
    b = (band.v2 - s_rest) / hj if np.isfinite(band.v2) else np.inf * np.sign(hj)
    return (a, b) if hj > 0.0 else (b, a)


def _cond_cdf_bound(model, j: int, u_rest, x) -> float:
    m = model.marginals[j]
    if x == np.inf:
        return 1.0
    if x <= m.support_min:
        return 0.0
    return float(model.copula.hfun(j, clip01(m.cdf(x)), u_rest))


def _draw_in_slice(model, j: int, u_rest, lo: float, hi: float, u: float):
    c_lo = _cond_cdf_bound(model, j, u_rest, lo)
    c_hi = _cond_cdf_bound(model, j, u_rest, hi)
    mass = c_hi - c_lo
    if mass < DEGENERATE_MASS:
        raise DegenerateSliceError(
            f"conditional slice [{lo:.6g}, {hi:.6g}] for coordinate {j} "
            f"carries mass {mass:.3g}"
        )
    u_trunc = min(max(c_lo + u * mass, 1e-15), 1.0 - 1e-15)
    uj = clip01(float(model.copula.hfun_inv(j, u_trunc, u_rest)))
    x_new = float(model.marginals[j].quantile(uj))
    x_new = min(max(x_new, lo), hi)
    return x_new, clip01(float(model.marginals[j].cdf(x_new)))


def full_conditional_sample(model, j: int, x_rest, band: BandEvent, u: float) -> float:
    """Exact draw of coordinate j given the others, truncated to the band.

    u is the uniform innovation; the draw inverts the conditional-copula
    cdf at C_lo + u (C_hi - C_lo), so the result lies in the slice.
    """
    lo, hi = _slice_interval(j, x_rest, band)
    u_rest = model._u_rest(j, x_rest)
    x_new, _ = _draw_in_slice(model, j, u_rest, lo, hi, u)
    return x_new


def rsgs_sample(model, band: BandEvent, params: GibbsParams, x0, n: int, seed):
    """Random-scan Gibbs chain emitting one state per thin_T updates."""
    d = model.d
    if band.h.size != d:
        raise ValueError("band dimension does not match the model")
    if params.p.size != d:
        raise ValueError("selection probabilities must have one entry per coordinate")
    x = np.asarray(x0, dtype=float).copy()
    if x.shape != (d,):
        raise ValueError(f"initial state must have dimension {d}")
    if not band.contains(x):
        raise ValueError("initial state violates the band")
    if not np.isfinite(model.logpdf(x)):
        raise ValueError("initial state has non-finite log-density")

    rng = np.random.default_rng(seed)
    u_state = np.array([model.marginals[j].cdf(x[j]) for j in range(d)])
    cum = np.cumsum(params.p)
    path = np.empty((n, d))
    coords = np.empty(n * params.thin_T, dtype=np.int64)
    k = 0
    consec_degenerate = 0
    total_degenerate = 0
    for i in range(n):
        done = 0
        while done < params.thin_T:
            j = int(np.searchsorted(cum, rng.random(), side="right"))
            x_rest = np.delete(x, j)
            u_rest = clip01(np.delete(u_state, j))
            lo, hi = _slice_interval(j, x_rest, band)
            try:
                x_new, u_new = _draw_in_slice(model, j, u_rest, lo, hi, rng.random())
            except DegenerateSliceError:
                consec_degenerate += 1
                total_degenerate += 1
                if consec_degenerate > MAX_DEGENERATE_REDRAWS:
                    raise RuntimeError(
                        f"more than {MAX_DEGENERATE_REDRAWS} consecutive "
                        "degenerate conditional slices; the band has "
                        "(numerically) zero volume from the current state"
                    ) from None
                continue
            consec_degenerate = 0
            x[j] = x_new
            u_state[j] = u_new
            coords[k] = j
            k += 1
            done += 1
        path[i] = x
    return path, GibbsDiagnostics(
        coordinates_updated=coords, n_degenerate_redraws=total_degenerate
    )
