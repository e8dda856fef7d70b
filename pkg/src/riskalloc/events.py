"""Crisis events as intersections of linear half-spaces.

An event is a conjunction of constraints h.x >= v on the loss vector, built
from empirical quantiles of presample row sums.  The VaR event is special:
with a positive band half-width delta it becomes the RVaR band event used by
plain Monte Carlo; with delta = 0 it is the exact hyperplane {1.x = v*},
which the samplers handle through a (d-1)-dimensional reduced target.

The module also provides the constraint geometry the reflective sampler
needs: boundary hit times, mirror reflections, and the affine mapping of
constraints into standardized coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .measures import empirical_quantile

EVENT_KINDS = ("var", "rvar", "es")
SUPPORT_CLASSES = ("pure-losses", "pnl")

# relative tolerance for the VaR sum equality; the identity is maintained
# algebraically, this only absorbs float drift
EQUALITY_RTOL = 1e-9


@dataclass(frozen=True, eq=False)
class LinearConstraint:
    """Half-space h.x >= v."""

    h: np.ndarray
    v: float

    def __post_init__(self):
        h = np.atleast_1d(np.asarray(self.h, dtype=float))
        if h.ndim != 1 or not np.any(h != 0.0):
            raise ValueError("constraint normal must be a nonzero vector")
        h.setflags(write=False)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "v", float(self.v))

    def slack(self, x) -> float:
        """h.x - v; nonnegative on the feasible side."""
        return float(self.h @ np.asarray(x, dtype=float)) - self.v


@dataclass(frozen=True)
class CrisisEventSpec:
    """What conditioning event to build: kind, levels, and the VaR band width."""

    kind: str
    levels: tuple
    delta: float = 0.0

    def __post_init__(self):
        kind = str(self.kind).lower()
        levels = tuple(float(a) for a in np.atleast_1d(np.asarray(self.levels)))
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "delta", float(self.delta))
        if kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}")
        if kind in ("var", "es"):
            if len(levels) != 1 or not 0.0 < levels[0] < 1.0:
                raise ValueError(f"{kind} event takes one level in (0, 1), got {levels}")
        else:
            if len(levels) != 2 or not 0.0 < levels[0] < levels[1] <= 1.0:
                raise ValueError(
                    f"rvar event takes levels 0 < a1 < a2 <= 1, got {levels}"
                )
        if self.delta < 0.0:
            raise ValueError("delta must be nonnegative")
        if self.delta > 0.0 and kind != "var":
            raise ValueError("delta applies only to the var event kind")


@dataclass(frozen=True, eq=False)
class ConcreteCrisisEvent:
    """An estimated event: constraints, thresholds, optional sum equality.

    sum_equality is set only for the exact VaR event (delta = 0) and means
    1.x = v*; the delta > 0 VaR event carries band constraints instead so
    that membership matches what plain Monte Carlo can actually hit.
    """

    kind: str
    levels: tuple
    delta: float
    constraints: tuple
    thresholds: dict
    sum_equality: float | None = None

    @property
    def dim(self) -> int:
        return int(self.constraints[0].h.size) if self.constraints else 0

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        for c in self.constraints:
            if float(c.h @ x) < c.v:
                return False
        if self.sum_equality is not None:
            v = self.sum_equality
            if abs(float(x.sum()) - v) > EQUALITY_RTOL * max(1.0, abs(v)):
                return False
        return True

    def contains_rows(self, rows) -> np.ndarray:
        rows = np.asarray(rows, dtype=float)
        mask = np.ones(rows.shape[0], dtype=bool)
        if self.constraints:
            hmat = np.stack([c.h for c in self.constraints])
            vvec = np.array([c.v for c in self.constraints])
            mask &= (rows @ hmat.T >= vvec).all(axis=1)
        if self.sum_equality is not None:
            v = self.sum_equality
            tol = EQUALITY_RTOL * max(1.0, abs(v))
            mask &= np.abs(rows.sum(axis=1) - v) <= tol
        return mask

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind,
            "levels": list(self.levels),
            "delta": self.delta,
            "thresholds": {k: float(v) for k, v in self.thresholds.items()},
            "sum_equality": self.sum_equality,
            "constraints": [
                {"h": c.h.tolist(), "v": c.v} for c in self.constraints
            ],
        }


def _coordinate_constraints(d: int) -> list:
    out = []
    for j in range(d):
        e = np.zeros(d)
        e[j] = 1.0
        out.append(LinearConstraint(e, 0.0))
    return out


def estimate_event(spec: CrisisEventSpec, presample, support_class: str) -> ConcreteCrisisEvent:
    """Build a concrete event from empirical quantiles of presample row sums."""
    if support_class not in SUPPORT_CLASSES:
        raise ValueError(f"unknown support class {support_class!r}")
    x = np.asarray(presample, dtype=float)
    if x.ndim != 2:
        raise ValueError("presample must be an n x d matrix")
    n, d = x.shape
    if n < 100:
        raise ValueError(f"presample too small to estimate thresholds: n={n} < 100")
    s = x.sum(axis=1)
    ones = np.ones(d)

    constraints: list = []
    sum_eq = None
    if spec.kind == "es":
        v = empirical_quantile(s, spec.levels[0])
        constraints.append(LinearConstraint(ones, v))
        thresholds = {"v": v}
    elif spec.kind == "rvar":
        v1 = empirical_quantile(s, spec.levels[0])
        v2 = empirical_quantile(s, spec.levels[1])
        constraints.append(LinearConstraint(ones, v1))
        constraints.append(LinearConstraint(-ones, -v2))
        thresholds = {"v1": v1, "v2": v2}
    else:
        alpha = spec.levels[0]
        v_star = empirical_quantile(s, alpha)
        thresholds = {"v_star": v_star}
        if spec.delta > 0.0:
            if not (0.0 < alpha - spec.delta and alpha + spec.delta < 1.0):
                raise ValueError(
                    f"band levels {alpha} +/- {spec.delta} fall outside (0, 1)"
                )
            v_lo = empirical_quantile(s, alpha - spec.delta)
            v_hi = empirical_quantile(s, alpha + spec.delta)
            constraints.append(LinearConstraint(ones, v_lo))
            constraints.append(LinearConstraint(-ones, -v_hi))
            thresholds.update(v_lo=v_lo, v_hi=v_hi)
        else:
            sum_eq = v_star
    if support_class == "pure-losses":
        constraints.extend(_coordinate_constraints(d))
    return ConcreteCrisisEvent(
        kind=spec.kind,
        levels=spec.levels,
        delta=spec.delta,
        constraints=tuple(constraints),
        thresholds=thresholds,
        sum_equality=sum_eq,
    )


class EventTarget:
    """Unnormalized log-density of the model restricted to an inequality event."""

    def __init__(self, model, event: ConcreteCrisisEvent):
        if event.sum_equality is not None:
            raise ValueError(
                "the exact var event has zero volume in full dimension; "
                "use reduce_var_event instead"
            )
        self.model = model
        self.event = event
        self.dim = model.d
        self.constraints = tuple(event.constraints)

    def feasible(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return all(float(c.h @ x) >= c.v for c in self.constraints)

    def logpdf(self, x) -> float:
        if not self.feasible(x):
            return -np.inf
        return self.model.logpdf(x)

    def grad_logpdf(self, x) -> np.ndarray:
        return self.model.grad_logpdf(x)


class ReducedVarTarget:
    """The (d-1)-dimensional target for the exact VaR event.

    The last coordinate is eliminated through the sum equality: a reduced
    point x' stands for the full point (x', v* - 1.x').  Nonnegativity of
    the implied last coordinate forces 1.x' <= v*, so the feasible region
    is the simplex {x' >= 0, 1.x' <= v*}.
    """

    def __init__(self, model, v_star: float):
        if model.support_class != "pure-losses":
            raise ValueError(
                "var dimension reduction requires a model with nonnegative "
                "losses; profit-and-loss models are not supported"
            )
        if model.d < 2:
            raise ValueError("dimension reduction needs d >= 2")
        self.model = model
        self.v_star = float(v_star)
        self.dim = model.d - 1
        cons = _coordinate_constraints(self.dim)
        cons.append(LinearConstraint(-np.ones(self.dim), -self.v_star))
        self.constraints = tuple(cons)

    def lift(self, x_reduced) -> np.ndarray:
        x_reduced = np.asarray(x_reduced, dtype=float)
        return np.append(x_reduced, self.v_star - x_reduced.sum())

    def lift_rows(self, rows) -> np.ndarray:
        rows = np.asarray(rows, dtype=float)
        last = self.v_star - rows.sum(axis=1)
        return np.column_stack([rows, last])

    def logpdf(self, x_reduced) -> float:
        return self.model.logpdf(self.lift(x_reduced))

    def grad_logpdf(self, x_reduced) -> np.ndarray:
        g = self.model.grad_logpdf(self.lift(x_reduced))
        return g[:-1] - g[-1]


def reduce_var_event(model, v_star: float) -> ReducedVarTarget:
    return ReducedVarTarget(model, v_star)


def hit_time(x, p, eps: float, constraint: LinearConstraint):
    """Fraction of the step x -> x + eps*p at which the hyperplane is crossed.

    Returns the crossing time if it lies in [0, 1], else None.  Callers are
    expected to pass feasible x, so only motion toward the boundary can
    produce a valid time.
    """
    denom = eps * float(constraint.h @ np.asarray(p, dtype=float))
    if denom == 0.0:
        return None
    t = (constraint.v - float(constraint.h @ np.asarray(x, dtype=float))) / denom
    if 0.0 <= t <= 1.0:
        return t
    return None


def reflect(x_star, p, constraint: LinearConstraint):
    """Mirror a boundary point and its momentum across the constraint hyperplane.

    The momentum keeps its tangential part and flips the normal part, so
    kinetic energy is preserved exactly.
    """
    x_star = np.asarray(x_star, dtype=float)
    p = np.asarray(p, dtype=float)
    h = constraint.h
    hh = float(h @ h)
    x_r = x_star - 2.0 * ((float(h @ x_star) - constraint.v) / hh) * h
    p_r = p - 2.0 * (float(h @ p) / hh) * h
    return x_r, p_r


def standardize_constraints(constraints, chol, mu):
    """Map constraints through x = mu + L.y: (h, v) becomes (L^T h, v - h.mu)."""
    chol = np.asarray(chol, dtype=float)
    mu = np.asarray(mu, dtype=float)
    sign, _ = np.linalg.slogdet(chol)
    if sign == 0.0:
        raise ValueError("standardization matrix is singular")
    return tuple(
        LinearConstraint(chol.T @ c.h, c.v - float(c.h @ mu)) for c in constraints
    )
