"""Run orchestration: config in, allocation report and artifact files out.

A run is one (model, event, engine) combination.  The pipeline is always
presample -> event estimation -> engine dispatch -> per-coordinate
measure + standard error.  Reports are deterministic given (config, seed);
wall-clock timings live in the manifest, never in the report, so the
report file is byte-identical across repeat runs.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .events import (
    ConcreteCrisisEvent,
    CrisisEventSpec,
    EventTarget,
    estimate_event,
    reduce_var_event,
)
from .gibbs import GibbsParams, band_from_event, rsgs_sample, select_probs, thin_interval
from .hmc import HmcParams, hmc_sample, standardize, tune
from .mc import ConditionalCountError, McRunConfig, mc_allocate, mc_presample
from .measures import MarginalRiskMeasure, batch_means_se
from .models import JointLossModel, load_model
from .oracle import elliptical_oracle

ENGINES = ("mc", "hmc", "gibbs")

try:
    from importlib.metadata import PackageNotFoundError, version

    try:
        _VERSION = version("riskalloc")
    except PackageNotFoundError:
        _VERSION = "0+unknown"
except ImportError:  # pragma: no cover
    _VERSION = "0+unknown"


# -- configuration ---------------------------------------------------------------


@dataclass(frozen=True)
class RunConfig:
    model: object  # preset name, config dict, or JointLossModel
    event: CrisisEventSpec
    engine: str
    measures: tuple = None
    n_mc: int = 100_000
    n_mcmc: int = 10_000
    seed: int = 0
    output_dir: object = None
    overrides: object = None
    min_conditional: int = 100

    def __post_init__(self):
        if self.engine not in ENGINES:
            raise ValueError(f"engine must be one of {ENGINES}, got {self.engine!r}")
        if not isinstance(self.event, CrisisEventSpec):
            raise TypeError("event must be a CrisisEventSpec")
        if self.n_mc < 100:
            raise ValueError("n_mc must be at least 100")
        if self.n_mcmc < 100:
            raise ValueError("n_mcmc must be at least 100")
        if self.min_conditional < 2:
            raise ValueError("min_conditional must be at least 2")
        if self.measures is not None:
            object.__setattr__(self, "measures", tuple(self.measures))
            for m in self.measures:
                if not isinstance(m, MarginalRiskMeasure):
                    raise TypeError("measures must be MarginalRiskMeasure instances")
        if self.overrides is not None:
            want = {"hmc": HmcParams, "gibbs": GibbsParams}.get(self.engine)
            if want is None:
                raise ValueError("the mc engine takes no parameter overrides")
            if not isinstance(self.overrides, want):
                raise TypeError(
                    f"{self.engine} overrides must be {want.__name__}, "
                    f"got {type(self.overrides).__name__}"
                )

    def to_json_dict(self) -> dict:
        if isinstance(self.model, str):
            model = self.model
        elif isinstance(self.model, dict):
            model = self.model
        else:
            model = "<in-memory model>"
        overrides = None
        if isinstance(self.overrides, HmcParams):
            overrides = {"eps": self.overrides.eps, "T": self.overrides.T}
        elif isinstance(self.overrides, GibbsParams):
            overrides = {
                "p": [float(v) for v in self.overrides.p],
                "thin_T": self.overrides.thin_T,
            }
        return {
            "model": model,
            "event": {
                "kind": self.event.kind,
                "levels": list(self.event.levels),
                "delta": self.event.delta,
            },
            "engine": self.engine,
            "measures": None
            if self.measures is None
            else [{"kind": m.kind, "levels": list(m.levels)} for m in self.measures],
            "n_mc": self.n_mc,
            "n_mcmc": self.n_mcmc,
            "seed": self.seed,
            "output_dir": None if self.output_dir is None else str(self.output_dir),
            "overrides": overrides,
            "min_conditional": self.min_conditional,
        }


def run_config_from_dict(cfg: dict) -> RunConfig:
    """Build a RunConfig from the JSON config-file schema."""
    cfg = dict(cfg)
    event = cfg.pop("event")
    spec = CrisisEventSpec(
        event["kind"], tuple(event["levels"]), delta=float(event.get("delta", 0.0))
    )
    measures = cfg.pop("measures", None)
    if measures is not None:
        measures = tuple(
            MarginalRiskMeasure(m["kind"], tuple(m.get("levels", ()))) for m in measures
        )
    overrides = cfg.pop("overrides", None)
    engine = cfg.setdefault("engine", "mc")
    if overrides is not None:
        if engine == "hmc":
            overrides = HmcParams(float(overrides["eps"]), int(overrides["T"]))
        elif engine == "gibbs":
            overrides = GibbsParams(
                np.asarray(overrides["p"], dtype=float), int(overrides["thin_T"])
            )
        else:
            raise ValueError("the mc engine takes no parameter overrides")
    known = {"model", "engine", "n_mc", "n_mcmc", "seed", "output_dir", "min_conditional"}
    extra = set(cfg) - known
    if extra:
        raise ValueError(f"unknown config keys: {sorted(extra)}")
    return RunConfig(event=spec, measures=measures, overrides=overrides, **cfg)


# -- report types ----------------------------------------------------------------


@dataclass(frozen=True)
class CoordinateAllocation:
    coordinate: int  # 1-based
    kind: str
    levels: tuple
    estimate: float
    se: float
    few_batches: bool

    def to_json_dict(self) -> dict:
        return {
            "coordinate": self.coordinate,
            "measure": self.kind,
            "levels": list(self.levels),
            "estimate": self.estimate,
            "se": self.se,
            "few_batches": self.few_batches,
        }


@dataclass(frozen=True, eq=False)
class AllocationReport:
    engine: str
    model_name: str
    seed: int
    n: int
    requested_event: CrisisEventSpec
    event_spec: CrisisEventSpec
    event: ConcreteCrisisEvent
    allocations: tuple
    engine_details: dict
    runtime_seconds: float
    widening_log: tuple = ()

    @property
    def d(self) -> int:
        return len(self.allocations)

    @property
    def estimates(self) -> np.ndarray:
        return np.array([a.estimate for a in self.allocations])

    @property
    def ses(self) -> np.ndarray:
        return np.array([a.se for a in self.allocations])

    def sum_estimate(self) -> float:
        return float(self.estimates.sum())

    def to_json_dict(self) -> dict:
        # deliberately excludes wall-clock runtime: the report must be
        # byte-identical across repeat runs of the same config and seed
        return {
            "engine": self.engine,
            "model": self.model_name,
            "seed": self.seed,
            "n": self.n,
            "requested_event": {
                "kind": self.requested_event.kind,
                "levels": list(self.requested_event.levels),
                "delta": self.requested_event.delta,
            },
            "event_spec": {
                "kind": self.event_spec.kind,
                "levels": list(self.event_spec.levels),
                "delta": self.event_spec.delta,
            },
            "event": self.event.to_json_dict(),
            "allocations": [a.to_json_dict() for a in self.allocations],
            "sum_of_estimates": self.sum_estimate(),
            "engine_details": self.engine_details,
            "widening_log": list(self.widening_log),
        }


# -- engine dispatch -------------------------------------------------------------


def _default_measures(d: int) -> tuple:
    return tuple(MarginalRiskMeasure("mean") for _ in range(d))


def _model_name(spec) -> str:
    return spec if isinstance(spec, str) else "inline"


def _check_compatibility(config: RunConfig, model: JointLossModel) -> None:
    spec = config.event
    if spec.kind == "var" and spec.delta <= 0.0:
        if config.engine == "mc":
            raise ValueError(
                "plain Monte Carlo cannot hit the zero-probability exact var "
                "event; use a positive delta band"
            )
        if config.engine == "gibbs":
            raise ValueError(
                "the gibbs engine needs a band event and the exact var event "
                "has zero width; use a positive delta band or the hmc engine"
            )
        raise ValueError(
            "hmc on the exact var event still needs conditional presample "
            "points for standardization and tuning, which only the delta "
            "band provides; use a positive delta"
        )
    if config.engine == "hmc" and spec.kind == "var":
        if model.support_class != "pure-losses":
            raise ValueError(
                "var dimension reduction requires a model with nonnegative "
                "losses; profit-and-loss models are not supported"
            )


def _widened(spec: CrisisEventSpec) -> CrisisEventSpec:
    """Lower the event's lower level by 0.01; None when that is impossible."""
    if spec.kind == "es":
        lo = spec.levels[0] - 0.01
        return CrisisEventSpec("es", (lo,)) if lo > 0.0 else None
    if spec.kind == "rvar":
        lo = spec.levels[0] - 0.01
        return CrisisEventSpec("rvar", (lo, spec.levels[1])) if lo > 0.0 else None
    # var band (a - delta, a + delta): widen the lower edge only
    lo = spec.levels[0] - spec.delta - 0.01
    hi = spec.levels[0] + spec.delta
    return CrisisEventSpec("rvar", (lo, hi)) if lo > 0.0 else None


def _conditional_rows(event, presample_matrix, min_conditional, spec):
    keep = event.contains_rows(presample_matrix)
    cond = presample_matrix[keep]
    if len(cond) < min_conditional:
        raise ConditionalCountError(len(cond), min_conditional, spec)
    return cond


def _allocations(sample, measures) -> tuple:
    out = []
    for j, m in enumerate(measures):
        e = batch_means_se(sample[:, j], m)
        out.append(
            CoordinateAllocation(j + 1, m.kind, m.levels, e.point, e.se, e.few_batches)
        )
    return tuple(out)


def _run_mc(model, config, measures, seed):
    spec = config.event
    log = []
    while True:
        try:
            res = mc_allocate(
                model,
                McRunConfig(config.n_mc, seed, spec, measures, config.min_conditional),
            )
        except ConditionalCountError as err:
            wider = _widened(spec)
            if wider is None:
                raise
            log.append(
                f"only {err.k} conditional rows (need {err.needed}); lowered the "
                f"lower level: {spec.kind}{spec.levels} -> {wider.kind}{wider.levels}"
            )
            spec = wider
            continue
        allocations = tuple(
            CoordinateAllocation(j + 1, m.kind, m.levels, e.point, e.se, e.few_batches)
            for j, (m, e) in enumerate(zip(measures, res.estimates))
        )
        details = {"k_conditional": res.k, "acr": 1.0}
        return res.event, spec, allocations, details, res.conditional_sample, None, res.runtime, log


def _run_hmc(model, config, measures, presample, seeds):
    spec = config.event
    event = estimate_event(spec, presample.matrix, model.support_class)
    cond = _conditional_rows(event, presample.matrix, config.min_conditional, spec)
    if spec.kind == "var":
        target = reduce_var_event(model, event.thresholds["v_star"])
        pts = cond[:, :-1]
        strict = np.array(
            [all(c.slack(x) > 0.0 for c in target.constraints) for x in pts]
        )
        pts = pts[strict]
        if len(pts) < 2:
            raise ConditionalCountError(len(pts), 2, spec)
    else:
        target = EventTarget(model, event)
        pts = cond
    std_target, std = standardize(target, pts)
    y_pts = std.to_y_rows(pts)
    if config.overrides is not None:
        params, tuning = config.overrides, None
    else:
        tuning = tune(std_target, y_pts, seed=seeds[1])
        params = tuning.params
    y0 = y_pts.mean(axis=0)
    t0 = time.perf_counter()
    path_y, diag = hmc_sample(std_target, params, y0, config.n_mcmc, seeds[2])
    runtime = time.perf_counter() - t0
    path_x = std.to_x_rows(path_y)
    sample = target.lift_rows(path_x) if spec.kind == "var" else path_x
    allocations = _allocations(sample, measures)
    details = {
        "k_conditional": int(len(cond)),
        "eps": params.eps,
        "T": params.T,
        "tuned": tuning is not None,
        "acr": diag.acr,
        "n_nonfinite": diag.n_nonfinite,
        "mean_reflections": float(diag.reflections_per_proposal.mean()),
        "standardization_jittered": std.jittered,
    }
    if tuning is not None:
        details["tuning"] = {
            "alpha_bar": tuning.alpha_bar,
            "n_trajectories": tuning.n_trajectories,
            "n_capped": tuning.n_capped,
            "n_halvings": tuning.n_halvings,
        }
    diag_rows = [
        (i + 1, float(diag.hamiltonian_errors[i]), int(diag.accepted[i]))
        for i in range(config.n_mcmc)
    ]
    return event, spec, allocations, details, sample, ("delta_H", diag_rows), runtime, []


def _run_gibbs(model, config, measures, presample, seeds):
    spec = config.event
    event = estimate_event(spec, presample.matrix, model.support_class)
    band = band_from_event(event)
    cond = _conditional_rows(event, presample.matrix, config.min_conditional, spec)
    x0 = cond.mean(axis=0)
    if config.overrides is not None:
        params = config.overrides
        prerun_info = {"tuned": False}
    else:
        p = select_probs(np.atleast_2d(np.cov(cond, rowvar=False)))
        pre = GibbsParams(p, 1)
        pre_path, _ = rsgs_sample(model, band, pre, x0, pre.n_pre, seeds[1])
        thin = thin_interval(pre_path, pre.rho_target)
        params = GibbsParams(p, thin.interval)
        x0 = pre_path[-1]
        prerun_info = {
            "tuned": True,
            "thin_capped": thin.capped,
            "n_pre": pre.n_pre,
        }
    t0 = time.perf_counter()
    path, diag = rsgs_sample(model, band, params, x0, config.n_mcmc, seeds[2])
    runtime = time.perf_counter() - t0
    allocations = _allocations(path, measures)
    details = {
        "k_conditional": int(len(cond)),
        "p": [float(v) for v in params.p],
        "thin_T": params.thin_T,
        "acr": 1.0,
        "n_degenerate_redraws": diag.n_degenerate_redraws,
    }
    details.update(prerun_info)
    diag_rows = [
        (i + 1, int(diag.coordinates_updated[i]) + 1, 1)
        for i in range(diag.coordinates_updated.size)
    ]
    return event, spec, allocations, details, path, ("coordinate_updated", diag_rows), runtime, []


def run(config: RunConfig) -> AllocationReport:
    """Execute one allocation run and write artifacts if requested."""
    model = load_model(config.model)
    measures = config.measures or _default_measures(model.d)
    if len(measures) != model.d:
        raise ValueError(
            f"need one measure per coordinate: got {len(measures)} for d={model.d}"
        )
    _check_compatibility(config, model)
    seeds = np.random.SeedSequence(config.seed).spawn(3)

    if config.engine == "mc":
        out = _run_mc(model, config, measures, seeds[0])
        n = config.n_mc
    else:
        presample = mc_presample(model, config.n_mc, seeds[0])
        if config.engine == "hmc":
            out = _run_hmc(model, config, measures, presample, seeds)
        else:
            out = _run_gibbs(model, config, measures, presample, seeds)
        n = config.n_mcmc

    event, spec, allocations, details, sample, diagnostics, runtime, log = out
    report = AllocationReport(
        engine=config.engine,
        model_name=_model_name(config.model),
        seed=config.seed,
        n=n,
        requested_event=config.event,
        event_spec=spec,
        event=event,
        allocations=allocations,
        engine_details=details,
        runtime_seconds=runtime,
        widening_log=tuple(log),
    )
    if config.output_dir is not None:
        _write_artifacts(report, sample, diagnostics, config)
    return report


# -- artifacts -------------------------------------------------------------------


def _write_artifacts(report, sample, diagnostics, config):
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "report.json", "w", encoding="utf-8") as f:
        json.dump(report.to_json_dict(), f, indent=2, sort_keys=True)
        f.write("\n")
    d = sample.shape[1]
    with open(out / "samples.csv", "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f)
        w.writerow([f"X{j + 1}" for j in range(d)])
        w.writerows([repr(float(v)) for v in row] for row in sample)
    if diagnostics is not None:
        middle, rows = diagnostics
        with open(out / "diagnostics.csv", "w", encoding="utf-8", newline="") as f:
            w = csv.writer(f)
            w.writerow(["iteration", middle, "accepted"])
            w.writerows(rows)
    manifest = {
        "version": _VERSION,
        "config": config.to_json_dict(),
        "engine_details": report.engine_details,
        "event": report.event.to_json_dict(),
        "widening_log": list(report.widening_log),
        "runtime_seconds": report.runtime_seconds,
        "artifacts": ["report.json", "samples.csv"]
        + (["diagnostics.csv"] if diagnostics is not None else []),
    }
    with open(out / "manifest.json", "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")


# -- comparison ------------------------------------------------------------------


@dataclass(frozen=True)
class ComparisonRow:
    engine: str
    coordinate: int
    estimate: float
    bias: object  # float, or None when no oracle is available
    se: float
    time_adjusted_mse: float
    runtime: float


def time_adjusted_mse(bias: float, sigma2: float, n: int, runtime_ratio: float) -> float:
    """bias^2 + sigma^2 / (runtime_ratio * n)."""
    if sigma2 < 0.0 or n < 1 or runtime_ratio <= 0.0:
        raise ValueError("need sigma2 >= 0, n >= 1, runtime_ratio > 0")
    return bias * bias + sigma2 / (runtime_ratio * n)


def compare(reports, oracle=None) -> list:
    """Bias/SE/time-adjusted-MSE rows for completed runs.

    The first MCMC run (if any) is the time reference: an mc row's variance
    is scaled to the sample size it could afford in that run's wall-clock
    budget.  MCMC rows use their own budget (ratio 1).  With no oracle the
    bias column is absent and the MSE is the variance term alone.
    """
    reports = list(reports)
    reference = next((r for r in reports if r.engine != "mc"), None)
    rows = []
    for rep in reports:
        if rep.engine == "mc" and reference is not None:
            if rep.runtime_seconds <= 0.0 or reference.runtime_seconds <= 0.0:
                ratio = 1.0
            else:
                ratio = reference.runtime_seconds / rep.runtime_seconds
        else:
            ratio = 1.0
        for a in rep.allocations:
            bias = None
            if oracle is not None:
                bias = float(a.estimate - np.asarray(oracle, dtype=float)[a.coordinate - 1])
            rows.append(
                ComparisonRow(
                    engine=rep.engine,
                    coordinate=a.coordinate,
                    estimate=a.estimate,
                    bias=bias,
                    se=a.se,
                    time_adjusted_mse=time_adjusted_mse(
                        bias if bias is not None else 0.0,
                        a.se * a.se * rep.n,
                        rep.n,
                        ratio,
                    ),
                    runtime=rep.runtime_seconds,
                )
            )
    return rows


def write_comparison_csv(rows, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f)
        w.writerow(
            ["engine", "coordinate", "estimate", "bias", "se", "time_adjusted_mse", "runtime"]
        )
        for r in rows:
            w.writerow(
                [
                    r.engine,
                    r.coordinate,
                    repr(r.estimate),
                    "" if r.bias is None else repr(r.bias),
                    repr(r.se),
                    repr(r.time_adjusted_mse),
                    repr(r.runtime),
                ]
            )


def oracle_for(model_spec, event: CrisisEventSpec):
    """The closed-form allocation when the model is elliptical, else None."""
    model = load_model(model_spec)
    try:
        return elliptical_oracle(model, event.kind, event.levels)
    except ValueError:
        return None
