"""JSON experiment configs and the grid runner behind ``smp experiment run``."""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, fields
from pathlib import Path
from typing import List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from scipy.special import ndtr

from . import gaussian as gs
from . import logistic as lg
from . import multinomial as mn
from .errors import ConfigError
from .generators import (
    BoundedSphereDesign,
    GaussianLocationGenerator,
    GaussianNoise,
    LinearGaussianGenerator,
    LogisticGenerator,
    MultinomialGenerator,
    RademacherDesign,
    StandardGaussianDesign,
    StudentTNoise,
)
from .numerics import degrees_of_freedom
from .risk import (
    Comparator,
    excess_risk_mc,
    linear_best_in_ball,
    linear_oracle,
    linear_penalized_oracle,
    logistic_best_in_ball,
    logistic_oracle,
)

SCHEMA_VERSION = 1
RESULTS_VERSION = "smp-results/1"

MODELS = {
    "multinomial": ("multinomial", {"smp", "mle"}),
    "gaussian_location": ("gaussian_location", {"smp", "mle", "minimax_posterior"}),
    "linear": ("linear_gaussian", {"smp", "mle"}),
    "ridge_linear": ("linear_gaussian", {"smp", "ridge_mle"}),
    "logistic_ridge": ("logistic", {"smp", "ridge_mle"}),
    "logistic": ("logistic", {"smp", "mle"}),
}
PENALIZED = {"ridge_linear", "logistic_ridge"}
LAMBDA_RULES = {"cor5.3", "prop4.4"}


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class DesignConfig(_Strict):
    kind: Literal["standard_gaussian", "rademacher", "bounded_sphere"] = "standard_gaussian"
    R: float = Field(1.0, gt=0)
    scale_decay: float = Field(0.0, ge=0)


class NoiseConfig(_Strict):
    kind: Literal["gaussian", "student_t"] = "gaussian"
    variance: float = Field(1.0, gt=0)
    nu: float = Field(5.0, gt=2)


class GeneratorConfig(_Strict):
    family: Literal["multinomial", "gaussian_location", "linear_gaussian", "logistic", "mis_logistic"]
    p: Union[Literal["uniform", "point_mass"], List[float]] = "uniform"
    design: DesignConfig = DesignConfig()
    noise: NoiseConfig = NoiseConfig()
    theta: Optional[List[float]] = None
    theta_norm: float = Field(1.0, ge=0)
    cov_scale: float = Field(1.0, gt=0)
    comparator_samples: int = Field(10**6, gt=0)


class GridConfig(_Strict):
    n: List[int] = Field(min_length=1)
    d: List[int] = Field(min_length=1)
    lam: List[Union[float, str]] = Field(default_factory=list, alias="lambda")

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    @field_validator("n", "d")
    @classmethod
    def _positive(cls, v):
        if any(k < 1 for k in v):
            raise ValueError("grid sizes must be >= 1")
        return v

    @field_validator("lam")
    @classmethod
    def _lambda(cls, v):
        for item in v:
            if isinstance(item, str) and item not in LAMBDA_RULES:
                raise ValueError(f"unknown lambda rule {item!r}; expected one of {sorted(LAMBDA_RULES)}")
            if not isinstance(item, str) and not item > 0:
                raise ValueError("lambda values must be positive")
        return v


class ExperimentConfig(_Strict):
    schema_: Literal[1] = Field(alias="schema")
    model: Literal["multinomial", "gaussian_location", "linear", "ridge_linear", "logistic_ridge", "logistic"]
    estimators: List[Literal["smp", "mle", "ridge_mle", "minimax_posterior"]] = Field(min_length=1)
    generator: GeneratorConfig
    grid: GridConfig
    replicates: int = Field(gt=0)
    seed: int = Field(ge=0, lt=2**64)
    out: Optional[str] = None
    n_test: int = Field(1, gt=0)
    B: Optional[float] = Field(None, gt=0)

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    @model_validator(mode="after")
    def _consistent(self):
        family, allowed = MODELS[self.model]
        fam = "logistic" if self.generator.family == "mis_logistic" else self.generator.family
        if fam != family:
            raise ValueError(f"model {self.model!r} needs a {family!r} generator, got {self.generator.family!r}")
        bad = [e for e in self.estimators if e not in allowed]
        if bad:
            raise ValueError(f"estimators {bad} not available for model {self.model!r}")
        if self.model in PENALIZED and not self.grid.lam:
            raise ValueError(f"model {self.model!r} needs grid.lambda")
        if self.model not in PENALIZED and self.grid.lam:
            raise ValueError(f"model {self.model!r} takes no penalty")
        if "prop4.4" in self.grid.lam and self.B is None:
            raise ValueError("lambda rule 'prop4.4' needs B")
        return self

    def dump(self) -> dict:
        return self.model_dump(mode="json", by_alias=True)


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    """Strictly parse a JSON config; errors name the offending line or field."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        msgs = [f"{'.'.join(str(p) for p in e['loc']) or '<root>'}: {e['msg']}" for e in exc.errors()]
        raise ConfigError(f"{source}: " + "; ".join(msgs)) from None


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    return parse_config(path.read_text(), str(path))


# ---------------------------------------------------------------- building blocks


def build_design(cfg: DesignConfig, d: int):
    if cfg.kind == "standard_gaussian":
        return StandardGaussianDesign(d)
    if cfg.kind == "rademacher":
        scales = np.arange(1, d + 1, dtype=float) ** (-cfg.scale_decay)
        return RademacherDesign(d, scales if cfg.scale_decay else None)
    return BoundedSphereDesign(d, cfg.R)


def _theta(cfg: GeneratorConfig, d: int):
    if cfg.theta is not None:
        if len(cfg.theta) != d:
            raise ConfigError(f"generator.theta has length {len(cfg.theta)}, grid d = {d}")
        return np.asarray(cfg.theta, dtype=float)
    return np.full(d, cfg.theta_norm / math.sqrt(d))


def build_generator(cfg: GeneratorConfig, d: int):
    if cfg.family == "multinomial":
        if cfg.p == "uniform":
            p = np.full(d, 1.0 / d)
        elif cfg.p == "point_mass":
            p = np.zeros(d)
            p[0] = 1.0
        else:
            p = np.asarray(cfg.p, dtype=float)
            if p.size != d:
                raise ConfigError(f"generator.p has length {p.size}, grid d = {d}")
        return MultinomialGenerator(p)
    if cfg.family == "gaussian_location":
        return GaussianLocationGenerator(
            mean=_theta(cfg, d), cov=cfg.cov_scale * np.eye(d), model_cov=np.eye(d),
            noise="gaussian" if cfg.noise.kind == "gaussian" else "student_t", nu=cfg.noise.nu,
        )
    design = build_design(cfg.design, d)
    if cfg.family == "linear_gaussian":
        noise = (GaussianNoise(cfg.noise.variance) if cfg.noise.kind == "gaussian"
                 else StudentTNoise(cfg.noise.nu, cfg.noise.variance))
        return LinearGaussianGenerator(_theta(cfg, d), design, noise)
    theta = _theta(cfg, d)
    if cfg.family == "logistic":
        return LogisticGenerator(design, theta)
    # probit link: same monotone shape as the logistic model but outside it
    return LogisticGenerator(design, theta, eta_fn=_ProbitEta(tuple(theta)))


@dataclass(frozen=True)
class _ProbitEta:
    theta: tuple

    def __call__(self, x):
        return ndtr(x @ np.asarray(self.theta))


def resolve_lambda(rule, n: int, d: int, R: Optional[float], B: Optional[float]) -> float:
    if not isinstance(rule, str):
        return float(rule)
    if R is None and rule == "cor5.3":
        raise ConfigError("lambda rule 'cor5.3' needs a bounded design")
    if rule == "cor5.3":
        return lg.ridge_smp_lambda_default(R, n)
    return gs.ridge_log_norm_lambda(B, n, d)


@dataclass
class Plan:
    """Estimator factory, comparator and bound for one grid cell."""

    estimator: object
    comparator: Optional[Comparator]
    bound: Optional[float]


def plan_cell(cfg: ExperimentConfig, gen, estimator: str, n: int, d: int, lam, rule) -> Plan:
    model = cfg.model
    if model == "multinomial":
        est = mn.multinomial_smp if estimator == "smp" else mn.multinomial_mle
        bound = mn.multinomial_excess_risk_bound(n, d) if estimator == "smp" else None
        return Plan(est, None, bound)
    if model == "gaussian_location":
        Sigma = gen.model_cov
        fn = {"smp": gs.location_smp, "mle": gs.location_mle, "minimax_posterior": gs.location_minimax}[estimator]
        bound = {"smp": gs.location_smp_bound(n, d),
                 "minimax_posterior": gs.location_minimax_risk(n, d)}.get(estimator)
        return Plan(lambda Y: fn(Y, Sigma), None, bound)
    R = gen.design.radius
    if model == "linear":
        if estimator == "smp":
            est = lambda s: (lambda x, f=gs.ols_fit(*s): gs.linear_smp_predict(f, x))
            bound = None
            if isinstance(gen.design, StandardGaussianDesign) and n > d + 1:
                bound = gs.linear_smp_bound_value(gs.gaussian_design_trace(n, d), n)
        else:
            est = lambda s: (lambda x, f=gs.ols_fit(*s): gs.plugin_predict(f, x))
            bound = None
        return Plan(est, linear_oracle(gen), bound)
    if model == "ridge_linear":
        if rule == "prop4.4":
            comparator = linear_best_in_ball(gen, cfg.B)
            bound = gs.ridge_log_norm_bound(cfg.B, R, n, d) if R is not None else None
        else:
            comparator = linear_penalized_oracle(gen, lam)
            bound = None
            if R is not None and lam >= 2 * R**2 / (n + 1) * (1 - 1e-12):
                bound = gs.ridge_df_bound(degrees_of_freedom(gen.design.covariance, lam), n)
        if estimator == "smp":
            est = lambda s: (lambda x, f=gs.ridge_fit(*s, lam): gs.ridge_smp_from_fit(f, x))
        else:
            est = lambda s: (lambda x, f=gs.ridge_fit(*s, lam): gs.plugin_predict(f, x))
            bound = None
        return Plan(est, comparator, bound)
    # logistic families
    if cfg.B is not None:
        comparator = logistic_best_in_ball(gen, cfg.B, cfg.generator.comparator_samples, cfg.seed)
    else:
        comparator = logistic_oracle(gen, n_samples=cfg.generator.comparator_samples, seed=cfg.seed)
    bound = None
    if model == "logistic_ridge":
        if estimator == "smp" and rule == "cor5.3" and cfg.B is not None:
            bound = lg.logistic_ridge_bound(d, cfg.B, R, n)
        if estimator == "smp":
            est = lambda s: lg.LogisticSMP(lg.as_z(*s), lam).predict
        else:
            est = lambda s: _plugin_logistic(lg.ridge_logistic_fit(*s, lam).theta)
        return Plan(est, comparator, bound)
    if estimator == "smp":
        est = lambda s: lg.LogisticSMP(lg.as_z(*s), 0.0).predict
    else:
        est = lambda s: _plugin_logistic(lg.mle_fit(lg.as_z(*s)).theta)
    return Plan(est, comparator, bound)


def _plugin_logistic(theta):
    from .numerics import sigmoid

    return lambda x: lg.BernoulliPredictive(sigmoid(np.atleast_2d(x) @ theta))


# ---------------------------------------------------------------- results


@dataclass
class ResultRow:
    model: str
    estimator: str
    n: int
    d: int
    lam: float
    group: int
    excess_risk_mean: float
    excess_risk_stderr: float
    bound: float
    bound_satisfied: bool
    seed: int
    wall_ms: float


CSV_COLUMNS = [
    "model", "estimator", "n", "d", "lambda", "group", "excess_risk_mean",
    "excess_risk_stderr", "bound", "bound_satisfied", "seed", "wall_ms",
]


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def write_results(rows: List[ResultRow], config: ExperimentConfig, stream) -> None:
    stream.write(f"# {RESULTS_VERSION}\n")
    stream.write("# config: " + json.dumps(config.dump(), sort_keys=True) + "\n")
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([_fmt(getattr(r, f.name)) for f in fields(ResultRow)])


def read_results(stream) -> List[ResultRow]:
    lines = [ln for ln in stream if not ln.startswith("#")]
    reader = csv.DictReader(lines)
    if reader.fieldnames != CSV_COLUMNS:
        raise ValueError(f"unexpected header {reader.fieldnames}")
    rows = []
    for rec in reader:
        rows.append(ResultRow(
            model=rec["model"], estimator=rec["estimator"], n=int(rec["n"]), d=int(rec["d"]),
            lam=float(rec["lambda"]), group=int(rec["group"]),
            excess_risk_mean=float(rec["excess_risk_mean"]),
            excess_risk_stderr=float(rec["excess_risk_stderr"]), bound=float(rec["bound"]),
            bound_satisfied=rec["bound_satisfied"] == "true", seed=int(rec["seed"]),
            wall_ms=float(rec["wall_ms"]),
        ))
    return rows


def cell_seed(seed: int, group: int) -> int:
    state = np.random.SeedSequence([int(seed), int(group)]).generate_state(2, dtype=np.uint32)
    return int(state[0]) << 32 | int(state[1])


def bound_ok(mean: float, se: float, bound: Optional[float], n_se: float = 3.0) -> bool:
    if bound is None or math.isnan(bound):
        return True
    return mean - n_se * se <= bound + 1e-12 * max(1.0, abs(bound))


def run_experiment(cfg: ExperimentConfig, replicates: Optional[int] = None, n_jobs=None) -> List[ResultRow]:
    """Run every (grid point, estimator) cell of ``cfg``.

    All estimators at one grid point share the cell seed, so they are
    compared on the same training sets.
    """
    reps = replicates or cfg.replicates
    rows = []
    group = 0
    lam_grid = cfg.grid.lam or [0.0]
    for d in cfg.grid.d:
        gen = build_generator(cfg.generator, d)
        for n in cfg.grid.n:
            for rule in lam_grid:
                R = getattr(getattr(gen, "design", None), "radius", None)
                lam = resolve_lambda(rule, n, d, R, cfg.B) if cfg.model in PENALIZED else 0.0
                seed = cell_seed(cfg.seed, group)
                for estimator in cfg.estimators:
                    plan = plan_cell(cfg, gen, estimator, n, d, lam, rule)
                    t0 = time.perf_counter()
                    est = excess_risk_mc(plan.estimator, gen, n, reps, seed, plan.comparator,
                                         plan.bound, cfg.n_test, n_jobs)
                    wall = (time.perf_counter() - t0) * 1e3
                    rows.append(ResultRow(
                        cfg.model, estimator, n, d, float(lam), group, est.mean, est.std_err,
                        math.nan if plan.bound is None else float(plan.bound),
                        bound_ok(est.mean, est.std_err, plan.bound), seed, wall,
                    ))
                group += 1
    return rows


def summary_table(rows: List[ResultRow]) -> str:
    head = f"{'model':<18}{'estimator':<19}{'n':>6}{'d':>4}{'lambda':>11}{'excess':>12}{'stderr':>11}{'bound':>11}  ok"
    out = io.StringIO()
    out.write(head + "\n")
    for r in rows:
        out.write(f"{r.model:<18}{r.estimator:<19}{r.n:>6}{r.d:>4}{r.lam:>11.4g}"
                  f"{r.excess_risk_mean:>12.6f}{r.excess_risk_stderr:>11.2e}{r.bound:>11.6f}"
                  f"  {'yes' if r.bound_satisfied else 'NO'}\n")
    return out.getvalue()
