"""Run configuration: YAML (or JSON) schema and object construction."""
from __future__ import annotations

import itertools
from pathlib import Path
from typing import Annotated, Literal, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from . import procedures as P
from .sim import AutocorrScenario, PlatformScenario
from .weights import FloorPower, ResamplePlan, sqrt_floor


class ConfigError(ValueError):
    """Schema or parameter error; ``errors`` holds ``(field path, message)`` pairs."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("\n".join(f"{path}: {msg}" for path, msg in self.errors))


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class AutocorrBlock(_Strict):
    kind: Literal["autocorr"]
    N: int = Field(1000, ge=1)
    n: int = Field(100, ge=1)
    pi1: float = Field(0.1, ge=0.0, le=1.0)
    rho: float = Field(0.8, ge=0.0, lt=1.0)
    effect: float = 5.0
    effect_c: float | None = None
    lam: float = Field(0.5, gt=0.0, lt=1.0)
    m_exponent: float = Field(0.5, gt=0.0, lt=1.0)
    weighting: Literal["bootstrap", "threshold"] = "bootstrap"


class PlatformBlock(_Strict):
    kind: Literal["platform"]
    N: int = Field(50, ge=1)
    n: int = Field(100, ge=1)
    pi1: float = Field(0.2, ge=0.0, le=1.0)
    sigma: float = Field(1.0, gt=0.0)
    rate: float = Field(10.0, gt=0.0)
    entry_spacing: float = Field(2.0, ge=0.0)
    effect: float = 0.5
    lam: float = Field(0.5, gt=0.0, lt=1.0)
    m_exponent: float = Field(0.5, gt=0.0, lt=1.0)


class GammaBlock(_Strict):
    kind: Literal["riemann", "geometric", "values"] = "riemann"
    rate: float | None = Field(None, gt=0.0, lt=1.0)
    values: list[float] | None = None

    @model_validator(mode="after")
    def _needs(self):
        if self.kind == "geometric" and self.rate is None:
            raise ValueError("geometric spending sequence needs 'rate'")
        if self.kind == "values" and not self.values:
            raise ValueError("explicit spending sequence needs non-empty 'values'")
        return self


class SpendingBlock(_Strict):
    kind: Literal["interpolation", "power"] = "interpolation"
    coef: float = Field(2.0, gt=0.0)
    exponent: float = Field(4.0, gt=1.0)


class ProcedureBlock(_Strict):
    id: Literal[
        "alpha-spending",
        "adaptive-spending",
        "online-fallback",
        "geometric",
        "continuous-graph",
        "continuous-spending",
    ]
    label: str | None = None
    closed: bool = False
    alpha: float | None = Field(None, gt=0.0, lt=1.0)
    lam: float | None = Field(None, gt=0.0, lt=1.0)
    pi: float | None = Field(None, gt=0.0, lt=1.0)
    gamma: GammaBlock = Field(default_factory=GammaBlock)
    spending: SpendingBlock = Field(default_factory=SpendingBlock)


class SweepBlock(_Strict):
    pi1: list[float] | None = None
    rho: list[float] | None = None
    N: list[int] | None = None
    n: list[int] | None = None

    @field_validator("pi1", "rho", "N", "n")
    @classmethod
    def _non_empty(cls, v):
        if v is not None and len(v) == 0:
            raise ValueError("sweep grid must be non-empty")
        return v


class RunConfig(_Strict):
    scenario: Annotated[Union[AutocorrBlock, PlatformBlock], Field(discriminator="kind")]
    procedures: list[ProcedureBlock] = Field(min_length=1)
    sweep: SweepBlock = Field(default_factory=SweepBlock)
    alpha: float = Field(0.05, gt=0.0, lt=1.0)
    replications: int = Field(1000, ge=1)
    seed: int = Field(0, ge=0)
    output: str = "results.csv"
    audit_output: str | None = None
    workers: int | None = Field(None, ge=1)

    @model_validator(mode="after")
    def _sweep_keys_apply(self):
        if self.scenario.kind == "platform" and self.sweep.rho is not None:
            raise ValueError("sweep.rho only applies to the autocorr scenario")
        return self


def _format_loc(loc) -> str:
    return ".".join(str(part) for part in loc) or "<root>"


def parse_config(raw) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError([("<root>", "configuration must be a mapping")])
    # a run manifest wraps the resolved configuration
    if "config" in raw and "library_version" in raw:
        raw = raw["config"]
    try:
        cfg = RunConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError((_format_loc(e["loc"]), e["msg"]) for e in exc.errors()) from None
    # build everything once so parameter invariants surface as config errors
    for point in sweep_points(cfg):
        scenario = build_scenario(cfg, point)
        build_procedures(cfg, scenario)
    return cfg


def load_config(path) -> RunConfig:
    text = Path(path).read_text(encoding="utf-8")
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError([("<file>", f"cannot parse {path}: {exc}")]) from None
    return parse_config(raw)


SWEEP_ORDER = ("pi1", "rho", "N", "n")


def sweep_points(cfg: RunConfig) -> list[dict]:
    grids = [(k, getattr(cfg.sweep, k)) for k in SWEEP_ORDER if getattr(cfg.sweep, k) is not None]
    if not grids:
        return [{}]
    keys = [k for k, _ in grids]
    return [dict(zip(keys, combo)) for combo in itertools.product(*(g for _, g in grids))]


def _plan(m_exponent: float) -> ResamplePlan:
    return ResamplePlan() if m_exponent == 0.5 else ResamplePlan(m=FloorPower(m_exponent))


def build_scenario(cfg: RunConfig, point: dict | None = None):
    block = cfg.scenario.model_dump()
    block.update(point or {})
    kind = block.pop("kind")
    plan = _plan(block.pop("m_exponent"))
    try:
        if kind == "autocorr":
            return AutocorrScenario(plan=plan, **block)
        return PlatformScenario(plan=plan, **block)
    except ValueError as exc:
        where = f"sweep point {point}" if point else "scenario"
        raise ConfigError([(where, str(exc))]) from None


def _gamma(block: GammaBlock) -> P.SpendingSequence:
    if block.kind == "geometric":
        return P.GeometricSequence(block.rate)
    if block.kind == "values":
        return P.FiniteSequence(tuple(block.values))
    return P.RiemannSequence()


def build_procedure(block: ProcedureBlock, alpha: float, lam: float) -> P.Procedure:
    alpha = block.alpha if block.alpha is not None else alpha
    lam = block.lam if block.lam is not None else lam
    gamma = _gamma(block.gamma)
    pid = block.id
    if block.closed and pid in ("alpha-spending", "adaptive-spending"):
        raise ValueError(f"{pid} has no closed variant (use online-fallback for closed alpha-spending)")
    if pid == "alpha-spending":
        return P.AlphaSpending(alpha=alpha, gamma=gamma)
    if pid == "adaptive-spending":
        return P.AdaptiveSpending(alpha=alpha, lam=lam, gamma=gamma)
    if pid == "online-fallback":
        return P.OnlineFallback(alpha=alpha, gamma=gamma)
    if pid == "geometric":
        return P.Geometric(pi=block.pi, alpha=alpha, lam=lam, closed=block.closed)
    if pid == "continuous-graph":
        return P.ContinuousGraph(alpha=alpha, lam=lam, gamma=gamma, closed=block.closed)
    if block.spending.kind == "power":
        sf = P.power_spending(block.spending.coef, block.spending.exponent, lam)
    else:
        sf = P.make_interpolation_function(gamma, lam)
    return P.ContinuousSpending(alpha=alpha, spending=sf, closed=block.closed)


def build_procedures(cfg: RunConfig, scenario) -> dict[str, P.Procedure]:
    out: dict[str, P.Procedure] = {}
    errors = []
    for k, block in enumerate(cfg.procedures):
        try:
            proc = build_procedure(block, cfg.alpha, scenario.lam)
        except ValueError as exc:
            errors.append((f"procedures.{k}", str(exc)))
            continue
        label = block.label or proc.label
        if label in out:
            errors.append((f"procedures.{k}.label", f"duplicate procedure label {label!r}"))
        out[label] = proc
    if errors:
        raise ConfigError(errors)
    return out
