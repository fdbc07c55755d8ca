"""Simulation worlds and the replication driver.

Each replication draws its own truths and data from a counter-based Philox
stream keyed by ``(seed, replication index)``, then runs every procedure on
the identical ``(p, weight)`` stream.  Results therefore do not depend on how
replications are split across worker processes.
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import ClassVar, Literal, Mapping, Sequence

import numpy as np
from scipy.signal import lfilter

from .weights import (
    ResamplePlan,
    ThresholdPlan,
    one_sided_pvalue,
    shrunk_weight,
    two_sample_shrinkage,
)

WORKERS_ENV = "ONLINEFWER_WORKERS"


def replication_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(index)])))


@dataclass(frozen=True)
class StreamData:
    """One realised stream; ``is_null`` is ground truth, hidden from procedures."""

    is_null: np.ndarray
    z: np.ndarray
    p: np.ndarray
    weights: np.ndarray


@dataclass(frozen=True)
class AutocorrScenario:
    """z-scores with ``corr(Z_i, Z_k) = rho**|i - k|``.

    ``effect`` is the mean of a false-null z-score.  When ``effect_c`` is set
    the mean becomes ``effect_c / sqrt(n)`` instead.
    """

    N: int = 1000
    n: int = 100
    pi1: float = 0.1
    rho: float = 0.8
    effect: float = 5.0
    effect_c: float | None = None
    lam: float = 0.5
    plan: ResamplePlan = field(default_factory=ResamplePlan)
    weighting: Literal["bootstrap", "threshold"] = "bootstrap"
    kind: ClassVar[str] = "autocorr"

    def __post_init__(self):
        if self.N < 1 or self.n < 1:
            raise ValueError("N and n must be positive")
        if not 0.0 <= self.pi1 <= 1.0:
            raise ValueError(f"pi1 must lie in [0, 1], got {self.pi1}")
        if not 0.0 <= self.rho < 1.0:
            raise ValueError(f"rho must lie in [0, 1), got {self.rho}")
        if not 0.0 < self.lam < 1.0:
            raise ValueError(f"lam must lie in (0, 1), got {self.lam}")
        if self.weighting not in ("bootstrap", "threshold"):
            raise ValueError(f"unknown weighting {self.weighting!r}")

    @property
    def alt_mean(self) -> float:
        if self.effect_c is not None:
            return self.effect_c / np.sqrt(self.n)
        return self.effect

    def covariance(self) -> np.ndarray:
        idx = np.arange(self.N)
        return self.rho ** np.abs(idx[:, None] - idx[None, :])

    def draw(self, rng: np.random.Generator) -> StreamData:
        false_null = rng.random(self.N) < self.pi1
        eps = rng.standard_normal(self.N)
        # AR(1): e_1 = eps_1, e_i = rho e_{i-1} + sqrt(1 - rho^2) eps_i
        drive = eps * np.sqrt(1.0 - self.rho**2)
        drive[0] = eps[0]
        z = lfilter([1.0], [1.0, -self.rho], drive) + self.alt_mean * false_null
        if self.weighting == "threshold":
            a_n = ThresholdPlan(lam=self.lam).threshold(self.n)
            w = np.where(z > a_n, 0.0, 1.0 - self.lam)
        else:
            w = shrunk_weight(z, np.sqrt(self.plan(self.n) / self.n), self.lam)
        return StreamData(is_null=~false_null, z=z, p=one_sided_pvalue(z), weights=w)


@dataclass(frozen=True)
class PlatformScenario:
    """Platform trial with a shared, continuously recruiting control arm.

    Arm ``i`` enters at ``entry_spacing * (i - 1)`` and recruits ``rate``
    patients per unit time until it has ``n``; the control arm recruits at the
    same rate, so arm ``i`` has exactly ``n`` concurrent controls.
    """

    N: int = 50
    n: int = 100
    pi1: float = 0.2
    sigma: float = 1.0
    rate: float = 10.0
    entry_spacing: float = 2.0
    effect: float = 0.5
    lam: float = 0.5
    plan: ResamplePlan = field(default_factory=ResamplePlan)
    kind: ClassVar[str] = "platform"

    def __post_init__(self):
        if self.N < 1 or self.n < 1:
            raise ValueError("N and n must be positive")
        if not 0.0 <= self.pi1 <= 1.0:
            raise ValueError(f"pi1 must lie in [0, 1], got {self.pi1}")
        if self.sigma <= 0 or self.rate <= 0 or self.entry_spacing < 0:
            raise ValueError("sigma and rate must be positive, entry_spacing non-negative")
        if not 0.0 < self.lam < 1.0:
            raise ValueError(f"lam must lie in (0, 1), got {self.lam}")

    @property
    def duration(self) -> float:
        return self.n / self.rate

    def control_starts(self) -> np.ndarray:
        """Index of the first concurrent control of each arm in the control stream."""
        return np.rint(self.entry_spacing * np.arange(self.N) * self.rate).astype(np.intp)

    def overlap(self) -> np.ndarray:
        """``|J_i & J_k|`` for all arm pairs."""
        s = self.control_starts()
        return np.clip(self.n - np.abs(s[:, None] - s[None, :]), 0, None)

    def covariance(self) -> np.ndarray:
        """Null covariance of the arm z-statistics, ``|J_i & J_k| / (2 n)`` off the diagonal."""
        cov = self.overlap() / (2.0 * self.n)
        np.fill_diagonal(cov, 1.0)
        return cov

    def draw(self, rng: np.random.Generator) -> StreamData:
        false_null = rng.random(self.N) < self.pi1
        mu = self.effect * false_null
        arms = rng.normal(0.0, self.sigma, size=(self.N, self.n)) + mu[:, None]
        starts = self.control_starts()
        controls = rng.normal(0.0, self.sigma, size=int(starts[-1]) + self.n)
        csum = np.concatenate(([0.0], np.cumsum(controls)))
        mean_ctrl = (csum[starts + self.n] - csum[starts]) / self.n
        mean_arm = arms.mean(axis=1)
        z = np.sqrt(self.n / 2.0) * (mean_arm - mean_ctrl) / self.sigma
        m = self.plan(self.n)
        w = shrunk_weight(z, two_sample_shrinkage(self.n, self.n, m, m), self.lam)
        return StreamData(is_null=~false_null, z=z, p=one_sided_pvalue(z), weights=w)


Scenario = AutocorrScenario | PlatformScenario


@dataclass(frozen=True)
class ReplicationOutcome:
    """Error and power counts of one procedure on one replication.

    ``records`` optionally holds the per-hypothesis arrays (``is_null``, ``p``,
    ``weight``, ``level``, ``rejected``).
    """

    false_rejections: int
    true_rejections: int
    false_nulls: int
    records: Mapping[str, np.ndarray] | None = None

    @property
    def any_false_rejection(self) -> bool:
        return self.false_rejections > 0

    @classmethod
    def from_stream(cls, data: StreamData, levels: np.ndarray, keep_records: bool = False) -> "ReplicationOutcome":
        rejected = data.p <= levels
        records = None
        if keep_records:
            records = {
                "is_null": data.is_null,
                "p": data.p,
                "weight": data.weights,
                "level": levels,
                "rejected": rejected,
            }
        return cls(
            false_rejections=int(np.count_nonzero(rejected & data.is_null)),
            true_rejections=int(np.count_nonzero(rejected & ~data.is_null)),
            false_nulls=int(np.count_nonzero(~data.is_null)),
            records=records,
        )


def run_replication(scenario: Scenario, procedure, rng: np.random.Generator, keep_records: bool = True) -> ReplicationOutcome:
    data = scenario.draw(rng)
    return ReplicationOutcome.from_stream(data, procedure.levels(data.p, data.weights), keep_records)


def run_autocorr_replication(scenario: AutocorrScenario, procedure, rng, keep_records: bool = True) -> ReplicationOutcome:
    return run_replication(scenario, procedure, rng, keep_records)


def run_platform_replication(scenario: PlatformScenario, procedure, rng, keep_records: bool = True) -> ReplicationOutcome:
    return run_replication(scenario, procedure, rng, keep_records)


def default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _run_block(args):
    scenario, procedures, seed, start, stop = args
    counts = np.empty((stop - start, len(procedures), 3), dtype=np.int64)
    for r in range(start, stop):
        data = scenario.draw(replication_rng(seed, r))
        is_null = data.is_null
        for k, proc in enumerate(procedures):
            rej = data.p <= proc.levels(data.p, data.weights)
            counts[r - start, k] = (
                np.count_nonzero(rej & is_null),
                np.count_nonzero(rej & ~is_null),
                np.count_nonzero(~is_null),
            )
    return counts


def _labelled(procedures) -> dict:
    if isinstance(procedures, Mapping):
        return dict(procedures)
    out = {}
    for proc in procedures:
        if proc.label in out:
            raise ValueError(f"duplicate procedure label {proc.label!r}; pass a mapping to disambiguate")
        out[proc.label] = proc
    return out


def run_study(
    scenario: Scenario,
    procedures: Sequence | Mapping,
    replications: int,
    seed: int = 0,
    workers: int | None = None,
    block_size: int = 250,
) -> dict[str, list[ReplicationOutcome]]:
    """Run ``replications`` paired replications of every procedure.

    Returns outcomes per procedure label in replication order.
    """
    if replications < 1:
        raise ValueError("need at least one replication")
    procs = _labelled(procedures)
    if not procs:
        raise ValueError("no procedures given")
    labels, plist = list(procs), list(procs.values())
    workers = default_workers() if workers is None else max(1, int(workers))
    blocks = [
        (scenario, plist, seed, lo, min(lo + block_size, replications))
        for lo in range(0, replications, block_size)
    ]
    if workers == 1 or len(blocks) == 1:
        parts = [_run_block(b) for b in blocks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_block, blocks))
    counts = np.concatenate(parts, axis=0)
    return {
        label: [ReplicationOutcome(int(f), int(t), int(a)) for f, t, a in counts[:, k]]
        for k, label in enumerate(labels)
    }


def _audit_block(args):
    from .procedures import audit_budget

    scenario, procedures, seed, start, stop = args
    out = np.empty((stop - start, len(procedures)))
    for r in range(start, stop):
        data = scenario.draw(replication_rng(seed, r))
        for k, proc in enumerate(procedures):
            levels = proc.levels(data.p, data.weights)
            out[r - start, k] = audit_budget(
                levels, proc.audit_weights(data.p, data.weights), proc.audit_lambdas(data.p.size)
            )
    return out


def run_audit(
    scenario: Scenario,
    procedures: Sequence | Mapping,
    replications: int,
    seed: int = 0,
    workers: int | None = None,
    block_size: int = 250,
) -> dict[str, np.ndarray]:
    """Largest budget partial sum per replication, for every procedure.

    Adaptive spending is audited with ``1 - C_i`` in place of the weight and
    procedures without adaptivity with weight one and ``lam = 0``.
    """
    if replications < 1:
        raise ValueError("need at least one replication")
    procs = _labelled(procedures)
    labels, plist = list(procs), list(procs.values())
    workers = default_workers() if workers is None else max(1, int(workers))
    blocks = [
        (scenario, plist, seed, lo, min(lo + block_size, replications))
        for lo in range(0, replications, block_size)
    ]
    if workers == 1 or len(blocks) == 1:
        parts = [_audit_block(b) for b in blocks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_audit_block, blocks))
    sums = np.concatenate(parts, axis=0)
    return {label: sums[:, k] for k, label in enumerate(labels)}
