"""Consistent weights from observed test statistics.

Two families are provided: hard thresholding of the z-statistic and the
parametric low-intensity (m-out-of-n) bootstrap.  The bootstrap weight is the
exact conditional probability that a bootstrap p-value exceeds ``lam``; the
Gaussian set-up gives it in closed form, so nothing is resampled here.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np
from scipy.special import ndtr, ndtri

_PPF_LO = 1e-300
_PPF_HI = 1.0 - 1e-16


def norm_cdf(x):
    return ndtr(x)


def norm_ppf(q):
    return ndtri(np.clip(q, _PPF_LO, _PPF_HI))


def one_sided_pvalue(z):
    """Upper-tail p-value ``1 - Phi(z)``, computed without cancellation."""
    return ndtr(np.negative(z))


def sqrt_floor(n: int) -> int:
    return max(1, int(np.floor(np.sqrt(n))))


@dataclass(frozen=True)
class FloorPower:
    """``m(n) = floor(n**exponent)`` clamped at 1."""

    exponent: float

    def __call__(self, n: int) -> int:
        return max(1, int(np.floor(float(n) ** self.exponent + 1e-9)))


def quarter_power(n: int) -> float:
    return float(n) ** 0.25


@dataclass(frozen=True)
class ResamplePlan:
    """Bootstrap size ``m(n)``; defaults to ``floor(sqrt(n))`` clamped at 1."""

    m: Callable[[int], int] = sqrt_floor

    def __call__(self, n: int) -> int:
        if n < 1:
            raise ValueError(f"sample size must be >= 1, got {n}")
        m = int(self.m(n))
        if not 1 <= m <= n:
            raise ValueError(f"bootstrap size m({n}) = {m} must lie in [1, {n}]")
        return m


@dataclass(frozen=True)
class ThresholdPlan:
    """Threshold ``a_n`` (default ``n**0.25``) and the weight parameter lam.

    ``a_n`` must grow without bound while ``a_n / sqrt(n) -> 0``; this is an
    asymptotic property and cannot be checked at a finite n.
    """

    lam: float = 0.5
    a: Callable[[int], float] = quarter_power

    def __post_init__(self):
        _check_lam(self.lam)

    def threshold(self, n: int) -> float:
        a = float(self.a(n))
        if a <= 0:
            raise ValueError(f"threshold a({n}) must be positive, got {a}")
        return a


@dataclass(frozen=True)
class OneSampleStat:
    z: float
    n: int

    @classmethod
    def from_sample(cls, x) -> "OneSampleStat":
        x = np.asarray(x, dtype=float)
        return cls(z=float(np.sqrt(x.size) * x.mean()), n=x.size)


@dataclass(frozen=True)
class TwoSampleStat:
    mean_x: float
    mean_y: float
    n1: int
    n2: int

    @property
    def z(self):
        return (self.mean_x - self.mean_y) / np.sqrt(1.0 / self.n1 + 1.0 / self.n2)


Variant = Literal["threshold", "bootstrap-1s", "bootstrap-2s"]


@dataclass(frozen=True)
class WeightGenerator:
    """Configuration turning an observed statistic into a consistent weight.

    With ``exact=True`` the generator is restricted to the configuration for
    which bootstrap weights give finite-sample error control with independent
    Gaussian statistics: a bootstrap variant and ``lam >= 0.5``.
    """

    variant: Variant = "bootstrap-1s"
    lam: float = 0.5
    plan: ResamplePlan | ThresholdPlan = field(default_factory=ResamplePlan)
    exact: bool = False

    def __post_init__(self):
        _check_lam(self.lam)
        if self.variant == "threshold":
            if not isinstance(self.plan, ThresholdPlan):
                raise TypeError("threshold weights need a ThresholdPlan")
            if self.plan.lam != self.lam:
                raise ValueError("ThresholdPlan.lam and WeightGenerator.lam differ")
        elif self.variant in ("bootstrap-1s", "bootstrap-2s"):
            if not isinstance(self.plan, ResamplePlan):
                raise TypeError("bootstrap weights need a ResamplePlan")
        else:
            raise ValueError(f"unknown weight variant {self.variant!r}")
        if self.exact:
            if self.variant == "threshold":
                raise ValueError("finite-sample mode requires bootstrap weights")
            if self.lam < 0.5:
                raise ValueError(f"finite-sample mode requires lam >= 0.5, got {self.lam}")

    def weight(self, stat):
        if self.variant == "threshold":
            return threshold_weight(stat, self.plan)
        if self.variant == "bootstrap-1s":
            return bootstrap_weight_1s(stat, self)
        return bootstrap_weight_2s(stat, self)


def _check_lam(lam: float) -> None:
    if not 0.0 < lam < 1.0:
        raise ValueError(f"lam must lie in the open interval (0, 1), got {lam!r}")


def threshold_weight(stat: OneSampleStat, plan: ThresholdPlan):
    """``0`` when ``z > a_n``, otherwise ``1 - lam`` (boundary inclusive)."""
    a_n = plan.threshold(stat.n)
    return np.where(np.asarray(stat.z) > a_n, 0.0, 1.0 - plan.lam)[()]


def shrunk_weight(z, shrink, lam):
    """``Phi(Phi^{-1}(1 - lam) - shrink * z)``; vectorised over ``z``."""
    return ndtr(norm_ppf(1.0 - lam) - shrink * np.asarray(z, dtype=float))


def bootstrap_weight_1s(stat: OneSampleStat, gen: WeightGenerator):
    if gen.variant != "bootstrap-1s":
        raise ValueError(f"generator variant is {gen.variant!r}, expected 'bootstrap-1s'")
    m = gen.plan(stat.n)
    return shrunk_weight(stat.z, np.sqrt(m / stat.n), gen.lam)[()]


def two_sample_shrinkage(n1: int, n2: int, m1: int, m2: int) -> float:
    return float(np.sqrt((1.0 / n1 + 1.0 / n2) / (1.0 / m1 + 1.0 / m2)))


def bootstrap_weight_2s(stat: TwoSampleStat, gen: WeightGenerator):
    """Two-sample bootstrap weight.

    Consistency needs asymptotically balanced groups (``n1 / n2 -> 1``); the
    formula itself is evaluated for any ``n1``, ``n2``.
    """
    if gen.variant != "bootstrap-2s":
        raise ValueError(f"generator variant is {gen.variant!r}, expected 'bootstrap-2s'")
    kappa = two_sample_shrinkage(stat.n1, stat.n2, gen.plan(stat.n1), gen.plan(stat.n2))
    return shrunk_weight(stat.z, kappa, gen.lam)[()]


def weight_limit(mu_sign: int, lam: float) -> float:
    """Large-sample limit of the bootstrap weight given the sign of the mean."""
    _check_lam(lam)
    limits = {1: 0.0, 0: 1.0 - lam, -1: 1.0}
    try:
        return limits[int(mu_sign)]
    except KeyError:
        raise ValueError(f"mu_sign must be -1, 0 or +1, got {mu_sign!r}") from None


def null_mean_bootstrap_weight(lam: float, m: int, n: int) -> float:
    """E[xi] for a one-sample bootstrap weight when ``z ~ N(0, 1)``.

    The shrunk bootstrap statistic is unconditionally N(0, 1 + m/n), giving
    ``Phi(Phi^{-1}(1 - lam) / sqrt(1 + m/n))``, which is ``>= 1 - lam``
    whenever ``lam >= 0.5``.
    """
    return float(ndtr(norm_ppf(1.0 - lam) / np.sqrt(1.0 + m / n)))
