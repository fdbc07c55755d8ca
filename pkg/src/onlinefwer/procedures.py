"""Online test-level rules.

Every procedure is an immutable configuration object with two entry points:

``level(history)``
    The level for the next hypothesis given the completed steps; this is what
    :class:`onlinefwer.core.StreamState` calls.
``levels(p, weights)``
    All levels of a whole stream at once, dispatched to the compiled (or
    pure-Python) kernels where the configuration allows.

Indices are 1-based in formulas and docstrings, 0-based in arrays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, ClassVar

import numpy as np

from . import kernels
from .core import History, StreamState

# ---------------------------------------------------------------------------
# spending sequences and graph weights
# ---------------------------------------------------------------------------


class SpendingSequence:
    """Non-negative sequence ``gamma_1, gamma_2, ...`` with sum at most one."""

    total: float | None = None

    def __call__(self, i):
        raise NotImplementedError

    def array(self, n: int) -> np.ndarray:
        return np.asarray(self(np.arange(1, n + 1)), dtype=float)

    def is_nonincreasing(self, horizon: int = 10_000) -> bool:
        return bool(np.all(np.diff(self.array(horizon)) <= 0.0))


@dataclass(frozen=True)
class RiemannSequence(SpendingSequence):
    """``gamma_j = 6 / (pi * j)**2``, summing to exactly one."""

    total: ClassVar[float] = 1.0

    def __call__(self, i):
        i = np.asarray(i, dtype=float)
        return (6.0 / (math.pi**2 * i * i))[()]


@dataclass(frozen=True)
class GeometricSequence(SpendingSequence):
    """``gamma_i = rate * (1 - rate)**(i - 1)``."""

    rate: float
    total: ClassVar[float] = 1.0

    def __post_init__(self):
        if not 0.0 < self.rate < 1.0:
            raise ValueError(f"rate must lie in (0, 1), got {self.rate}")

    def __call__(self, i):
        i = np.asarray(i, dtype=float)
        return (self.rate * (1.0 - self.rate) ** (i - 1.0))[()]


@dataclass(frozen=True)
class FiniteSequence(SpendingSequence):
    """Explicit leading values, zero afterwards."""

    values: tuple[float, ...]

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if np.any(v < 0):
            raise ValueError("spending values must be non-negative")
        if v.sum() > 1.0 + 1e-12:
            raise ValueError(f"spending values sum to {v.sum()} > 1")
        object.__setattr__(self, "values", tuple(float(x) for x in v))

    @property
    def total(self) -> float:
        return float(sum(self.values))

    def __call__(self, i):
        i = np.asarray(i, dtype=np.intp)
        v = np.asarray(self.values + (0.0,))
        return v[np.clip(i - 1, 0, len(self.values))][()]


@dataclass(frozen=True)
class ShiftGraph:
    """Graph weights ``g_{j,i} = seq(i - j)``; each row sums to at most one."""

    seq: SpendingSequence = field(default_factory=RiemannSequence)

    def __call__(self, j: int, i: int) -> float:
        return float(self.seq(i - j)) if i > j else 0.0

    def offsets(self, n: int) -> np.ndarray:
        """``h`` with ``h[d - 1] = g_{j, j + d}`` for ``d = 1..n``."""
        return self.seq.array(n)


@dataclass(frozen=True)
class FunctionGraph:
    """Arbitrary graph weights given by a callable ``g(j, i)`` for ``i > j``."""

    g: Callable[[int, int], float]

    def __call__(self, j: int, i: int) -> float:
        return float(self.g(j, i)) if i > j else 0.0

    def row_sums(self, rows: int, horizon: int) -> np.ndarray:
        return np.array([sum(self(j, i) for i in range(j + 1, j + horizon + 1)) for j in range(1, rows + 1)])


GraphWeights = ShiftGraph | FunctionGraph

# ---------------------------------------------------------------------------
# spending functions for continuous spending
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpendingFunction:
    """Non-increasing integrable ``f`` on ``[1, inf)`` together with lam.

    ``integral_tail`` is the value of the integral of ``f`` over ``[1, inf)``;
    the scaling constant is ``s = (1 - lam) f(1) + integral_tail``.
    """

    f: Callable
    integral_tail: float
    lam: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.lam < 1.0:
            raise ValueError(f"lam must lie in (0, 1), got {self.lam}")
        if not math.isfinite(self.integral_tail) or self.integral_tail < 0:
            raise ValueError("integral_tail must be finite and non-negative")
        grid = np.concatenate((np.linspace(1.0, 10.0, 91), np.geomspace(10.0, 1e6, 200)))
        vals = np.asarray([self(x) for x in grid])
        if np.any(vals < 0) or np.any(np.diff(vals) > 1e-15 * np.maximum(1.0, np.abs(vals[:-1]))):
            raise ValueError("spending function must be non-negative and non-increasing")
        if self.s <= 0:
            raise ValueError("scaling constant must be positive")

    def __call__(self, x):
        return self.f(x)

    @property
    def s(self) -> float:
        return (1.0 - self.lam) * float(self(1.0)) + self.integral_tail

    def table(self, n: int) -> np.ndarray | None:
        """Values at 1..n if ``f`` is piecewise linear between integers."""
        return None


@dataclass(frozen=True)
class _Interpolated:
    seq: SpendingSequence

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x < 1):
            raise ValueError("interpolated spending function is defined on [1, inf)")
        k = np.floor(x)
        lo = self.seq(k)
        return (lo + (x - k) * (self.seq(k + 1.0) - lo))[()]


@dataclass(frozen=True)
class InterpolatedSpending(SpendingFunction):
    """Linear interpolation of a spending sequence; built by
    :func:`make_interpolation_function`."""

    seq: SpendingSequence = field(default_factory=RiemannSequence)

    @property
    def s(self) -> float:
        return 1.0 + float(self.seq(1)) * (0.5 - self.lam)

    def table(self, n: int) -> np.ndarray:
        return self.seq.array(n)


def make_interpolation_function(gamma: SpendingSequence | None = None, lam: float = 0.5) -> InterpolatedSpending:
    gamma = RiemannSequence() if gamma is None else gamma
    if not gamma.is_nonincreasing():
        raise ValueError("interpolation requires a non-increasing spending sequence")
    total = gamma.total
    if total is None or abs(total - 1.0) > 1e-12:
        raise ValueError("interpolation requires a spending sequence summing to one")
    g1 = float(gamma(1))
    return InterpolatedSpending(f=_Interpolated(gamma), integral_tail=1.0 - g1 / 2.0, lam=lam, seq=gamma)


@dataclass(frozen=True)
class _Power:
    coef: float
    exponent: float

    def __call__(self, x):
        return (self.coef * np.asarray(x, dtype=float) ** (-self.exponent))[()]


def power_spending(coef: float = 2.0, exponent: float = 4.0, lam: float = 0.5) -> SpendingFunction:
    """``f(x) = coef * x**(-exponent)`` with ``exponent > 1``."""
    if exponent <= 1.0 or coef <= 0.0:
        raise ValueError("need coef > 0 and exponent > 1 for an integrable spending function")
    return SpendingFunction(f=_Power(coef, exponent), integral_tail=coef / (exponent - 1.0), lam=lam)


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _param_at(param, i: int) -> float:
    """Value of a per-hypothesis parameter at 1-based index ``i``."""
    if callable(param):
        return float(param(i))
    if np.ndim(param) == 0:
        return float(param)
    return float(param[i - 1])


def _param_array(param, n: int) -> np.ndarray:
    if callable(param):
        return np.array([float(param(i)) for i in range(1, n + 1)])
    if np.ndim(param) == 0:
        return np.full(n, float(param))
    arr = np.asarray(param, dtype=float)
    if arr.size < n:
        raise ValueError(f"per-hypothesis parameter has {arr.size} entries, stream has {n}")
    return arr[:n].copy()


def _check_unit(name: str, value, closed_low: bool = False) -> None:
    vals = [value] if np.ndim(value) == 0 and not callable(value) else None
    if vals is None:
        if callable(value):
            return
        vals = list(np.asarray(value, dtype=float))
    lo_ok = (lambda v: v >= 0.0) if closed_low else (lambda v: v > 0.0)
    for v in vals:
        if not (lo_ok(v) and v < 1.0):
            raise ValueError(f"{name} must lie in {'[0' if closed_low else '(0'}, 1), got {v}")


def _as_arrays(p, weights):
    p = np.ascontiguousarray(p, dtype=float)
    w = np.ones_like(p) if weights is None else np.ascontiguousarray(weights, dtype=float)
    if p.shape != w.shape or p.ndim != 1:
        raise ValueError("p and weights must be 1-d arrays of equal length")
    return p, w


def replay_levels(procedure, p, weights=None) -> np.ndarray:
    """Levels from stepping a fresh :class:`StreamState` through the stream."""
    from .core import PValueRecord

    p, w = _as_arrays(p, weights)
    state = StreamState(procedure)
    out = np.empty(p.size)
    for k in range(p.size):
        out[k] = state.next_level()
        state.report(PValueRecord(p=float(p[k]), weight=float(w[k])))
    return out


# ---------------------------------------------------------------------------
# procedures
# ---------------------------------------------------------------------------


class Procedure:
    id: ClassVar[str]
    alpha: float
    closed: bool = False

    def level(self, history: History) -> float:
        raise NotImplementedError

    def levels(self, p, weights=None) -> np.ndarray:
        return replay_levels(self, p, weights)

    def decisions(self, p, weights=None):
        """``(levels, rejected)`` for a full stream."""
        p = np.asarray(p, dtype=float)
        lv = self.levels(p, weights)
        return lv, p <= lv

    def audit_weights(self, p, weights) -> np.ndarray:
        """Per-step multipliers to use in the budget audit."""
        return np.asarray(weights, dtype=float)

    def audit_lambdas(self, n: int) -> np.ndarray:
        return _param_array(getattr(self, "lam", 0.0), n)

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")

    @property
    def label(self) -> str:
        return f"{self.id}-closed" if self.closed and self.id not in ("online-fallback",) else self.id


@dataclass(frozen=True)
class AlphaSpending(Procedure):
    alpha: float = 0.05
    gamma: SpendingSequence = field(default_factory=RiemannSequence)
    id: ClassVar[str] = "alpha-spending"

    def level(self, history):
        return level_alpha_spending(history, self)

    def levels(self, p, weights=None):
        p, _ = _as_arrays(p, weights)
        return self.alpha * self.gamma.array(p.size)

    def audit_lambdas(self, n):
        return np.zeros(n)

    def audit_weights(self, p, weights):
        return np.ones(len(p))


@dataclass(frozen=True)
class AdaptiveSpending(Procedure):
    """Candidate-indicator adaptive spending; uses p-values, ignores weights."""

    alpha: float = 0.05
    lam: float = 0.5
    gamma: SpendingSequence = field(default_factory=RiemannSequence)
    id: ClassVar[str] = "adaptive-spending"

    def __post_init__(self):
        super().__post_init__()
        _check_unit("lam", self.lam)

    def level(self, history):
        return level_adaptive_spending(history, self)

    def levels(self, p, weights=None):
        p, _ = _as_arrays(p, weights)
        return kernels.adaptive_spending(p, self.alpha, self.lam, self.gamma.array(max(p.size, 1)))

    def audit_weights(self, p, weights):
        return (np.asarray(p, dtype=float) > self.lam).astype(float)


@dataclass(frozen=True)
class OnlineFallback(Procedure):
    """Alpha-spending that passes the level of every rejected hypothesis on
    to later ones through the graph weights."""

    alpha: float = 0.05
    gamma: SpendingSequence = field(default_factory=RiemannSequence)
    graph: GraphWeights | None = None
    closed: bool = True
    id: ClassVar[str] = "online-fallback"

    def __post_init__(self):
        super().__post_init__()
        if self.graph is None:
            object.__setattr__(self, "graph", ShiftGraph(self.gamma))
        object.__setattr__(self, "closed", True)

    def level(self, history):
        return level_online_fallback(history, self)

    def levels(self, p, weights=None):
        p, _ = _as_arrays(p, weights)
        if not isinstance(self.graph, ShiftGraph):
            return replay_levels(self, p)
        n = p.size
        return kernels.graph(p, np.ones(n), np.zeros(n), self.alpha, self.gamma.array(n),
                             self.graph.offsets(max(n, 1)), True)

    def audit_lambdas(self, n):
        return np.zeros(n)

    def audit_weights(self, p, weights):
        return np.ones(len(p))


@dataclass(frozen=True)
class Geometric(Procedure):
    """Spend a fixed fraction ``pi`` of the remaining budget at each step.

    There is no default for ``pi``.  The closed variant is only defined for a
    constant ``pi``, where the rule coincides with a continuous graph using a
    geometric spending sequence.
    """

    pi: float | object = None
    alpha: float = 0.05
    lam: float | object = 0.5
    closed: bool = False
    id: ClassVar[str] = "geometric"

    def __post_init__(self):
        super().__post_init__()
        if self.pi is None:
            raise ValueError("geometric procedure needs an explicit pi")
        _check_unit("pi", self.pi)
        _check_unit("lam", self.lam)
        if self.closed and (callable(self.pi) or np.ndim(self.pi) != 0):
            raise ValueError("closed geometric procedure needs a constant pi")

    def _as_graph(self) -> "ContinuousGraph":
        seq = GeometricSequence(float(self.pi))
        return ContinuousGraph(alpha=self.alpha, lam=self.lam, gamma=seq, graph=ShiftGraph(seq), closed=True)

    def level(self, history):
        if self.closed:
            return level_continuous_graph(history, self._as_graph())
        return level_geometric(history, self)

    def levels(self, p, weights=None):
        if self.closed:
            return self._as_graph().levels(p, weights)
        p, w = _as_arrays(p, weights)
        n = p.size
        return kernels.geometric(w, self.alpha, _param_array(self.lam, n), _param_array(self.pi, n))


@dataclass(frozen=True)
class ContinuousGraph(Procedure):
    """Continuous adaptive graph: unspent level ``(1 - xi_j) alpha_j`` flows to
    later hypotheses via ``g``.  The closed variant also recycles the full
    level of rejected hypotheses."""

    alpha: float = 0.05
    lam: float | object = 0.5
    gamma: SpendingSequence = field(default_factory=RiemannSequence)
    graph: GraphWeights | None = None
    closed: bool = False
    id: ClassVar[str] = "continuous-graph"

    def __post_init__(self):
        super().__post_init__()
        _check_unit("lam", self.lam)
        if self.graph is None:
            object.__setattr__(self, "graph", ShiftGraph(self.gamma))

    def level(self, history):
        return level_continuous_graph(history, self)

    def levels(self, p, weights=None):
        p, w = _as_arrays(p, weights)
        if not isinstance(self.graph, ShiftGraph):
            return replay_levels(self, p, w)
        n = p.size
        return kernels.graph(p, w, _param_array(self.lam, n), self.alpha, self.gamma.array(n),
                             self.graph.offsets(max(n, 1)), bool(self.closed))


@dataclass(frozen=True)
class ContinuousSpending(Procedure):
    """Levels ``alpha (1 - lam) / s * f(1 + sum of past weights)``.

    The closed variant drops the weights of rejected hypotheses from the sum.
    """

    alpha: float = 0.05
    spending: SpendingFunction = field(default_factory=make_interpolation_function)
    closed: bool = False
    id: ClassVar[str] = "continuous-spending"

    @property
    def lam(self) -> float:
        return self.spending.lam

    def level(self, history):
        return level_continuous_spending(history, self)

    def levels(self, p, weights=None):
        p, w = _as_arrays(p, weights)
        n = p.size
        table = self.spending.table(n + 1)
        if table is None:
            return replay_levels(self, p, w)
        return kernels.spending(p, w, self.alpha, self.lam, self.spending.s, table, bool(self.closed))


# ---------------------------------------------------------------------------
# level rules on a recorded history
# ---------------------------------------------------------------------------


def level_alpha_spending(history: History, config: AlphaSpending) -> float:
    return config.alpha * float(config.gamma(len(history) + 1))


def level_adaptive_spending(history: History, config: AdaptiveSpending) -> float:
    t = 1 + sum(1 for p in history.p if p > config.lam)
    return config.alpha * (1.0 - config.lam) * float(config.gamma(t))


def level_online_fallback(history: History, config: OnlineFallback) -> float:
    i = len(history) + 1
    inflow = sum(config.graph(j, i) * a for j, (a, r) in enumerate(zip(history.levels, history.rejected), 1) if r)
    return config.alpha * float(config.gamma(i)) + inflow


def level_geometric(history: History, config: Geometric) -> float:
    """``pi_i (1 - lam_i) (alpha - sum_j alpha_j xi_j / (1 - lam_j))``.

    Each spent term equals ``pi_j xi_j`` times the budget remaining before
    step ``j``, so the remaining budget is the product
    ``alpha * prod_j (1 - pi_j xi_j)``; the product form avoids the
    cancellation of the subtraction once the budget is nearly exhausted.
    """
    i = len(history) + 1
    remaining = config.alpha
    for j, w in enumerate(history.weights, 1):
        remaining *= 1.0 - _param_at(config.pi, j) * w
    return _param_at(config.pi, i) * (1.0 - _param_at(config.lam, i)) * remaining


def level_continuous_graph(history: History, config: ContinuousGraph) -> float:
    i = len(history) + 1
    inflow = 0.0
    for j, (a, w, r) in enumerate(zip(history.levels, history.weights, history.rejected), 1):
        carry = max(1.0 - w, float(r)) if config.closed else 1.0 - w
        inflow += config.graph(j, i) * carry * a / (1.0 - _param_at(config.lam, j))
    return (1.0 - _param_at(config.lam, i)) * (config.alpha * float(config.gamma(i)) + inflow)


def level_continuous_spending(history: History, config: ContinuousSpending) -> float:
    if config.closed:
        used = sum(w for w, r in zip(history.weights, history.rejected) if not r)
    else:
        used = sum(history.weights)
    sf = config.spending
    return config.alpha * (1.0 - sf.lam) / sf.s * float(sf(1.0 + used))


def geometric_recursion(weights, alpha: float, lam, pi) -> np.ndarray:
    """Geometric levels from the one-step update
    ``a_{i+1} = pi_{i+1} (1 - lam_{i+1}) a_i (1 - pi_i xi_i) / ((1 - lam_i) pi_i)``."""
    w = np.asarray(weights, dtype=float)
    n = w.size
    lam_a, pi_a = _param_array(lam, n), _param_array(pi, n)
    out = np.empty(n)
    if n == 0:
        return out
    out[0] = pi_a[0] * (1.0 - lam_a[0]) * alpha
    for k in range(n - 1):
        out[k + 1] = pi_a[k + 1] * (1.0 - lam_a[k + 1]) * out[k] * (1.0 - pi_a[k] * w[k]) / ((1.0 - lam_a[k]) * pi_a[k])
    return out


# ---------------------------------------------------------------------------
# budget audit
# ---------------------------------------------------------------------------


def audit_budget(levels, weights, lambdas, alpha: float | None = None) -> float:
    """Largest partial sum of ``level_j * weight_j / (1 - lam_j)``.

    A procedure respects the budget rule when the result does not exceed
    ``alpha`` (up to rounding); the comparison is left to the caller.
    ``lambdas`` may be a scalar.
    """
    levels = np.asarray(levels, dtype=float)
    weights = np.asarray(weights, dtype=float)
    lam = np.asarray(lambdas, dtype=float)
    if lam.ndim == 0:
        lam = np.full(levels.shape, float(lam))
    if not (levels.shape == weights.shape == lam.shape):
        raise ValueError(f"length mismatch: levels {levels.shape}, weights {weights.shape}, lambdas {lam.shape}")
    if alpha is not None and not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if levels.size == 0:
        return 0.0
    return float(max(0.0, np.max(np.cumsum(levels * weights / (1.0 - lam)))))


PROCEDURES: dict[str, type[Procedure]] = {
    cls.id: cls
    for cls in (AlphaSpending, AdaptiveSpending, OnlineFallback, Geometric, ContinuousGraph, ContinuousSpending)
}
