"""Monte Carlo estimates of FWER and power."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MetricsReport:
    fwer_hat: float
    se_fwer: float
    power_hat: float | None
    se_power: float | None
    R: int
    R_power: int

    def as_row(self) -> dict:
        return {
            "fwer_hat": self.fwer_hat,
            "se_fwer": self.se_fwer,
            "power_hat": self.power_hat,
            "se_power": self.se_power,
            "R": self.R,
        }


def aggregate(outcomes) -> MetricsReport:
    """Reduce replication outcomes to FWER/power estimates.

    Power is the mean per-replication fraction of false nulls rejected, taken
    over replications that contain at least one false null; it is ``None``
    when no replication does.  Standard errors are sample-based: binomial for
    the FWER and sample standard deviation over root count for power.
    """
    outcomes = list(outcomes)
    if not outcomes:
        raise ValueError("cannot aggregate an empty list of outcomes")
    R = len(outcomes)
    # integer counts first: the sums are exact, so permuting outcomes cannot change the result
    n_err = sum(1 for o in outcomes if o.false_rejections > 0)
    fwer = n_err / R
    se_fwer = math.sqrt(fwer * (1.0 - fwer) / R)
    with_alt = [(o.true_rejections, o.false_nulls) for o in outcomes if o.false_nulls > 0]
    if not with_alt:
        return MetricsReport(fwer, se_fwer, None, None, R, 0)
    props = np.sort(np.array([t / a for t, a in with_alt]))
    power = float(math.fsum(props) / props.size)
    if props.size > 1:
        var = math.fsum((props - power) ** 2) / (props.size - 1)
        se_power = math.sqrt(var / props.size)
    else:
        se_power = 0.0
    return MetricsReport(fwer, se_fwer, power, se_power, R, int(props.size))
