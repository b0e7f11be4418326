"""Exact operating characteristics by forward recursion over outcome lattices.

At analysis k the state is the pair (control events, treatment events). The
reach table holds the probability of arriving at each state without having
stopped earlier. Stopping mass is read off the boundary region, the rest is
carried to the next analysis by convolving each arm with its binomial
increment distribution.
"""

from __future__ import annotations

import numpy as np
from scipy import stats

from .boundary import StoppingBoundary
from .design import DesignSpec, OperatingCharacteristics, SpendingProfile, TruthPoint
from .errors import ConfigError, NumericalError

__all__ = ["reach_tables", "evaluate", "spending_profiles", "stagewise_report", "TINY"]

TINY = 1e-300
MASS_TOLERANCE = 1e-9


def _transition(n_from: int, n_to: int, rate: float) -> np.ndarray:
    """T[a, b] = P(arm grows from a to b events when adding n_to - n_from patients)."""
    m = n_to - n_from
    pmf = stats.binom.pmf(np.arange(m + 1), m, rate)
    t = np.zeros((n_from + 1, n_to + 1))
    rows = np.arange(n_from + 1)
    for d, p in enumerate(pmf):
        t[rows, rows + d] = p
    return t


def _stop_mask(bound: np.ndarray, n: int) -> np.ndarray:
    return np.arange(n + 1)[None, :] <= bound[:, None]


def reach_tables(spec: DesignSpec, boundary: StoppingBoundary, truth: TruthPoint):
    """Yield ``(stage, reach, stop_mask)`` for every analysis.

    ``reach[i, j]`` is the probability of reaching the analysis with ``i``
    control and ``j`` treatment events and no earlier efficacy stop.
    """
    sizes = spec.schedule.per_arm
    if boundary.n_looks != len(sizes) or any(
        b.shape != (n + 1,) for b, n in zip(boundary.per_stage, sizes)
    ):
        raise ConfigError("boundary does not match the design schedule")
    n0 = sizes[0]
    reach = np.outer(
        stats.binom.pmf(np.arange(n0 + 1), n0, truth.control_rate),
        stats.binom.pmf(np.arange(n0 + 1), n0, truth.treatment_rate),
    )
    for k, n in enumerate(sizes):
        mask = _stop_mask(boundary.per_stage[k], n)
        yield k, reach, mask
        if k + 1 == len(sizes):
            break
        carry = np.where(mask, 0.0, reach)
        tc = _transition(n, sizes[k + 1], truth.control_rate)
        tt = _transition(n, sizes[k + 1], truth.treatment_rate)
        reach = tc.T @ carry @ tt
        reach[reach < TINY] = 0.0


def evaluate(
    spec: DesignSpec, boundary: StoppingBoundary, truth: TruthPoint
) -> OperatingCharacteristics:
    """Stage-wise efficacy stopping probabilities and expected sample size."""
    stops = np.zeros(spec.schedule.n_looks)
    worst = 0.0
    for k, reach, mask in reach_tables(spec, boundary, truth):
        # Surviving mass at this look must equal one minus what stopped before.
        err = abs(reach.sum() + stops[:k].sum() - 1.0)
        worst = max(worst, err)
        if err > MASS_TOLERANCE:
            raise NumericalError("probability mass not conserved", stage=k + 1, error=err)
        stops[k] = reach[mask].sum()
    totals = spec.schedule.totals
    early = stops[:-1]
    expected_n = float(np.dot(totals[:-1], early) + totals[-1] * (1.0 - early.sum()))
    return OperatingCharacteristics(
        stage_stop_prob=stops,
        expected_n_total=expected_n,
        truth=truth,
        info_fractions=spec.schedule.info_fractions,
        mass_error=worst,
    )


def spending_profiles(
    spec: DesignSpec, boundary: StoppingBoundary, null: TruthPoint, alt: TruthPoint
) -> tuple[SpendingProfile, SpendingProfile]:
    """Cumulative rejection probability by look under the null and the alternative."""
    return (
        evaluate(spec, boundary, null).cumulative_profile,
        evaluate(spec, boundary, alt).cumulative_profile,
    )


def stagewise_report(
    oc_null: OperatingCharacteristics, oc_alt: OperatingCharacteristics, rule_params: str = ""
) -> dict:
    """One results row in the standard table column order."""
    row = {
        "rule_params": rule_params,
        "alpha": oc_null.reject_prob,
        "power": oc_alt.reject_prob,
        "early_stop_null": oc_null.early_stop_prob,
        "early_stop_alt": oc_alt.early_stop_prob,
        "e_n_null": oc_null.expected_n_total,
        "e_n_alt": oc_alt.expected_n_total,
    }
    for k, v in enumerate(oc_null.stage_stop_prob, start=1):
        row[f"stage_stop_null_{k}"] = float(v)
    for k, v in enumerate(oc_alt.stage_stop_prob, start=1):
        row[f"stage_stop_alt_{k}"] = float(v)
    return row
