"""Scenario, schedule, decision-rule and result types for two-arm designs."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .errors import ConfigError
from .kernel import BetaParams

__all__ = [
    "TrialScenario",
    "TruthPoint",
    "AnalysisSchedule",
    "PriorPair",
    "FixedPosterior",
    "TwoPhasePosterior",
    "PredictiveHybrid",
    "ZBoundary",
    "DecisionRule",
    "DesignSpec",
    "SpendingProfile",
    "OperatingCharacteristics",
    "build_schedule",
    "validate",
    "HYPRESS",
]


@dataclass(frozen=True)
class TruthPoint:
    control_rate: float
    treatment_rate: float
    label: str = "custom"

    def __post_init__(self):
        if self.label not in ("null", "alternative", "custom"):
            raise ConfigError(f"unknown truth label {self.label!r}")
        for r in (self.control_rate, self.treatment_rate):
            if not 0.0 < r < 1.0:
                raise ConfigError(f"event rates must lie in (0, 1), got {r!r}")


@dataclass(frozen=True)
class TrialScenario:
    """Design assumptions: control rate, treatment rate under H1, alpha, power."""

    control_rate: float = 0.40
    treatment_rate_alt: float = 0.25
    one_sided_alpha: float = 0.025
    target_power: float = 0.80

    def __post_init__(self):
        for r in (self.control_rate, self.treatment_rate_alt):
            if not 0.0 < r < 1.0:
                raise ConfigError(f"event rates must lie in (0, 1), got {r!r}")
        if not 0.0 < self.one_sided_alpha < 0.5:
            raise ConfigError(f"one_sided_alpha must lie in (0, 0.5), got {self.one_sided_alpha!r}")
        # 0 is admitted so calibration can be run with a vacuous power constraint.
        if not 0.0 <= self.target_power < 1.0:
            raise ConfigError(f"target_power must lie in [0, 1), got {self.target_power!r}")

    def null(self) -> TruthPoint:
        return TruthPoint(self.control_rate, self.control_rate, "null")

    def alternative(self) -> TruthPoint:
        return TruthPoint(self.control_rate, self.treatment_rate_alt, "alternative")


HYPRESS = TrialScenario()


@dataclass(frozen=True)
class AnalysisSchedule:
    """Cumulative per-arm sample sizes at each analysis (1:1 allocation)."""

    per_arm: tuple

    def __post_init__(self):
        object.__setattr__(self, "per_arm", tuple(int(n) for n in self.per_arm))

    @property
    def n_looks(self) -> int:
        return len(self.per_arm)

    @property
    def info_fractions(self) -> tuple:
        last = self.per_arm[-1]
        return tuple(n / last for n in self.per_arm)

    @property
    def totals(self) -> tuple:
        """Cumulative total (both arms) sample sizes."""
        return tuple(2 * n for n in self.per_arm)

    @property
    def n_total(self) -> int:
        return 2 * self.per_arm[-1]

    def problems(self) -> list:
        out = []
        if not self.per_arm:
            out.append("schedule has no analyses")
            return out
        if self.per_arm[0] < 1:
            out.append("first analysis needs at least one patient per arm")
        if any(b <= a for a, b in zip(self.per_arm, self.per_arm[1:])):
            out.append(f"per-arm sizes must be strictly increasing, got {self.per_arm}")
        return out


def _round(x: float, rounding: str) -> int:
    # Snap away float noise like 36.00000000000001 before floor/ceil.
    x = round(x, 9)
    if rounding == "nearest":
        return int(math.floor(x + 0.5))
    if rounding == "floor":
        return int(math.floor(x))
    if rounding == "ceil":
        return int(math.ceil(x))
    raise ConfigError(f"unknown rounding {rounding!r}")


def build_schedule(
    n_total: int, fractions: Sequence[float], rounding: str = "nearest"
) -> AnalysisSchedule:
    """Place interim analyses at the given fractions of the total enrolment.

    ``fractions`` lists the interim looks only; the final analysis at the full
    sample size is appended. Per-arm interim sizes are rounded with
    ``rounding`` (``nearest`` rounds halves up).

    >>> build_schedule(368, (0.2, 0.4, 0.6, 0.8)).per_arm
    (37, 74, 110, 147, 184)
    """
    if n_total <= 0 or n_total % 2:
        raise ConfigError(f"n_total must be a positive even number, got {n_total!r}")
    fr = [float(f) for f in fractions]
    if any(not 0.0 < f < 1.0 for f in fr):
        raise ConfigError(f"interim fractions must lie strictly inside (0, 1), got {fr}")
    if any(b <= a for a, b in zip(fr, fr[1:])):
        raise ConfigError(f"interim fractions must be strictly increasing, got {fr}")
    arm = n_total // 2
    sizes = [_round(arm * f, rounding) for f in fr] + [arm]
    sched = AnalysisSchedule(tuple(sizes))
    problems = sched.problems()
    if problems:
        raise ConfigError(f"rounding produced an invalid schedule {sizes}: " + "; ".join(problems))
    return sched


@dataclass(frozen=True)
class PriorPair:
    control: BetaParams = BetaParams(1.0, 1.0)
    treatment: BetaParams = BetaParams(1.0, 1.0)


@dataclass(frozen=True)
class FixedPosterior:
    """Posterior superiority probability above ``p`` at every analysis."""

    p: float

    def label(self) -> str:
        return f"({self.p:.4f})"


@dataclass(frozen=True)
class TwoPhasePosterior:
    """Posterior rule with threshold ``p_early`` while t < ``t_star``, ``p_late`` after."""

    p_early: float
    p_late: float
    t_star: float = 0.5

    def label(self) -> str:
        return f"({self.p_early:.4f}, {self.p_late:.4f})"


@dataclass(frozen=True)
class PredictiveHybrid:
    """Predictive probability of final success above ``q_interim`` at interims;
    posterior probability above ``p_final`` at the final analysis."""

    p_final: float
    q_interim: float

    def label(self) -> str:
        return f"({self.p_final:.4f}, {self.q_interim:.4f})"


@dataclass(frozen=True)
class ZBoundary:
    """Frequentist critical values applied to the pooled two-proportion z-test."""

    critical_z: tuple

    def __post_init__(self):
        object.__setattr__(self, "critical_z", tuple(float(c) for c in self.critical_z))

    def label(self) -> str:
        return "(" + ", ".join(f"{c:.4f}" for c in self.critical_z) + ")"


DecisionRule = Union[FixedPosterior, TwoPhasePosterior, PredictiveHybrid, ZBoundary]


@dataclass(frozen=True)
class DesignSpec:
    schedule: AnalysisSchedule
    rule: DecisionRule
    priors: PriorPair = field(default_factory=PriorPair)


def _threshold_ok(v) -> bool:
    return isinstance(v, (int, float)) and 0.0 < v < 1.0


def validate(spec: DesignSpec) -> list:
    """Return every invariant violation of ``spec``; an empty list means valid."""
    out = list(spec.schedule.problems())
    rule = spec.rule
    if isinstance(rule, FixedPosterior):
        if not _threshold_ok(rule.p):
            out.append(f"threshold p must lie in (0, 1), got {rule.p!r}")
    elif isinstance(rule, TwoPhasePosterior):
        for name in ("p_early", "p_late"):
            if not _threshold_ok(getattr(rule, name)):
                out.append(f"threshold {name} must lie in (0, 1), got {getattr(rule, name)!r}")
        if not 0.0 < rule.t_star <= 1.0:
            out.append(f"t_star must lie in (0, 1], got {rule.t_star!r}")
        if rule.p_late > rule.p_early:
            out.append(
                f"two-phase rule requires p_late <= p_early, got p_late={rule.p_late} > p_early={rule.p_early}"
            )
    elif isinstance(rule, PredictiveHybrid):
        if not _threshold_ok(rule.p_final):
            out.append(f"threshold p_final must lie in (0, 1), got {rule.p_final!r}")
        if not _threshold_ok(rule.q_interim):
            out.append(f"threshold q_interim must lie in (0, 1), got {rule.q_interim!r}")
    elif isinstance(rule, ZBoundary):
        if len(rule.critical_z) != spec.schedule.n_looks:
            out.append(
                f"need one critical value per analysis ({spec.schedule.n_looks}), got {len(rule.critical_z)}"
            )
        if any(math.isnan(c) for c in rule.critical_z):
            out.append("critical values must not be NaN")
    else:
        out.append(f"unsupported decision rule {type(rule).__name__}")
    return out


@dataclass(frozen=True)
class SpendingProfile:
    """Cumulative efficacy-stopping probability against information fraction."""

    info_fractions: tuple
    cumulative: tuple
    label: str = ""

    @property
    def points(self) -> list:
        return list(zip(self.info_fractions, self.cumulative))


@dataclass
class OperatingCharacteristics:
    """Exact stage-wise results of one design under one truth point."""

    stage_stop_prob: np.ndarray
    expected_n_total: float
    truth: TruthPoint
    info_fractions: tuple
    mass_error: float = 0.0

    @property
    def reject_prob(self) -> float:
        return float(np.sum(self.stage_stop_prob))

    @property
    def early_stop_prob(self) -> float:
        return float(np.sum(self.stage_stop_prob[:-1]))

    @property
    def cumulative_profile(self) -> SpendingProfile:
        return SpendingProfile(
            tuple(self.info_fractions),
            tuple(float(c) for c in np.cumsum(self.stage_stop_prob)),
            self.truth.label,
        )
