"""Compile decision rules into integer stopping boundaries.

A boundary for analysis k is a vector ``b`` of length ``n_k + 1``: with ``i``
control events the trial stops for efficacy when the treatment arm has
``j <= b[i]`` events. ``-1`` means no outcome stops.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field

import numpy as np

from .design import (
    AnalysisSchedule,
    DesignSpec,
    FixedPosterior,
    PredictiveHybrid,
    PriorPair,
    TwoPhasePosterior,
    ZBoundary,
    validate,
)
from .errors import ConfigError, NumericalError
from .kernel import beta_binomial_logpmf, superiority_matrix

log = logging.getLogger(__name__)

__all__ = [
    "StoppingBoundary",
    "posterior_matrix",
    "predictive_matrix",
    "boundary_from_matrix",
    "posterior_boundary",
    "predictive_boundary",
    "two_phase_boundary",
    "z_statistic_matrix",
    "z_to_event_boundary",
    "compile_design",
]


@dataclass
class StoppingBoundary:
    per_stage: list
    diagnostics: list = field(default_factory=list)

    def __post_init__(self):
        self.per_stage = [np.asarray(b, dtype=np.int64) for b in self.per_stage]

    @property
    def n_looks(self) -> int:
        return len(self.per_stage)

    def __eq__(self, other):
        if not isinstance(other, StoppingBoundary):
            return NotImplemented
        return self.n_looks == other.n_looks and all(
            np.array_equal(a, b) for a, b in zip(self.per_stage, other.per_stage)
        )

    def key(self) -> bytes:
        """Hashable fingerprint, used to skip re-evaluating identical boundaries."""
        return b"|".join(b.tobytes() for b in self.per_stage)

    def is_monotone(self) -> bool:
        return all(np.all(np.diff(b) >= 0) for b in self.per_stage)

    def never_stops(self) -> bool:
        return all(np.all(b < 0) for b in self.per_stage)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["stage", "i", "j_star"])
        for k, b in enumerate(self.per_stage, start=1):
            for i, j in enumerate(b):
                w.writerow([k, i, int(j)])
        return buf.getvalue()


def posterior_matrix(n: int, priors: PriorPair) -> np.ndarray:
    """P(treatment rate < control rate | i, j) for all outcomes with ``n`` per arm."""
    return superiority_matrix(int(n), priors.control, priors.treatment)


def boundary_from_matrix(
    prob: np.ndarray, threshold: float, method: str = "bisect", diagnostics=None
) -> np.ndarray:
    """Largest ``j`` per row with ``prob[i, j] > threshold``, or -1.

    ``bisect`` binary-searches each row after checking that the entries above
    the threshold form a prefix ``0..b``; rows that fail the check (and
    ``method="scan"``) use a full scan.
    """
    size_j = prob.shape[1]
    above = prob > threshold
    scan = np.where(above.any(axis=1), size_j - 1 - np.argmax(above[:, ::-1], axis=1), -1)
    if method == "scan":
        return scan.astype(np.int64)
    if method != "bisect":
        raise ValueError(f"unknown method {method!r}")
    out = np.empty(prob.shape[0], dtype=np.int64)
    for i, row in enumerate(prob):
        prefix = above[i]
        # The stop set must be {0..b[i]}; a gap means the criterion is not monotone in j.
        count = int(prefix.sum())
        if not prefix[:count].all():
            msg = f"criterion not monotone in j at row i={i}; using scan"
            log.warning(msg)
            if diagnostics is not None:
                diagnostics.append(msg)
            out[i] = scan[i]
            continue
        out[i] = np.searchsorted(-row, -threshold, side="left") - 1
    return out


def posterior_boundary(
    schedule: AnalysisSchedule,
    priors: PriorPair,
    stage: int,
    threshold: float,
    method: str = "bisect",
    diagnostics=None,
) -> np.ndarray:
    """Boundary of the posterior-probability criterion at ``stage`` (0-based)."""
    if not 0.0 < threshold < 1.0:
        raise ConfigError(f"threshold must lie in (0, 1), got {threshold!r}")
    prob = posterior_matrix(schedule.per_arm[stage], priors)
    return boundary_from_matrix(prob, threshold, method, diagnostics)


def predictive_matrix(
    schedule: AnalysisSchedule, priors: PriorPair, stage: int, final_boundary
) -> np.ndarray:
    """Predictive probability of final-analysis success from every outcome at ``stage``.

    Future control and treatment events follow independent Beta-Binomial
    predictives for the ``m = n_K - n_k`` patients per arm still to come; the
    final analysis succeeds when the treatment total is at most the final
    boundary at the control total.
    """
    n = schedule.per_arm[stage]
    n_final = schedule.per_arm[-1]
    m = n_final - n
    final_boundary = np.asarray(final_boundary, dtype=np.int64)
    if final_boundary.shape != (n_final + 1,):
        raise ConfigError("final boundary length does not match the final sample size")
    idx = np.arange(n + 1)
    if m == 0:
        return (idx[None, :] <= final_boundary[:, None]).astype(float)

    dx = np.arange(m + 1, dtype=float)
    # Control predictive pmf, placed on a band: ctrl[i, i + d] = P(d future events).
    ctrl = np.zeros((n + 1, n_final + 1))
    for i in range(n + 1):
        post = priors.control.update(i, n)
        ctrl[i, i : i + m + 1] = np.exp(beta_binomial_logpmf(post, m, dx))
    # Treatment predictive cdf with a leading zero column for "x = -1".
    trt_cdf = np.zeros((n + 1, m + 2))
    for j in range(n + 1):
        post = priors.treatment.update(j, n)
        trt_cdf[j, 1:] = np.minimum(np.cumsum(np.exp(beta_binomial_logpmf(post, m, dx))), 1.0)
    trt_cdf[:, -1] = 1.0
    # need[s, j]: largest number of future treatment events still allowing success.
    need = np.clip(final_boundary[:, None] - idx[None, :], -1, m)
    success = trt_cdf[idx[None, :], need + 1]
    return np.clip(ctrl @ success, 0.0, 1.0)


def predictive_boundary(
    schedule: AnalysisSchedule,
    priors: PriorPair,
    stage: int,
    p_final: float,
    q: float,
    final_boundary=None,
    method: str = "bisect",
    diagnostics=None,
) -> np.ndarray:
    """Boundary of the predictive-probability criterion at ``stage``."""
    if not 0.0 < q < 1.0:
        raise ConfigError(f"predictive threshold must lie in (0, 1), got {q!r}")
    if final_boundary is None:
        final_boundary = posterior_boundary(schedule, priors, schedule.n_looks - 1, p_final)
    pp = predictive_matrix(schedule, priors, stage, final_boundary)
    return boundary_from_matrix(pp, q, method, diagnostics)


def _in_early_phase(t: float, t_star: float) -> bool:
    return t < t_star and not np.isclose(t, t_star, rtol=0, atol=1e-12)


def two_phase_boundary(
    schedule: AnalysisSchedule,
    priors: PriorPair,
    p_early: float,
    p_late: float,
    t_star: float,
    method: str = "bisect",
    diagnostics=None,
) -> StoppingBoundary:
    if p_late > p_early:
        raise ConfigError(f"p_late ({p_late}) must not exceed p_early ({p_early})")
    diag = [] if diagnostics is None else diagnostics
    stages = []
    for k, t in enumerate(schedule.info_fractions):
        p = p_early if _in_early_phase(t, t_star) else p_late
        stages.append(posterior_boundary(schedule, priors, k, p, method, diag))
    return StoppingBoundary(stages, diag)


def z_statistic_matrix(n: int) -> np.ndarray:
    """Pooled two-proportion z for treatment minus control, ``nan`` when degenerate."""
    i = np.arange(n + 1, dtype=float)[:, None]
    j = np.arange(n + 1, dtype=float)[None, :]
    pooled = (i + j) / (2.0 * n)
    se = np.sqrt(pooled * (1.0 - pooled) * 2.0 / n)
    with np.errstate(invalid="ignore", divide="ignore"):
        z = (j - i) / n / se
    z[se == 0] = np.nan
    return z


def z_to_event_boundary(
    schedule: AnalysisSchedule, critical_z, diagnostics=None
) -> StoppingBoundary:
    """Map z critical values to event boundaries: stop when z <= -c_k."""
    if len(critical_z) != schedule.n_looks:
        raise ConfigError("need one critical value per analysis")
    diag = [] if diagnostics is None else diagnostics
    stages = []
    for n, c in zip(schedule.per_arm, critical_z):
        z = z_statistic_matrix(n)
        with np.errstate(invalid="ignore"):
            stop = np.nan_to_num(-z, nan=-np.inf) >= c
        # Reuse the threshold search on the 0/1 stop indicator.
        stages.append(boundary_from_matrix(stop.astype(float), 0.5, "bisect", diag))
    return StoppingBoundary(stages, diag)


def compile_design(spec: DesignSpec, method: str = "bisect") -> StoppingBoundary:
    """Compile ``spec.rule`` into a full set of stopping boundaries."""
    problems = validate(spec)
    if problems:
        raise ConfigError("invalid design: " + "; ".join(problems))
    sched, priors, rule = spec.schedule, spec.priors, spec.rule
    diag: list = []
    last = sched.n_looks - 1
    if isinstance(rule, FixedPosterior):
        b = StoppingBoundary(
            [posterior_boundary(sched, priors, k, rule.p, method, diag) for k in range(sched.n_looks)],
            diag,
        )
    elif isinstance(rule, TwoPhasePosterior):
        b = two_phase_boundary(sched, priors, rule.p_early, rule.p_late, rule.t_star, method, diag)
    elif isinstance(rule, PredictiveHybrid):
        final = posterior_boundary(sched, priors, last, rule.p_final, method, diag)
        stages = [
            predictive_boundary(sched, priors, k, rule.p_final, rule.q_interim, final, method, diag)
            for k in range(last)
        ]
        b = StoppingBoundary(stages + [final], diag)
    elif isinstance(rule, ZBoundary):
        b = z_to_event_boundary(sched, rule.critical_z, diag)
    else:  # pragma: no cover - validate() rejects this first
        raise ConfigError(f"unsupported rule {rule!r}")
    if not b.is_monotone():
        raise NumericalError("compiled boundary is not monotone in control events", rule=rule)
    return b
