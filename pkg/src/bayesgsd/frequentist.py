"""Frequentist group sequential comparators (efficacy boundaries only).

The sequence of z-statistics follows the canonical joint normal model: the
score ``S_k = Z_k sqrt(I_k)`` has independent increments with mean
``theta * dI`` and variance ``dI``. Crossing probabilities are computed by
carrying the sub-density of the continuing score from look to look on a
Gauss-Legendre grid spanning +-8 standard deviations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import optimize, special

from .design import OperatingCharacteristics, TrialScenario, TruthPoint
from .errors import DomainError, NumericalError

__all__ = [
    "SPENDING_KINDS",
    "FrequentistDesign",
    "spend",
    "solve_boundaries",
    "haybittle_peto",
    "design_for",
    "crossing_probabilities",
    "oc_normal",
    "information_per_arm",
    "size_frequentist",
    "FrequentistSizing",
    "fixed_sample_total",
    "required_drift",
]

SPENDING_KINDS = ("obf_like", "pocock_like", "haybittle_peto")
N_NODES = 512
WINDOW = 8.0
HP_INTERIM_Z = 3.0


def spend(kind: str, alpha: float, t: float) -> float:
    """Lan-DeMets cumulative alpha spent by information fraction ``t``."""
    if not 0.0 < alpha < 0.5:
        raise DomainError(f"alpha must lie in (0, 0.5), got {alpha!r}")
    if not 0.0 < t <= 1.0:
        raise DomainError(f"information fraction must lie in (0, 1], got {t!r}")
    if t == 1.0:
        return alpha
    if kind == "obf_like":
        return float(2.0 * special.ndtr(-special.ndtri(1.0 - alpha / 2.0) / math.sqrt(t)))
    if kind == "pocock_like":
        return float(alpha * math.log1p((math.e - 1.0) * t))
    raise DomainError(f"no spending function for kind {kind!r}")


@dataclass(frozen=True)
class FrequentistDesign:
    info_fractions: tuple
    critical_z: tuple
    cumulative_spend: tuple
    kind: str = "custom"

    @property
    def alpha(self) -> float:
        return self.cumulative_spend[-1]


def _gl(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


class _Recursion:
    """Look-by-look sub-density of the score for a fixed drift."""

    def __init__(self, info: Sequence[float], theta: float, n_nodes: int = N_NODES):
        self.info = np.asarray(info, dtype=float)
        self.theta = float(theta)
        self.x, self.w = _gl(n_nodes)
        self.nodes = None  # grid of the continuing score at the previous look
        self.dens = None  # density times quadrature weight at those nodes
        self.k = 0

    def cross_prob(self, c: float) -> float:
        """P(continue to look k and Z_k > c) for the current look."""
        ik = self.info[self.k]
        b = c * math.sqrt(ik)
        if self.k == 0:
            return float(special.ndtr((self.theta * ik - b) / math.sqrt(ik)))
        d = ik - self.info[self.k - 1]
        mean = self.nodes + self.theta * d
        return float(np.dot(self.dens, special.ndtr((mean - b) / math.sqrt(d))))

    def advance(self, c: float) -> None:
        """Condition on not crossing ``c`` at the current look and move on."""
        ik = self.info[self.k]
        sd = math.sqrt(ik)
        lo = self.theta * ik - WINDOW * sd
        hi = self.theta * ik + WINDOW * sd
        if math.isfinite(c):
            hi = min(hi, c * sd)
        if hi <= lo:
            self.nodes = np.array([lo])
            self.dens = np.array([0.0])
        else:
            half = 0.5 * (hi - lo)
            s = lo + half * (self.x + 1.0)
            wq = half * self.w
            if self.k == 0:
                f = np.exp(-0.5 * ((s - self.theta * ik) / sd) ** 2) / (sd * math.sqrt(2 * math.pi))
            else:
                d = ik - self.info[self.k - 1]
                sdd = math.sqrt(d)
                z = (s[:, None] - self.nodes[None, :] - self.theta * d) / sdd
                kern = np.exp(-0.5 * z * z) / (sdd * math.sqrt(2 * math.pi))
                f = kern @ self.dens
            self.nodes = s
            self.dens = f * wq
        self.k += 1


def _solve_look(rec: _Recursion, target: float) -> float:
    if target <= 0.0:
        return math.inf
    if rec.k == 0:
        ik = rec.info[0]
        return float(rec.theta * math.sqrt(ik) + special.ndtri(1.0 - target))
    cont = rec.cross_prob(-40.0)  # all surviving mass
    if target >= cont:
        raise NumericalError("spend increment exceeds the surviving probability", look=rec.k + 1, target=target)
    lo, hi = -10.0, 40.0
    c = optimize.brentq(lambda v: rec.cross_prob(v) - target, lo, hi, xtol=1e-12, rtol=1e-14, maxiter=200)
    if abs(rec.cross_prob(c) - target) > 1e-9:
        raise NumericalError("boundary root not found to tolerance", look=rec.k + 1)
    return float(c)


def solve_boundaries(
    info_fractions: Sequence[float], cumulative_spend: Sequence[float], kind: str = "custom", n_nodes: int = N_NODES
) -> FrequentistDesign:
    """Critical values that spend the given cumulative alpha at each look (zero drift)."""
    t = [float(v) for v in info_fractions]
    cum = [float(v) for v in cumulative_spend]
    if len(t) != len(cum):
        raise DomainError("need one cumulative spend per look")
    inc = np.diff([0.0] + cum)
    if np.any(inc < -1e-15):
        raise DomainError("cumulative spend must be nondecreasing")
    rec = _Recursion(t, 0.0, n_nodes)
    crit = []
    for k in range(len(t)):
        c = _solve_look(rec, max(inc[k], 0.0))
        crit.append(c)
        rec.advance(c)
    return FrequentistDesign(tuple(t), tuple(crit), tuple(cum), kind)


def crossing_probabilities(
    info: Sequence[float], critical_z: Sequence[float], theta: float = 0.0, n_nodes: int = N_NODES
) -> np.ndarray:
    """Probability of first crossing at each look for score drift ``theta``."""
    rec = _Recursion(info, theta, n_nodes)
    out = []
    for c in critical_z:
        out.append(0.0 if math.isinf(c) else rec.cross_prob(c))
        rec.advance(c)
    return np.array(out)


def haybittle_peto(info_fractions: Sequence[float], alpha: float, n_nodes: int = N_NODES) -> FrequentistDesign:
    """z = 3 at every interim, final critical value solved so the total is ``alpha``."""
    t = [float(v) for v in info_fractions]
    rec = _Recursion(t, 0.0, n_nodes)
    crit, cum, spent = [], [], 0.0
    for k in range(len(t) - 1):
        spent += rec.cross_prob(HP_INTERIM_Z)
        crit.append(HP_INTERIM_Z)
        cum.append(spent)
        rec.advance(HP_INTERIM_Z)
    c = _solve_look(rec, alpha - spent)
    crit.append(c)
    cum.append(alpha)
    return FrequentistDesign(tuple(t), tuple(crit), tuple(cum), "haybittle_peto")


def design_for(kind: str, info_fractions: Sequence[float], alpha: float, n_nodes: int = N_NODES) -> FrequentistDesign:
    if kind == "haybittle_peto":
        return haybittle_peto(info_fractions, alpha, n_nodes)
    cum = [spend(kind, alpha, t) for t in info_fractions]
    return solve_boundaries(info_fractions, cum, kind, n_nodes)


def information_per_arm(n_per_arm: float, control_rate: float, treatment_rate: float) -> float:
    """Fisher information for the rate difference with ``n_per_arm`` per arm (unpooled)."""
    return n_per_arm / (control_rate * (1 - control_rate) + treatment_rate * (1 - treatment_rate))


def oc_normal(
    design: FrequentistDesign,
    effect: float,
    info_max: float,
    n_total: float,
    truth: TruthPoint = None,
) -> OperatingCharacteristics:
    """Normal-approximation operating characteristics.

    The z-statistic at look k has mean ``effect * sqrt(t_k * info_max)``.
    """
    if info_max <= 0:
        raise DomainError("info_max must be positive")
    info = [t * info_max for t in design.info_fractions]
    stops = crossing_probabilities(info, design.critical_z, effect)
    early = stops[:-1]
    totals = [t * n_total for t in design.info_fractions]
    en = float(np.dot(totals[:-1], early) + n_total * (1 - early.sum()))
    if truth is None:
        truth = TruthPoint(0.5, 0.5, "custom")
    return OperatingCharacteristics(stops, en, truth, tuple(design.info_fractions))


@dataclass(frozen=True)
class FrequentistSizing:
    n_total: int
    n_continuous: float
    inflation_factor: float
    design: FrequentistDesign
    oc_null: OperatingCharacteristics
    oc_alt: OperatingCharacteristics


def fixed_sample_total(scenario: TrialScenario) -> float:
    """Unrounded total size of the single-look two-proportion z-test.

    Uses the pooled variance under the null for the critical value and the
    unpooled variance under the alternative.
    """
    th0, th1 = scenario.control_rate, scenario.treatment_rate_alt
    pbar = 0.5 * (th0 + th1)
    za = special.ndtri(1 - scenario.one_sided_alpha)
    zb = special.ndtri(scenario.target_power)
    root = za * math.sqrt(2 * pbar * (1 - pbar)) + zb * math.sqrt(th0 * (1 - th0) + th1 * (1 - th1))
    return 2.0 * (root / (th0 - th1)) ** 2


def required_drift(design: FrequentistDesign, power: float) -> float:
    """Drift ``eta = theta * sqrt(I_max)`` at which the design has the given power."""
    t = design.info_fractions

    def gap(eta):
        return crossing_probabilities([x * eta * eta for x in t], design.critical_z, 1.0).sum() - power

    return float(optimize.brentq(gap, 1e-6, 40.0, xtol=1e-12))


def size_frequentist(
    kind: str,
    scenario: TrialScenario,
    fractions: Sequence[float],
    convention: str = "inflation",
    n_max: int = 100000,
) -> FrequentistSizing:
    """Smallest even total sample size reaching the target power.

    ``fractions`` are the interim information fractions; the final look at
    ``t = 1`` is appended.

    Conventions:
        ``inflation``: the fixed-sample size of :func:`fixed_sample_total`
        times the design's inflation factor ``(eta / (z_alpha + z_beta))^2``,
        rounded up to an even number. Expected sizes use the unrounded size.
        ``unpooled``: information ``n / (th0 (1 - th0) + th1 (1 - th1))`` per
        arm, scanned over even totals.
    """
    t = tuple(float(f) for f in fractions) + (1.0,)
    design = design_for(kind, t, scenario.one_sided_alpha)
    th0, th1 = scenario.control_rate, scenario.treatment_rate_alt
    effect = th0 - th1
    power = scenario.target_power
    if not 0.0 < power < 1.0:
        raise DomainError("sizing needs a target power in (0, 1)")
    eta = required_drift(design, power)
    fixed_eta = special.ndtri(1 - scenario.one_sided_alpha) + special.ndtri(power)
    inflation = (eta / fixed_eta) ** 2
    if convention == "inflation":
        n_cont = fixed_sample_total(scenario) * inflation
        n_total = 2 * int(math.ceil(round(n_cont / 2, 9)))
        info_cont = (eta / effect) ** 2
    elif convention == "unpooled":
        var = th0 * (1 - th0) + th1 * (1 - th1)
        # Information needed is (eta / effect)^2; invert n / (2 var) for the total.
        n_cont = 2 * var * (eta / effect) ** 2
        n_total = 2 * int(math.ceil(round(n_cont / 2, 9)))
        info_cont = information_per_arm(n_cont / 2, th0, th1)
    else:
        raise DomainError(f"unknown sizing convention {convention!r}")
    if n_total > n_max:
        raise NumericalError("target power not reached below n_max", n_max=n_max)
    oc0 = oc_normal(design, 0.0, info_cont, n_cont, scenario.null())
    oc1 = oc_normal(design, effect, info_cont, n_cont, scenario.alternative())
    return FrequentistSizing(n_total, n_cont, inflation, design, oc0, oc1)
