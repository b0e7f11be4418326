"""Beta and Beta-Binomial probability primitives.

Everything that accumulates many small terms works on the log scale and
combines with ``logsumexp``. Gamma, Beta and normal special functions are
taken from :mod:`scipy.special`.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, special

from .errors import DomainError, NumericalError

__all__ = [
    "BetaParams",
    "log_gamma",
    "beta_superiority_prob",
    "beta_binomial_pmf",
    "beta_binomial_logpmf",
    "beta_binomial_cdf",
    "regularized_incomplete_beta",
    "normal_cdf",
    "normal_quantile",
    "superiority_matrix",
]


@dataclass(frozen=True)
class BetaParams:
    """Shape parameters of a Beta distribution."""

    alpha: float
    beta: float

    def __post_init__(self):
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise DomainError(f"Beta {name} must be positive and finite, got {v!r}")

    def update(self, events: int, trials: int) -> "BetaParams":
        """Conjugate update after observing ``events`` out of ``trials``."""
        return BetaParams(self.alpha + events, self.beta + trials - events)

    @property
    def mean(self) -> float:
        return self.alpha / (self.alpha + self.beta)


def _is_int(x: float) -> bool:
    return float(x).is_integer()


def log_gamma(x: float) -> float:
    """Natural log of the Gamma function for positive finite ``x``."""
    x = float(x)
    if not (math.isfinite(x) and x > 0):
        raise DomainError(f"log_gamma requires a positive finite argument, got {x!r}")
    return float(special.gammaln(x))


def regularized_incomplete_beta(x: float, p: BetaParams) -> float:
    """CDF of ``Beta(p.alpha, p.beta)`` at ``x``."""
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"x must lie in [0, 1], got {x!r}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    val = float(special.betainc(p.alpha, p.beta, x))
    if not math.isfinite(val):
        raise NumericalError("incomplete beta evaluation overflowed", x=x, params=p)
    return val


def normal_cdf(z: float) -> float:
    return float(special.ndtr(z))


def normal_quantile(p: float) -> float:
    if not 0.0 < p < 1.0:
        raise DomainError(f"normal_quantile requires 0 < p < 1, got {p!r}")
    return float(special.ndtri(p))


def _superiority_sum(control: BetaParams, treatment: BetaParams) -> float:
    # P(X_t < X_c) as a finite sum over the (integer) control alpha.
    t = np.arange(int(control.alpha), dtype=float)
    bc = control.beta
    logs = (
        special.betaln(treatment.alpha + t, treatment.beta + bc)
        - np.log(bc + t)
        - special.betaln(1.0 + t, bc)
        - special.betaln(treatment.alpha, treatment.beta)
    )
    return float(min(1.0, math.exp(special.logsumexp(logs))))


def _quad(f, pieces, control, treatment, tol):
    total, err_total = 0.0, 0.0
    notes = []
    for lo, hi in pieces:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", integrate.IntegrationWarning)
            val, err = integrate.quad(f, lo, hi, epsabs=tol / 10, epsrel=tol / 10, limit=400)
        notes.extend(str(w.message) for w in caught)
        total += val
        err_total += err
    # Warnings alone are not fatal; the error estimate decides.
    if not math.isfinite(total) or err_total > tol:
        raise NumericalError(
            "quadrature did not reach the requested accuracy",
            control=control,
            treatment=treatment,
            error=err_total,
            warnings=notes,
        )
    return min(1.0, max(0.0, total))


def _superiority_quad(control: BetaParams, treatment: BetaParams) -> float:
    if control.alpha < 1.0 or control.beta < 1.0:
        # Singular control density: integrate on the control's probability
        # scale instead, where the integrand is bounded by 1.
        def on_u(u):
            return special.betainc(
                treatment.alpha, treatment.beta, special.betaincinv(control.alpha, control.beta, u)
            )

        cuts = (0.0, 1e-9, 1e-6, 1e-3, 0.5, 1 - 1e-3, 1 - 1e-6, 1 - 1e-9, 1.0)
        return _quad(on_u, tuple(zip(cuts, cuts[1:])), control, treatment, 1e-9)

    def integrand(x):
        return special.betainc(treatment.alpha, treatment.beta, x) * math.exp(
            (control.alpha - 1) * math.log(x)
            + (control.beta - 1) * math.log1p(-x)
            - special.betaln(control.alpha, control.beta)
        )

    # Split at the control mean so the bulk of the mass sits at an endpoint.
    mid = control.mean
    return _quad(integrand, ((0.0, mid), (mid, 1.0)), control, treatment, 1e-12)


def beta_superiority_prob(
    control: BetaParams, treatment: BetaParams, method: str = "auto"
) -> float:
    """Probability that the treatment rate is below the control rate.

    Both rates have independent Beta distributions. With an integer control
    alpha (always the case under a uniform prior) the probability is an exact
    finite sum; otherwise it is integrated numerically.

    Args:
        control: Beta distribution of the control-arm event rate.
        treatment: Beta distribution of the treatment-arm event rate.
        method: ``"auto"``, ``"sum"`` (requires integer control alpha) or
            ``"quad"``.
    """
    if method == "auto":
        method = "sum" if _is_int(control.alpha) else "quad"
    if method == "sum":
        if not _is_int(control.alpha):
            raise DomainError("the finite-sum route needs an integer control alpha")
        return _superiority_sum(control, treatment)
    if method == "quad":
        return _superiority_quad(control, treatment)
    raise ValueError(f"unknown method {method!r}")


def beta_binomial_logpmf(prior: BetaParams, m: int, x) -> np.ndarray:
    """Log pmf of the Beta-Binomial predictive for ``m`` future trials."""
    x = np.asarray(x, dtype=float)
    return (
        special.gammaln(m + 1.0)
        - special.gammaln(x + 1.0)
        - special.gammaln(m - x + 1.0)
        + special.betaln(prior.alpha + x, prior.beta + m - x)
        - special.betaln(prior.alpha, prior.beta)
    )


def beta_binomial_pmf(prior: BetaParams, m: int, x):
    """Beta-Binomial pmf; scalar in, scalar out."""
    xs = np.atleast_1d(np.asarray(x))
    if m < 0 or np.any(xs < 0) or np.any(xs > m) or np.any(xs != np.floor(xs)):
        raise DomainError(f"x must be an integer in [0, {m}], got {x!r}")
    out = np.exp(beta_binomial_logpmf(prior, m, xs))
    return float(out[0]) if np.ndim(x) == 0 else out


def beta_binomial_cdf(prior: BetaParams, m: int, x: int) -> float:
    """P(X <= x) for the Beta-Binomial predictive; total for any integer x."""
    if x < 0:
        return 0.0
    if x >= m:
        return 1.0
    pmf = np.exp(beta_binomial_logpmf(prior, m, np.arange(x + 1)))
    return float(min(1.0, pmf.sum()))


@lru_cache(maxsize=512)
def superiority_matrix(
    n: int, control_prior: BetaParams, treatment_prior: BetaParams
) -> np.ndarray:
    """Posterior superiority probabilities for every outcome with ``n`` per arm.

    Entry ``[i, j]`` is P(treatment rate < control rate) after ``i`` control
    and ``j`` treatment events. The returned array is read-only and shared.
    """
    size = n + 1
    j = np.arange(size, dtype=float)
    at = treatment_prior.alpha + j
    bt = treatment_prior.beta + n - j
    out = np.empty((size, size))
    if _is_int(control_prior.alpha):
        lb_t = special.betaln(at, bt)
        for i in range(size):
            ac = control_prior.alpha + i
            bc = control_prior.beta + n - i
            t = np.arange(int(ac), dtype=float)[:, None]
            logs = (
                special.betaln(at[None, :] + t, bt[None, :] + bc)
                - np.log(bc + t)
                - special.betaln(1.0 + t, bc)
                - lb_t[None, :]
            )
            out[i] = special.logsumexp(logs, axis=0)
        np.exp(out, out=out)
        np.minimum(out, 1.0, out=out)
    else:
        for i in range(size):
            c = control_prior.update(i, n)
            for jj in range(size):
                out[i, jj] = _superiority_quad(c, treatment_prior.update(jj, n))
    out.setflags(write=False)
    return out
