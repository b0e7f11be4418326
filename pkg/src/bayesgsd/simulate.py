"""Seeded Monte Carlo trial simulator, used to cross-check the exact engine.

Replicates are split into fixed-size blocks. Block ``b`` draws from its own
stream ``SeedSequence(seed, spawn_key=(stream, b))``, so the result depends on
``(spec, boundary, truth, replicates, seed, stream)`` only and the number of
workers changes nothing. Aggregation is by integer counts, so summation order cannot
matter either.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .boundary import StoppingBoundary
from .design import DesignSpec, TruthPoint
from .errors import ConfigError

__all__ = ["SimResult", "simulate", "BLOCK_SIZE"]

BLOCK_SIZE = 1 << 16


@dataclass(frozen=True)
class SimResult:
    stage_stop_freq: tuple
    reject_freq: float
    mean_n_total: float
    se_stage: tuple
    se_reject: float
    se_mean_n: float
    replicates: int
    seed: int

    @property
    def early_stop_freq(self) -> float:
        return float(sum(self.stage_stop_freq[:-1]))

    @property
    def se_early(self) -> float:
        return _se(self.early_stop_freq, self.replicates)


def _se(f: float, r: int) -> float:
    return math.sqrt(max(f * (1.0 - f), 0.0) / r)


def _block_counts(args):
    per_arm, bounds, rates, seed, stream, block, size = args
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream, block)))
    k_looks = len(per_arm)
    stop_stage = np.full(size, k_looks, dtype=np.int64)  # K means "never stopped"
    alive = np.ones(size, dtype=bool)
    i = np.zeros(size, dtype=np.int64)
    j = np.zeros(size, dtype=np.int64)
    prev = 0
    for k, n in enumerate(per_arm):
        m = n - prev
        # Draw for every replicate so the stream layout does not depend on outcomes.
        i += rng.binomial(m, rates[0], size)
        j += rng.binomial(m, rates[1], size)
        prev = n
        hit = alive & (j <= bounds[k][i])
        stop_stage[hit] = k
        alive &= ~hit
    counts = np.bincount(stop_stage, minlength=k_looks + 1)
    return counts


def simulate(
    spec: DesignSpec,
    boundary: StoppingBoundary,
    truth: TruthPoint,
    replicates: int,
    seed: int,
    workers: int = 1,
    stream: int = 0,
) -> SimResult:
    """Simulate ``replicates`` trials and tabulate where they stop.

    Args:
        spec: Design whose schedule is simulated.
        boundary: Compiled boundary for ``spec``.
        truth: Event rates used to draw outcomes.
        replicates: Number of simulated trials, at least one.
        seed: Master seed.
        workers: Processes used for the blocks; does not affect the result.
        stream: Independent sub-stream index, e.g. one per truth point.
    """
    if replicates < 1:
        raise ConfigError("replicates must be at least 1")
    per_arm = spec.schedule.per_arm
    if boundary.n_looks != len(per_arm):
        raise ConfigError("boundary does not match the design schedule")
    bounds = [np.asarray(b, dtype=np.int64) for b in boundary.per_stage]
    rates = (truth.control_rate, truth.treatment_rate)
    n_blocks = -(-replicates // BLOCK_SIZE)
    jobs = [
        (per_arm, bounds, rates, int(seed), int(stream), b, min(BLOCK_SIZE, replicates - b * BLOCK_SIZE))
        for b in range(n_blocks)
    ]
    if workers > 1 and n_blocks > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_block_counts, jobs))
    else:
        parts = [_block_counts(j) for j in jobs]
    counts = np.sum(parts, axis=0)
    k_looks = len(per_arm)
    freq = counts[:k_looks] / replicates
    totals = np.array(spec.schedule.totals, dtype=float)
    # Trials that never stop run to the final size.
    n_by_outcome = np.append(totals, totals[-1])
    mean_n = float(np.dot(counts, n_by_outcome) / replicates)
    var_n = float(np.dot(counts, (n_by_outcome - mean_n) ** 2) / replicates)
    reject = float(counts[:k_looks].sum() / replicates)
    return SimResult(
        stage_stop_freq=tuple(float(f) for f in freq),
        reject_freq=reject,
        mean_n_total=mean_n,
        se_stage=tuple(_se(float(f), replicates) for f in freq),
        se_reject=_se(reject, replicates),
        se_mean_n=math.sqrt(var_n / replicates),
        replicates=int(replicates),
        seed=int(seed),
    )
