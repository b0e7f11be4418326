"""Threshold grid sweeps and the selection rules built on them.

Sweeps evaluate every grid cell under the null and the alternative of a
scenario. Boundaries shared by neighbouring cells are evaluated once. A
sweep can be written to CSV and reloaded, so selection never needs a
recomputation.
"""

from __future__ import annotations

import csv
import io
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Optional, Sequence

import numpy as np

from .boundary import (
    StoppingBoundary,
    boundary_from_matrix,
    compile_design,
    posterior_boundary,
    predictive_matrix,
)
from .design import (
    AnalysisSchedule,
    DesignSpec,
    FixedPosterior,
    PredictiveHybrid,
    PriorPair,
    TrialScenario,
    TwoPhasePosterior,
    build_schedule,
)
from .errors import ConfigError, InfeasibleError
from .oc import evaluate, stagewise_report

log = logging.getLogger(__name__)

__all__ = [
    "threshold_grid",
    "SweepCell",
    "GridSweep",
    "CalibrationResult",
    "evaluate_design",
    "calibrate_baseline",
    "sweep_strategy1",
    "select_strategy1",
    "sweep_strategy2",
    "select_strategy2",
    "SWEEP_COLUMNS",
]

SWEEP_COLUMNS = [
    "p_axis1",
    "p_axis2",
    "alpha",
    "power",
    "e_n_null",
    "e_n_alt",
    "early_stop_null",
    "early_stop_alt",
    "skipped",
]


def threshold_grid(lo, hi, step) -> list:
    """Inclusive grid ``lo, lo + step, ..., hi`` built in decimal arithmetic."""
    lo, hi, step = (Decimal(str(v)) for v in (lo, hi, step))
    if step <= 0:
        raise ConfigError(f"grid step must be positive, got {step}")
    if hi < lo:
        return []
    count = int((hi - lo) / step) + 1
    return [float(lo + k * step) for k in range(count)]


@dataclass
class SweepCell:
    p_axis1: float
    p_axis2: float
    row: Optional[dict] = None

    @property
    def skipped(self) -> bool:
        return self.row is None


@dataclass
class GridSweep:
    """All cells of a two-threshold sweep, in row-major grid order."""

    axis1_name: str
    axis2_name: str
    axis1: list
    axis2: list
    cells: list

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for c in self.cells:
            if c.skipped:
                w.writerow([fmt(c.p_axis1), fmt(c.p_axis2)] + [""] * 6 + [1])
            else:
                r = c.row
                w.writerow(
                    [fmt(c.p_axis1), fmt(c.p_axis2)]
                    + [fmt(r[k]) for k in SWEEP_COLUMNS[2:8]]
                    + [0]
                )
        return buf.getvalue()

    def save(self, path) -> None:
        atomic_write(path, self.to_csv())

    @classmethod
    def load(cls, path, axis1_name: str = "p_axis1", axis2_name: str = "p_axis2") -> "GridSweep":
        """Read a sweep written by :meth:`save`; cell order is preserved."""
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != SWEEP_COLUMNS:
                raise ConfigError(f"{path} is not a persisted sweep (header {reader.fieldnames})")
            cells = []
            for rec in reader:
                p1, p2 = float(rec["p_axis1"]), float(rec["p_axis2"])
                if rec["skipped"] == "1":
                    cells.append(SweepCell(p1, p2))
                else:
                    cells.append(SweepCell(p1, p2, {k: float(rec[k]) for k in SWEEP_COLUMNS[2:8]}))
        axis1 = list(dict.fromkeys(c.p_axis1 for c in cells))
        axis2 = list(dict.fromkeys(c.p_axis2 for c in cells))
        return cls(axis1_name, axis2_name, sorted(axis1), sorted(axis2), cells)


def fmt(x) -> str:
    """Ten significant digits, the precision of every emitted number."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.10g}"


def atomic_write(path, text: str) -> None:
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


@dataclass
class CalibrationResult:
    thresholds: dict
    row: dict
    alpha_ok: bool
    power_ok: bool
    n_total: Optional[int] = None


def evaluate_design(spec: DesignSpec, boundary: StoppingBoundary, scenario: TrialScenario) -> dict:
    """Table row (see :func:`stagewise_report`) for one compiled design."""
    oc0 = evaluate(spec, boundary, scenario.null())
    oc1 = evaluate(spec, boundary, scenario.alternative())
    return stagewise_report(oc0, oc1, spec.rule.label())


# --- baseline sizing -------------------------------------------------------


def calibrate_baseline(
    scenario: TrialScenario,
    fractions: Sequence[float],
    n_range: Sequence[int],
    p_range: Sequence[float] = (0.975, 0.999),
    step: float = 0.0005,
    priors: PriorPair = PriorPair(),
    rounding: str = "nearest",
    trace: Optional[list] = None,
):
    """Smallest total sample size (and its threshold) for a fixed-threshold design.

    For each even ``n_total`` in ``n_range`` (ascending), the smallest grid
    threshold with type I error at most alpha is found by bisection, which is
    valid because raising the threshold can only shrink the stopping region.
    The first ``n_total`` whose threshold reaches the target power wins.

    Returns:
        ``(n_total, p, CalibrationResult)``.

    Every evaluated ``(n_total, p)`` cell is appended to ``trace`` when given.

    Raises:
        InfeasibleError: no pair in range qualifies; ``closest`` holds the
            feasible-alpha design with the highest power seen.
    """
    grid = threshold_grid(*p_range, step)
    if not grid:
        raise InfeasibleError("empty threshold range")
    lo_n, hi_n = int(n_range[0]), int(n_range[-1])
    closest = None
    for n_total in range(lo_n + (lo_n % 2), hi_n + 1, 2):
        sched = build_schedule(n_total, fractions, rounding)
        cache = {}

        def row_at(idx):
            if idx not in cache:
                spec = DesignSpec(sched, FixedPosterior(grid[idx]), priors)
                cache[idx] = evaluate_design(spec, compile_design(spec), scenario)
                if trace is not None:
                    trace.append(SweepCell(float(n_total), grid[idx], cache[idx]))
            return cache[idx]

        if row_at(len(grid) - 1)["alpha"] > scenario.one_sided_alpha:
            continue
        lo, hi = -1, len(grid) - 1  # invariant: grid[hi] feasible, grid[lo] not (or lo = -1)
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if row_at(mid)["alpha"] <= scenario.one_sided_alpha:
                hi = mid
            else:
                lo = mid
        row = row_at(hi)
        result = CalibrationResult(
            {"p": grid[hi]}, row, True, row["power"] >= scenario.target_power, n_total
        )
        log.debug("n_total=%d p=%.4f alpha=%.5f power=%.5f", n_total, grid[hi], row["alpha"], row["power"])
        if result.power_ok:
            return n_total, grid[hi], result
        if closest is None or row["power"] > closest.row["power"]:
            closest = result
    raise InfeasibleError("no sample size in range reaches the target power", closest)


# --- sweeps ----------------------------------------------------------------


def _pool_map(fn, tasks, threads: int):
    if threads <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=threads) as ex:
        # map() preserves task order, so the gather is deterministic.
        return list(ex.map(fn, tasks))


def _s1_column(task):
    schedule, priors, scenario, p_late, p_earlies, t_star = task
    out = []
    seen = {}
    for p_early in p_earlies:
        if p_late > p_early:
            out.append(None)
            continue
        spec = DesignSpec(schedule, TwoPhasePosterior(p_early, p_late, t_star), priors)
        b = compile_design(spec)
        key = b.key()
        if key not in seen:
            seen[key] = evaluate_design(spec, b, scenario)
        row = dict(seen[key])
        row["rule_params"] = spec.rule.label()
        out.append(row)
    return out


def sweep_strategy1(
    scenario: TrialScenario,
    schedule: AnalysisSchedule,
    p_range: Sequence[float] = (0.980, 0.999),
    step: float = 0.0005,
    t_star: float = 0.5,
    priors: PriorPair = PriorPair(),
    threads: int = 1,
    p_late_range: Optional[Sequence[float]] = None,
    p_early_step: Optional[float] = None,
) -> GridSweep:
    """Evaluate every (p_early, p_late) cell; cells with p_late > p_early are skipped.

    ``p_late_range`` and ``p_early_step`` default to ``p_range`` and ``step``.
    """
    if not 0.0 < t_star <= 1.0:
        raise ConfigError(f"t_star must lie in (0, 1], got {t_star!r}")
    p_earlies = threshold_grid(*p_range, p_early_step or step)
    p_lates = threshold_grid(*(p_late_range or p_range), step)
    tasks = [(schedule, priors, scenario, pl, p_earlies, t_star) for pl in p_lates]
    columns = _pool_map(_s1_column, tasks, threads)
    cells = [
        SweepCell(pe, pl, columns[b][a])
        for a, pe in enumerate(p_earlies)
        for b, pl in enumerate(p_lates)
    ]
    return GridSweep("p_early", "p_late", p_earlies, p_lates, cells)


def _select(sweep: GridSweep, nominal_alpha: float, power_floor: float, by_axis: int, names):
    """For each value on axis ``by_axis``, the smallest feasible value on the other axis."""
    groups: dict = {}
    for c in sweep.cells:
        fixed, free = (c.p_axis2, c.p_axis1) if by_axis == 2 else (c.p_axis1, c.p_axis2)
        groups.setdefault(fixed, []).append((free, c))
    out = []
    for fixed in sorted(groups):
        feasible = [
            (free, c) for free, c in groups[fixed] if not c.skipped and c.row["alpha"] <= nominal_alpha
        ]
        if not feasible:
            continue
        free, c = min(feasible, key=lambda fc: fc[0])
        if c.row["power"] < power_floor:
            continue
        assert c.row["alpha"] <= nominal_alpha
        out.append(
            CalibrationResult(
                {names[0]: c.p_axis1, names[1]: c.p_axis2}, dict(c.row), True, True
            )
        )
    return out


def select_strategy1(
    sweep: GridSweep, nominal_alpha: float = 0.025, power_floor: float = 0.80
) -> list:
    """Per late-phase threshold, the smallest alpha-feasible early-phase threshold.

    Rows below ``power_floor`` are dropped; output is sorted by ``p_late``.
    """
    return _select(sweep, nominal_alpha, power_floor, 2, ("p_early", "p_late"))


def _s2_row(task):
    schedule, priors, scenario, p_final, qs = task
    last = schedule.n_looks - 1
    final = posterior_boundary(schedule, priors, last, p_final)
    pps = [predictive_matrix(schedule, priors, k, final) for k in range(last)]
    seen = {}
    out = []
    for q in qs:
        stages = [boundary_from_matrix(pp, q) for pp in pps] + [final]
        b = StoppingBoundary(stages)
        spec = DesignSpec(schedule, PredictiveHybrid(p_final, q), priors)
        key = b.key()
        if key not in seen:
            seen[key] = evaluate_design(spec, b, scenario)
        row = dict(seen[key])
        row["rule_params"] = spec.rule.label()
        out.append(row)
    return out


def sweep_strategy2(
    scenario: TrialScenario,
    schedule: AnalysisSchedule,
    p_range: Sequence[float] = (0.975, 0.992),
    q_range: Sequence[float] = (0.825, 0.992),
    step: float = 0.0005,
    priors: PriorPair = PriorPair(),
    threads: int = 1,
    q_step: Optional[float] = None,
) -> GridSweep:
    """Evaluate every (p_final, q_interim) cell of the predictive-hybrid rule."""
    ps = threshold_grid(*p_range, step)
    qs = threshold_grid(*q_range, q_step or step)
    rows = _pool_map(_s2_row, [(schedule, priors, scenario, p, qs) for p in ps], threads)
    cells = [SweepCell(p, q, rows[a][b]) for a, p in enumerate(ps) for b, q in enumerate(qs)]
    return GridSweep("p_final", "q_interim", ps, qs, cells)


def select_strategy2(
    sweep: GridSweep, nominal_alpha: float = 0.025, power_floor: float = 0.0
) -> list:
    """Per final-analysis threshold, the smallest alpha-feasible interim predictive threshold."""
    return _select(sweep, nominal_alpha, power_floor, 1, ("p_final", "q_interim"))


def infeasible_axis_values(sweep: GridSweep, selected: list, by_axis: int) -> list:
    """Fixed-axis values for which no cell was selected."""
    name = sweep.axis2_name if by_axis == 2 else sweep.axis1_name
    chosen = {r.thresholds[name] for r in selected}
    axis = sweep.axis2 if by_axis == 2 else sweep.axis1
    return [v for v in axis if v not in chosen]
