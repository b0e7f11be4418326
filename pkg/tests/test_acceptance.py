"""Acceptance criteria, each checked at its stated tolerance.

Every test records one PASS/FAIL line (printed in the terminal summary) and
then asserts. Tolerances are never widened to make a check pass.
"""

import os
import time

import numpy as np
import pytest

from bayesgsd.boundary import compile_design
from bayesgsd.calibrate import (
    GridSweep,
    evaluate_design,
    select_strategy1,
    select_strategy2,
    sweep_strategy1,
    sweep_strategy2,
)
from bayesgsd.design import (
    HYPRESS,
    DesignSpec,
    FixedPosterior,
    TwoPhasePosterior,
    build_schedule,
)
from bayesgsd.frequentist import design_for, size_frequentist, spend
from bayesgsd.oc import evaluate
from bayesgsd.simulate import simulate

from conftest import ACCEPTANCE_LINES
from enumeration import enumerate_paths
from reference_values import (
    PREDICTIVE_ROWS,
    TWO_INTERIM_FIRST_LOOK_NULL,
    TWO_INTERIM_FIRST_LOOK_POWER,
    TWO_INTERIM_ROWS,
    TWO_PHASE_ROWS,
)
from test_oc import RANDOM_DESIGNS

FOUR_INTERIM = (0.2, 0.4, 0.6, 0.8)
TWO_INTERIM = (1 / 3, 2 / 3)
WORKERS = min(8, os.cpu_count() or 1)
GRID_STEP = 0.0005


class Checks:
    """Collects named comparisons; the criterion passes only if all do."""

    def __init__(self, number, title):
        self.number, self.title = number, title
        self.failures, self.count = [], 0

    def near(self, name, got, want, tol):
        self.count += 1
        if not abs(got - want) <= tol:
            self.failures.append(f"{name}={got:.6g} (want {want} +- {tol})")

    def true(self, name, ok, detail=""):
        self.count += 1
        if not ok:
            self.failures.append(f"{name} {detail}".strip())

    def finish(self):
        status = "PASS" if not self.failures else "FAIL"
        line = f"criterion {self.number} {status}: {self.title} ({self.count - len(self.failures)}/{self.count} checks)"
        if self.failures:
            line += " | " + "; ".join(self.failures)
        ACCEPTANCE_LINES[self.number] = line
        print(line)
        assert not self.failures, line


def _row(n_total, fractions, rule, rounding="nearest"):
    spec = DesignSpec(build_schedule(n_total, fractions, rounding), rule)
    b = compile_design(spec)
    return evaluate_design(spec, b, HYPRESS), spec, b


@pytest.fixture(scope="module")
def s2_selection(tmp_path_factory):
    start = time.perf_counter()
    sweep = sweep_strategy2(
        HYPRESS, build_schedule(368, FOUR_INTERIM), (0.975, 0.992), (0.825, 0.992), GRID_STEP, threads=WORKERS
    )
    elapsed = time.perf_counter() - start
    path = tmp_path_factory.mktemp("s2") / "sweep.csv"
    sweep.save(path)
    reloaded = GridSweep.load(path, sweep.axis1_name, sweep.axis2_name)
    return sweep, reloaded, select_strategy2(sweep, 0.025), elapsed


def test_criterion_1_conventional_two_interim():
    c = Checks(1, "conventional two-interim design (n=356, p=0.9890)")
    _, n_total, alpha, power, en0, en1 = TWO_INTERIM_ROWS[0]
    start = time.perf_counter()
    row, _, _ = _row(n_total, TWO_INTERIM, FixedPosterior(0.9890))
    elapsed = time.perf_counter() - start
    c.near("alpha", row["alpha"], alpha, 0.0010)
    c.near("power", row["power"], power, 0.005)
    c.near("E[N|H0]", row["e_n_null"], en0, 1.5)
    c.near("E[N|H1]", row["e_n_alt"], en1, 3.0)
    c.near("first-look null stop", row["stage_stop_null_1"], TWO_INTERIM_FIRST_LOOK_NULL, 0.0008)
    c.near("first-look power", row["stage_stop_alt_1"], TWO_INTERIM_FIRST_LOOK_POWER, 0.01)
    by_rounding = {
        r: _row(n_total, TWO_INTERIM, FixedPosterior(0.9890), r)[0]["alpha"] for r in ("nearest", "floor", "ceil")
    }
    best = min(by_rounding, key=lambda r: abs(by_rounding[r] - alpha))
    c.true(
        "some rounding matches alpha within 0.0003",
        abs(by_rounding[best] - alpha) <= 0.0003,
        "(" + ", ".join(f"{r}: {v:.5f}" for r, v in by_rounding.items()) + ")",
    )
    c.true("runtime < 5 s", elapsed < 5.0, f"({elapsed:.1f} s)")
    c.finish()


def test_criterion_2_four_interim_baseline():
    c = Checks(2, "four-interim baseline (n=368, p=0.9920)")
    (_, alpha, power, early0, early1, en0, en1) = TWO_PHASE_ROWS[-1]
    start = time.perf_counter()
    row, _, _ = _row(368, FOUR_INTERIM, FixedPosterior(0.9920))
    elapsed = time.perf_counter() - start
    c.near("alpha", row["alpha"], alpha, 0.002)
    c.near("power", row["power"], power, 0.002)
    c.near("Pr(early|H0)", row["early_stop_null"], early0, 0.002)
    c.near("Pr(early|H1)", row["early_stop_alt"], early1, 0.002)
    c.near("E[N|H0]", row["e_n_null"], en0, 2.0)
    c.near("E[N|H1]", row["e_n_alt"], en1, 2.0)
    c.true("runtime < 10 s", elapsed < 10.0, f"({elapsed:.1f} s)")
    c.finish()


@pytest.mark.slow
def test_criterion_3_strategy1_selection():
    c = Checks(3, "two-phase selection on the [0.980, 0.999] x 0.0005 grid")
    start = time.perf_counter()
    sweep = sweep_strategy1(
        HYPRESS, build_schedule(368, FOUR_INTERIM), (0.980, 0.999), GRID_STEP, 0.5, threads=WORKERS
    )
    selected = select_strategy1(sweep, 0.025, 0.80)
    elapsed = time.perf_counter() - start
    got = [(r.thresholds["p_early"], r.thresholds["p_late"]) for r in selected]
    want = [r[0] for r in TWO_PHASE_ROWS]
    c.true("nine rows", len(got) == 9, f"(got {len(got)})")
    c.true(
        "threshold pairs match",
        [tuple(round(v, 4) for v in g) for g in got] == want,
        f"(got {[tuple(round(v, 4) for v in g) for g in got]})",
    )
    by_pair = {tuple(round(v, 4) for v in (r.thresholds["p_early"], r.thresholds["p_late"])): r.row for r in selected}
    for pair, alpha, power, *_ in TWO_PHASE_ROWS:
        row = by_pair.get(pair)
        if row is None:
            c.true(f"row {pair} selected", False)
            continue
        c.near(f"{pair} alpha", row["alpha"], alpha, 0.0015)
        c.near(f"{pair} power", row["power"], power, 0.01)
    # Spot rows are evaluated directly so they are checked even if not selected.
    row, _, _ = _row(368, FOUR_INTERIM, TwoPhasePosterior(0.9982, 0.9880, 0.5))
    c.near("spot (0.9982, 0.9880) alpha", row["alpha"], 0.02495, 0.0015)
    c.near("spot (0.9982, 0.9880) power", row["power"], 0.83358, 0.01)
    row, _, _ = _row(368, FOUR_INTERIM, TwoPhasePosterior(0.9957, 0.9900, 0.5))
    c.near("spot (0.9957, 0.9900) power", row["power"], 0.81853, 0.01)
    c.true("runtime < 10 min", elapsed < 600, f"({elapsed:.0f} s)")
    c.finish()


@pytest.mark.slow
def test_criterion_4_strategy2_selection(s2_selection):
    c = Checks(4, "predictive-hybrid selection on the stated grid")
    sweep, reloaded, selected, elapsed = s2_selection
    by_p = {round(r.thresholds["p_final"], 4): r for r in selected}
    first, last = PREDICTIVE_ROWS[0], PREDICTIVE_ROWS[-1]
    for (p, q), alpha, power, _, early1, _, en1 in (first, last):
        r = by_p.get(p)
        if r is None:
            c.true(f"p={p} has a feasible q", False)
            continue
        c.near(f"p={p} q", r.thresholds["q_interim"], q, GRID_STEP / 2)
        c.near(f"p={p} alpha", r.row["alpha"], alpha, 0.0015)
        c.near(f"p={p} power", r.row["power"], power, 0.01)
        if (p, q) == first[0]:
            c.near(f"p={p} Pr(early|H1)", r.row["early_stop_alt"], early1, 0.01)
            c.near(f"p={p} E[N|H1]", r.row["e_n_alt"], en1, 2.0)
    within = sum(
        1
        for (p, q), *_ in PREDICTIVE_ROWS
        if p in by_p and abs(by_p[p].thresholds["q_interim"] - q) <= GRID_STEP + 1e-9
    )
    c.true(">= 28 of 33 q within one grid step", within >= 28, f"(got {within})")
    again = select_strategy2(reloaded, 0.025)
    c.true(
        "persisted sweep reloads to the same selection",
        [r.thresholds for r in again] == [r.thresholds for r in selected],
    )
    c.true("runtime < 2 h", elapsed < 7200, f"({elapsed:.0f} s)")
    c.finish()


def test_criterion_5_frequentist_comparators():
    c = Checks(5, "frequentist comparator sizing and spending")
    targets = {row[0]: row for row in TWO_INTERIM_ROWS[1:]}
    slack = {"haybittle_peto": 2, "pocock_like": 4, "obf_like": 2}
    for kind, (_, n_total, _, _, _, en1) in targets.items():
        r = size_frequentist(kind, HYPRESS, TWO_INTERIM)
        c.near(f"{kind} n_total", r.n_total, n_total, slack[kind])
        c.near(f"{kind} E[N|H1]", r.oc_alt.expected_n_total, en1, 0.02 * en1)
        c.near(f"{kind} total spend", r.design.cumulative_spend[-1], 0.025, 1e-6)
        c.near(f"{kind} realised alpha", r.oc_null.reject_prob, 0.025, 1e-6)
    hp = design_for("haybittle_peto", TWO_INTERIM + (1.0,), 0.025)
    obf = design_for("obf_like", TWO_INTERIM + (1.0,), 0.025)
    c.near("HP first-look spend", hp.cumulative_spend[0], 0.0013, 0.00005)
    c.true("OBF first-look spend <= 0.0002", obf.cumulative_spend[0] <= 0.0002, f"({obf.cumulative_spend[0]:.2e})")
    c.finish()


def test_criterion_6_exactness():
    c = Checks(6, "exactness properties")
    worst = 0.0
    compiled = []
    for spec, truth in RANDOM_DESIGNS:
        b = compile_design(spec)
        compiled.append(b)
        oc = evaluate(spec, b, truth)
        brute = enumerate_paths(spec.schedule.per_arm, b, truth.control_rate, truth.treatment_rate)
        worst = max(worst, float(np.max(np.abs(oc.stage_stop_prob - brute))))
    c.true("(a) recursion equals enumeration to 1e-12 on 50 designs", worst <= 1e-12, f"(max gap {worst:.2e})")

    base_spec = DesignSpec(build_schedule(368, FOUR_INTERIM), FixedPosterior(0.9920))
    base = compile_design(base_spec)
    compiled.append(base)
    mass = []
    for stream, truth in enumerate((HYPRESS.null(), HYPRESS.alternative())):
        exact = evaluate(base_spec, base, truth)
        mass.append(exact.mass_error)
        sim = simulate(base_spec, base, truth, 10**6, seed=20240101, workers=1, stream=stream)
        z = abs(sim.reject_freq - exact.reject_prob) / sim.se_reject
        c.true(f"(b) MC reject prob under {truth.label} within 3.5 SE", z <= 3.5, f"({z:.2f} SE)")
        z = abs(sim.mean_n_total - exact.expected_n_total) / sim.se_mean_n
        c.true(f"(b) MC E[N] under {truth.label} within 3.5 SE", z <= 3.5, f"({z:.2f} SE)")
        for k, (f, se, p) in enumerate(zip(sim.stage_stop_freq, sim.se_stage, exact.stage_stop_prob), start=1):
            c.true(f"(b) MC stage {k} under {truth.label} within 3.5 SE", abs(f - p) <= 3.5 * se)
    for spec, truth in RANDOM_DESIGNS:
        mass.append(evaluate(spec, compile_design(spec), truth).mass_error)
    c.true("(c) mass conserved to 1e-12", max(mass) <= 1e-12, f"(worst {max(mass):.2e})")
    c.true("(d) every compiled boundary is monotone", all(b.is_monotone() for b in compiled))
    sched = build_schedule(368, FOUR_INTERIM)
    same = all(
        compile_design(DesignSpec(sched, TwoPhasePosterior(p, p, t))) == compile_design(DesignSpec(sched, FixedPosterior(p)))
        for p in (0.975, 0.985, 0.992, 0.998)
        for t in (0.3, 0.5, 1.0)
    )
    c.true("(e) equal two-phase thresholds reproduce the fixed boundary", same)
    c.finish()


@pytest.mark.slow
def test_criterion_7_qualitative_orderings(s2_selection):
    c = Checks(7, "qualitative spending orderings")
    conv_row, conv_spec, _ = _row(356, TWO_INTERIM, FixedPosterior(0.9890))
    cum = np.cumsum([conv_row[f"stage_stop_null_{k}"] for k in (1, 2, 3)])
    pocock = [spend("pocock_like", 0.025, t) for t in conv_spec.schedule.info_fractions]
    gap = float(np.max(np.abs(cum - pocock)))
    c.true("conventional profile within 0.003 of the Pocock-type profile", gap <= 0.003, f"(max gap {gap:.4f})")

    base_row, _, _ = _row(368, FOUR_INTERIM, FixedPosterior(0.9920))
    _, _, selected, _ = s2_selection
    firsts = {round(r.thresholds["p_final"], 4): r.row["stage_stop_null_1"] for r in selected}
    c.true("some predictive-hybrid designs selected", bool(firsts))
    worse = [p for p, v in firsts.items() if not v < base_row["stage_stop_null_1"]]
    c.true(
        "every selection spends less at the first look than the conventional design",
        not worse,
        f"(conventional {base_row['stage_stop_null_1']:.5f}; not below at p={worse})",
    )
    obf_first = spend("obf_like", 0.025, FOUR_INTERIM[0])
    if firsts:
        most = min(firsts.values())
        c.true(
            "most conservative selection spends no more than OBF at the first look",
            most <= obf_first,
            f"({most:.2e} vs OBF {obf_first:.2e})",
        )
    c.finish()
