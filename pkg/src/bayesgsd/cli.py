"""Command-line front end.

``bayesgsd evaluate|spending|calibrate|freq|simulate|print-config --config FILE``

Exit codes: 0 success, 2 configuration error, 3 infeasible calibration,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .boundary import compile_design
from .calibrate import (
    GridSweep,
    atomic_write,
    calibrate_baseline,
    evaluate_design,
    fmt,
    infeasible_axis_values,
    select_strategy1,
    select_strategy2,
    sweep_strategy1,
    sweep_strategy2,
)
from .design import FixedPosterior, PredictiveHybrid, TwoPhasePosterior
from .errors import ConfigError, DomainError, InfeasibleError, NumericalError
from .frequentist import SPENDING_KINDS, crossing_probabilities, design_for, required_drift, size_frequentist
from .oc import evaluate
from .simulate import simulate

log = logging.getLogger("bayesgsd")

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_NUMERICAL = 0, 2, 3, 4

OC_BASE = ["rule_params", "alpha", "power", "early_stop_null", "early_stop_alt", "e_n_null", "e_n_alt"]
TABLE_METRICS = OC_BASE[1:]


def oc_columns(k_looks: int) -> list:
    return (
        OC_BASE
        + [f"stage_stop_null_{k}" for k in range(1, k_looks + 1)]
        + [f"stage_stop_alt_{k}" for k in range(1, k_looks + 1)]
    )


# --- output ----------------------------------------------------------------


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    return fmt(v)


def _json_value(v):
    if v is None or isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return int(v)
    return float(fmt(v))


def write_table(out_dir: Path, stem: str, columns: list, rows: list, formats) -> list:
    """Write ``rows`` (dicts) as ``stem.csv`` and/or ``stem.json``; return the paths."""
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if "csv" in formats:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_cell(r.get(c)) for c in columns])
        path = out_dir / f"{stem}.csv"
        atomic_write(path, buf.getvalue())
        written.append(path)
    if "json" in formats:
        data = [{c: _json_value(r.get(c)) for c in columns} for r in rows]
        path = out_dir / f"{stem}.json"
        atomic_write(path, json.dumps(data, indent=2) + "\n")
        written.append(path)
    return written


def _formats(name: str) -> tuple:
    return {"csv": ("csv",), "json": ("json",), "both": ("csv", "json")}[name]


# --- commands --------------------------------------------------------------


def _design_id(rule) -> str:
    prefix = {
        FixedPosterior: "fixed",
        TwoPhasePosterior: "two_phase",
        PredictiveHybrid: "predictive",
    }.get(type(rule), "z")
    return prefix + rule.label().replace(" ", "")


def _need_rules(cfg):
    specs = cfg.design_specs()
    if not specs:
        raise ConfigError("config defines no [[rule]]")
    return specs


def cmd_evaluate(cfg, args) -> int:
    scenario = cfg.trial_scenario()
    rows = []
    specs = _need_rules(cfg)
    for spec in specs:
        rows.append(evaluate_design(spec, compile_design(spec), scenario))
    cols = oc_columns(specs[0].schedule.n_looks)
    write_table(args.out, "oc", cols, rows, args.formats)
    return EXIT_OK


def _comparator_rows(kind, fractions, scenario, truths):
    t = tuple(fractions) + (1.0,)
    design = design_for(kind, t, scenario.one_sided_alpha)
    rows = []
    for label in truths:
        if label == "null":
            stops = crossing_probabilities(t, design.critical_z, 0.0)
        else:
            eta = required_drift(design, scenario.target_power)
            stops = crossing_probabilities([x * eta * eta for x in t], design.critical_z, 1.0)
        for tf, c in zip(t, np.cumsum(stops)):
            rows.append({"design_id": kind, "info_fraction": tf, "cumulative_prob": c, "truth_label": label})
    return rows


def cmd_spending(cfg, args) -> int:
    scenario = cfg.trial_scenario()
    truth = args.truth or cfg.spending.get("truth", "null")
    truths = ("null", "alternative") if truth == "both" else (truth,)
    if any(t not in ("null", "alternative") for t in truths):
        raise ConfigError(f"truth must be null, alternative or both, got {truth!r}")
    comparators = args.comparators if args.comparators is not None else cfg.spending.get("comparators", [])
    for kind in comparators:
        if kind not in SPENDING_KINDS:
            raise ConfigError(f"unknown comparator {kind!r}")
    rows = []
    for spec in cfg.design_specs():
        b = compile_design(spec)
        for label in truths:
            point = scenario.null() if label == "null" else scenario.alternative()
            prof = evaluate(spec, b, point).cumulative_profile
            did = _design_id(spec.rule)
            for tf, c in prof.points:
                rows.append({"design_id": did, "info_fraction": tf, "cumulative_prob": c, "truth_label": label})
    for kind in comparators:
        rows.extend(_comparator_rows(kind, cfg.fractions(), scenario, truths))
    write_table(args.out, "spending", ["design_id", "info_fraction", "cumulative_prob", "truth_label"], rows, args.formats)
    return EXIT_OK


def _range(cfg, key, default):
    v = cfg.calibrate.get(key, default)
    if len(v) != 2:
        raise ConfigError(f"[calibrate] {key} must be [lo, hi]")
    return tuple(float(x) for x in v)


def _selection_rows(selected, names):
    rows = []
    for r in selected:
        row = {n: r.thresholds[n] for n in names}
        row.update({k: r.row[k] for k in TABLE_METRICS})
        rows.append(row)
    return rows


def cmd_calibrate(cfg, args) -> int:
    scenario = cfg.trial_scenario()
    strategy = args.strategy or cfg.calibrate.get("strategy")
    if strategy not in ("baseline", "s1", "s2"):
        raise ConfigError(f"calibration strategy must be baseline, s1 or s2, got {strategy!r}")
    out, formats = args.out, args.formats
    sweep_path = out / "sweep.csv"
    step = float(cfg.calibrate.get("step", 0.0005))

    if strategy == "baseline":
        n_range = cfg.calibrate.get("n_range")
        if not n_range or len(n_range) != 2:
            raise ConfigError("[calibrate] baseline needs n_range = [lo, hi]")
        trace = []
        try:
            n_total, p, res = calibrate_baseline(
                scenario, cfg.fractions(), [int(n_range[0]), int(n_range[1])],
                _range(cfg, "p_range", (0.975, 0.999)), step, cfg.priors(), cfg.rounding(), trace,
            )
        finally:
            out.mkdir(parents=True, exist_ok=True)
            GridSweep("n_total", "p", [], [], trace).save(sweep_path)
        row = {"n_total": n_total, "p": p, **{k: res.row[k] for k in TABLE_METRICS}}
        write_table(out, "selected", ["n_total", "p"] + TABLE_METRICS, [row], formats)
        return EXIT_OK

    floor_default = 0.80 if strategy == "s1" else 0.0
    power_floor = float(cfg.calibrate.get("power_floor", floor_default))
    names = ("p_early", "p_late") if strategy == "s1" else ("p_final", "q_interim")
    if args.resume and sweep_path.exists():
        sweep = GridSweep.load(sweep_path, *names)
        log.info("reusing persisted sweep %s", sweep_path)
    elif strategy == "s1":
        late = cfg.calibrate.get("p_late_range")
        sweep = sweep_strategy1(
            scenario, cfg.schedule(), _range(cfg, "p_range", (0.980, 0.999)), step,
            float(cfg.calibrate.get("t_star", 0.5)), cfg.priors(), args.threads,
            tuple(float(x) for x in late) if late else None,
            float(cfg.calibrate["p_early_step"]) if "p_early_step" in cfg.calibrate else None,
        )
    else:
        sweep = sweep_strategy2(
            scenario, cfg.schedule(), _range(cfg, "p_range", (0.975, 0.992)),
            _range(cfg, "q_range", (0.825, 0.992)), step, cfg.priors(), args.threads,
            float(cfg.calibrate["q_step"]) if "q_step" in cfg.calibrate else None,
        )
    if not sweep.cells:
        raise InfeasibleError("calibration grid is empty")
    out.mkdir(parents=True, exist_ok=True)
    if not (args.resume and sweep_path.exists()):
        sweep.save(sweep_path)
    if strategy == "s1":
        selected = select_strategy1(sweep, scenario.one_sided_alpha, power_floor)
    else:
        selected = select_strategy2(sweep, scenario.one_sided_alpha, power_floor)
    by_axis = 2 if strategy == "s1" else 1
    for v in infeasible_axis_values(sweep, selected, by_axis):
        log.warning("no feasible selection for %s = %s", names[by_axis - 1], fmt(v))
    write_table(out, "selected", list(names) + TABLE_METRICS, _selection_rows(selected, names), formats)
    if not selected:
        raise InfeasibleError("no grid cell meets the type I error and power constraints")
    return EXIT_OK


def cmd_freq(cfg, args) -> int:
    scenario = cfg.trial_scenario()
    kinds = [args.kind] if args.kind else cfg.freq.get("kinds", list(SPENDING_KINDS))
    convention = cfg.freq.get("convention", "inflation")
    rows, brows = [], []
    for kind in kinds:
        if kind not in SPENDING_KINDS:
            raise ConfigError(f"unknown kind {kind!r}")
        r = size_frequentist(kind, scenario, cfg.fractions(), convention)
        rows.append({
            "kind": kind,
            "n_total": r.n_total,
            "n_continuous": r.n_continuous,
            "inflation_factor": r.inflation_factor,
            "alpha": r.oc_null.reject_prob,
            "power": r.oc_alt.reject_prob,
            "early_stop_null": r.oc_null.early_stop_prob,
            "early_stop_alt": r.oc_alt.early_stop_prob,
            "e_n_null": r.oc_null.expected_n_total,
            "e_n_alt": r.oc_alt.expected_n_total,
            "first_look_spend": r.design.cumulative_spend[0],
        })
        d = r.design
        for k, (t, c, s) in enumerate(zip(d.info_fractions, d.critical_z, d.cumulative_spend), start=1):
            brows.append({"kind": kind, "look": k, "info_fraction": t, "critical_z": c, "cumulative_spend": s})
    write_table(args.out, "freq", list(rows[0]) if rows else ["kind"], rows, args.formats)
    write_table(args.out, "freq_boundary", ["kind", "look", "info_fraction", "critical_z", "cumulative_spend"], brows, args.formats)
    return EXIT_OK


def cmd_simulate(cfg, args) -> int:
    scenario = cfg.trial_scenario()
    reps = args.reps or int(cfg.simulate.get("replicates", 100000))
    seed = args.seed
    specs = _need_rules(cfg)
    k_looks = specs[0].schedule.n_looks
    base = oc_columns(k_looks)
    se_cols = ["se_" + c for c in base[1:]]
    rows = []
    for spec in specs:
        b = compile_design(spec)
        s0 = simulate(spec, b, scenario.null(), reps, seed, args.threads, stream=0)
        s1 = simulate(spec, b, scenario.alternative(), reps, seed, args.threads, stream=1)
        row = {
            "rule_params": spec.rule.label(),
            "alpha": s0.reject_freq, "power": s1.reject_freq,
            "early_stop_null": s0.early_stop_freq, "early_stop_alt": s1.early_stop_freq,
            "e_n_null": s0.mean_n_total, "e_n_alt": s1.mean_n_total,
            "se_alpha": s0.se_reject, "se_power": s1.se_reject,
            "se_early_stop_null": s0.se_early, "se_early_stop_alt": s1.se_early,
            "se_e_n_null": s0.se_mean_n, "se_e_n_alt": s1.se_mean_n,
            "replicates": reps, "seed": seed,
        }
        for k in range(k_looks):
            row[f"stage_stop_null_{k + 1}"] = s0.stage_stop_freq[k]
            row[f"stage_stop_alt_{k + 1}"] = s1.stage_stop_freq[k]
            row[f"se_stage_stop_null_{k + 1}"] = s0.se_stage[k]
            row[f"se_stage_stop_alt_{k + 1}"] = s1.se_stage[k]
        rows.append(row)
    write_table(args.out, "sim", base + se_cols + ["replicates", "seed"], rows, args.formats)
    return EXIT_OK


def cmd_print_config(cfg, args) -> int:
    sys.stdout.write(cfgmod.dumps(cfg))
    return EXIT_OK


COMMANDS = {
    "evaluate": cmd_evaluate,
    "spending": cmd_spending,
    "calibrate": cmd_calibrate,
    "freq": cmd_freq,
    "simulate": cmd_simulate,
    "print-config": cmd_print_config,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, type=Path, help="TOML run configuration")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--format", choices=("csv", "json", "both"))
    common.add_argument("--threads", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--rounding", choices=("nearest", "floor", "ceil"))
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="bayesgsd", description="Exact design and evaluation of Bayesian group sequential trials.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("evaluate", parents=[common], help="operating characteristics of each configured rule")
    sp = sub.add_parser("spending", parents=[common], help="cumulative stopping profiles")
    sp.add_argument("--truth", choices=("null", "alternative", "both"))
    sp.add_argument("--comparators", nargs="*", choices=SPENDING_KINDS)
    cp = sub.add_parser("calibrate", parents=[common], help="threshold sweeps and selection")
    cp.add_argument("--strategy", choices=("baseline", "s1", "s2"))
    cp.add_argument("--resume", action="store_true", help="reuse OUT/sweep.csv when present")
    fp = sub.add_parser("freq", parents=[common], help="frequentist comparator sizing and boundaries")
    fp.add_argument("--kind", choices=SPENDING_KINDS)
    mp = sub.add_parser("simulate", parents=[common], help="Monte Carlo check of each configured rule")
    mp.add_argument("--reps", type=int)
    sub.add_parser("print-config", parents=[common], help="echo the effective configuration")
    return p


def _apply_overrides(cfg, args):
    for name in ("out", "format", "threads", "seed"):
        v = getattr(args, name)
        if v is not None:
            cfg.options[name] = str(v) if name == "out" else v
    if args.rounding is not None:
        cfg.design["rounding"] = args.rounding
    args.out = Path(cfg.option("out"))
    args.formats = _formats(cfg.option("format"))
    args.threads = int(cfg.option("threads"))
    args.seed = int(cfg.option("seed"))
    if args.threads < 1:
        raise ConfigError("--threads must be at least 1")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = cfgmod.load(args.config)
        _apply_overrides(cfg, args)
        cfg = cfgmod.loads(cfgmod.dumps(cfg))  # re-validate after overrides
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, DomainError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
