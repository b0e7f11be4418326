"""TOML run configuration: scenario, design and rule blocks plus command options.

All non-integer numbers are parsed as :class:`decimal.Decimal` so a config
echoed with :func:`dumps` re-parses to an identical :class:`RunConfig`.
Conversion to floats happens only when domain objects are built.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path

import tomli
import tomli_w

from .design import (
    DesignSpec,
    FixedPosterior,
    PredictiveHybrid,
    PriorPair,
    TrialScenario,
    TwoPhasePosterior,
    ZBoundary,
    build_schedule,
    validate,
)
from .errors import ConfigError, DomainError
from .kernel import BetaParams

__all__ = ["RunConfig", "loads", "load", "dumps", "RULE_TYPES"]

RULE_TYPES = {
    "fixed": ("p",),
    "two_phase": ("p_early", "p_late", "t_star"),
    "predictive": ("p_final", "q_interim"),
    "z": ("critical_z",),
}

_SCENARIO_KEYS = ("control_rate", "treatment_rate_alt", "one_sided_alpha", "target_power")
_DESIGN_KEYS = ("n_total", "info_fractions", "rounding", "priors")
_OPTION_KEYS = ("format", "out", "threads", "seed")
_CALIBRATE_KEYS = (
    "strategy", "p_range", "q_range", "step", "p_early_step", "q_step",
    "n_range", "power_floor", "t_star", "p_late_range",
)
_SPENDING_KEYS = ("truth", "comparators")
_FREQ_KEYS = ("kinds", "convention")
_SIMULATE_KEYS = ("replicates",)

DEFAULT_OPTIONS = {"format": "csv", "out": "out", "threads": 1, "seed": 20240101}


def _check_keys(block: dict, allowed, name: str) -> None:
    extra = sorted(set(block) - set(allowed))
    if extra:
        raise ConfigError(f"unknown key(s) in [{name}]: {', '.join(extra)}")


def _num(v, name):
    if isinstance(v, bool) or not isinstance(v, (int, Decimal)):
        raise ConfigError(f"{name} must be a number, got {v!r}")
    return float(v)


@dataclass
class RunConfig:
    scenario: dict = field(default_factory=dict)
    design: dict = field(default_factory=dict)
    rules: list = field(default_factory=list)
    options: dict = field(default_factory=dict)
    calibrate: dict = field(default_factory=dict)
    spending: dict = field(default_factory=dict)
    freq: dict = field(default_factory=dict)
    simulate: dict = field(default_factory=dict)

    # --- domain objects ----------------------------------------------------

    def trial_scenario(self) -> TrialScenario:
        kw = {k: _num(v, k) for k, v in self.scenario.items()}
        return TrialScenario(**kw)

    def priors(self) -> PriorPair:
        pri = self.design.get("priors", {})
        try:
            ctrl = BetaParams(*(_num(v, "prior") for v in pri.get("control", (1, 1))))
            trt = BetaParams(*(_num(v, "prior") for v in pri.get("treatment", (1, 1))))
        except (TypeError, DomainError) as exc:
            raise ConfigError(f"bad prior: {exc}") from exc
        return PriorPair(ctrl, trt)

    def fractions(self) -> tuple:
        return tuple(_num(v, "info_fractions") for v in self.design.get("info_fractions", ()))

    def rounding(self) -> str:
        return self.design.get("rounding", "nearest")

    def schedule(self):
        if "n_total" not in self.design:
            raise ConfigError("[design] needs n_total")
        return build_schedule(int(self.design["n_total"]), self.fractions(), self.rounding())

    def rule_objects(self) -> list:
        return [_rule(r) for r in self.rules]

    def design_specs(self) -> list:
        sched, pri = self.schedule(), self.priors()
        specs = []
        for rule in self.rule_objects():
            spec = DesignSpec(sched, rule, pri)
            problems = validate(spec)
            if problems:
                raise ConfigError("invalid design: " + "; ".join(problems))
            specs.append(spec)
        return specs

    def option(self, name):
        return self.options.get(name, DEFAULT_OPTIONS[name])

    def to_dict(self) -> dict:
        out = {"scenario": self.scenario, "design": self.design}
        if self.rules:
            out["rule"] = self.rules
        for name in ("calibrate", "spending", "freq", "simulate", "options"):
            block = getattr(self, name)
            if block:
                out[name] = block
        return copy.deepcopy(out)


def _rule(block: dict):
    kind = block.get("type")
    if kind not in RULE_TYPES:
        raise ConfigError(f"rule type must be one of {sorted(RULE_TYPES)}, got {kind!r}")
    _check_keys(block, ("type",) + RULE_TYPES[kind], "rule")
    try:
        if kind == "fixed":
            return FixedPosterior(_num(block["p"], "p"))
        if kind == "two_phase":
            t_star = _num(block.get("t_star", Decimal("0.5")), "t_star")
            return TwoPhasePosterior(_num(block["p_early"], "p_early"), _num(block["p_late"], "p_late"), t_star)
        if kind == "predictive":
            return PredictiveHybrid(_num(block["p_final"], "p_final"), _num(block["q_interim"], "q_interim"))
        return ZBoundary(tuple(_num(c, "critical_z") for c in block["critical_z"]))
    except KeyError as exc:
        raise ConfigError(f"rule {kind!r} is missing {exc.args[0]!r}") from exc


def loads(text: str) -> RunConfig:
    """Parse and check a TOML config; raises :class:`ConfigError`."""
    try:
        raw = tomli.loads(text, parse_float=Decimal)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"config is not valid TOML: {exc}") from exc
    _check_keys(
        raw,
        ("scenario", "design", "rule", "options", "calibrate", "spending", "freq", "simulate"),
        "top level",
    )
    rules = raw.get("rule", [])
    if isinstance(rules, dict):
        rules = [rules]
    cfg = RunConfig(
        scenario=raw.get("scenario", {}),
        design=raw.get("design", {}),
        rules=list(rules),
        options=raw.get("options", {}),
        calibrate=raw.get("calibrate", {}),
        spending=raw.get("spending", {}),
        freq=raw.get("freq", {}),
        simulate=raw.get("simulate", {}),
    )
    _check_keys(cfg.scenario, _SCENARIO_KEYS, "scenario")
    _check_keys(cfg.design, _DESIGN_KEYS, "design")
    _check_keys(cfg.options, _OPTION_KEYS, "options")
    _check_keys(cfg.calibrate, _CALIBRATE_KEYS, "calibrate")
    _check_keys(cfg.spending, _SPENDING_KEYS, "spending")
    _check_keys(cfg.freq, _FREQ_KEYS, "freq")
    _check_keys(cfg.simulate, _SIMULATE_KEYS, "simulate")
    _check_keys(cfg.design.get("priors", {}), ("control", "treatment"), "design.priors")
    # Build every domain object once so errors surface before any computation.
    cfg.trial_scenario()
    cfg.priors()
    cfg.rule_objects()
    if "n_total" in cfg.design:
        cfg.design_specs()
    return cfg


def load(path) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return loads(text)


def dumps(cfg: RunConfig) -> str:
    """TOML text that :func:`loads` maps back to an equal :class:`RunConfig`."""
    return tomli_w.dumps(cfg.to_dict())
