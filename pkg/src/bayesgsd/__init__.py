"""Exact design and evaluation of two-arm Bayesian group sequential trials
with a binary endpoint, plus frequentist comparators and a Monte Carlo check."""

from .boundary import StoppingBoundary, compile_design
from .calibrate import (
    GridSweep,
    calibrate_baseline,
    evaluate_design,
    select_strategy1,
    select_strategy2,
    sweep_strategy1,
    sweep_strategy2,
)
from .design import (
    HYPRESS,
    AnalysisSchedule,
    DesignSpec,
    FixedPosterior,
    OperatingCharacteristics,
    PredictiveHybrid,
    PriorPair,
    TrialScenario,
    TruthPoint,
    TwoPhasePosterior,
    ZBoundary,
    build_schedule,
    validate,
)
from .errors import ConfigError, DomainError, InfeasibleError, NumericalError
from .frequentist import design_for, oc_normal, size_frequentist
from .kernel import BetaParams, beta_superiority_prob
from .oc import evaluate, spending_profiles, stagewise_report
from .simulate import SimResult, simulate

__version__ = "0.1.0"
