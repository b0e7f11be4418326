import numpy as np
import pytest

from bayesgsd.boundary import StoppingBoundary, compile_design
from bayesgsd.design import (
    HYPRESS,
    AnalysisSchedule,
    DesignSpec,
    FixedPosterior,
    PredictiveHybrid,
    TruthPoint,
    TwoPhasePosterior,
    ZBoundary,
    build_schedule,
)
from bayesgsd.errors import ConfigError
from bayesgsd.oc import evaluate
from bayesgsd.simulate import BLOCK_SIZE, simulate

Z_LIMIT = 3.5


def test_never_stopping():
    sched = AnalysisSchedule((5, 10))
    spec = DesignSpec(sched, FixedPosterior(0.99))
    b = StoppingBoundary([np.full(6, -1), np.full(11, -1)])
    r = simulate(spec, b, TruthPoint(0.4, 0.2), 5000, seed=3)
    assert r.reject_freq == 0.0
    assert r.mean_n_total == 20.0
    assert r.se_mean_n == 0.0


def test_hand_enumeration_value():
    spec = DesignSpec(AnalysisSchedule((2,)), FixedPosterior(0.9))
    r = simulate(spec, compile_design(spec), TruthPoint(0.5, 0.5), 10**6, seed=11)
    assert abs(r.reject_freq - 0.0625) <= Z_LIMIT * r.se_reject
    assert r.se_reject == pytest.approx(np.sqrt(r.reject_freq * (1 - r.reject_freq) / 10**6))


@pytest.mark.parametrize("workers", [4, 16])
def test_worker_count_does_not_change_results(workers):
    spec = DesignSpec(build_schedule(120, (0.3, 0.6)), FixedPosterior(0.98))
    b = compile_design(spec)
    reps = 3 * BLOCK_SIZE + 123
    one = simulate(spec, b, HYPRESS.alternative(), reps, seed=99, workers=1)
    many = simulate(spec, b, HYPRESS.alternative(), reps, seed=99, workers=workers)
    assert one == many


def test_seed_and_stream_matter():
    spec = DesignSpec(build_schedule(60, (0.5,)), FixedPosterior(0.95))
    b = compile_design(spec)
    a = simulate(spec, b, HYPRESS.null(), 20000, seed=1)
    assert a == simulate(spec, b, HYPRESS.null(), 20000, seed=1)
    assert a != simulate(spec, b, HYPRESS.null(), 20000, seed=2)
    assert a != simulate(spec, b, HYPRESS.null(), 20000, seed=1, stream=1)


def test_bad_arguments():
    spec = DesignSpec(AnalysisSchedule((2,)), FixedPosterior(0.9))
    b = compile_design(spec)
    with pytest.raises(ConfigError):
        simulate(spec, b, HYPRESS.null(), 0, seed=1)
    with pytest.raises(ConfigError):
        simulate(spec, StoppingBoundary([np.array([-1, 0]), np.array([-1, 0])]), HYPRESS.null(), 10, seed=1)


REGRESSION_SET = [
    DesignSpec(build_schedule(368, (0.2, 0.4, 0.6, 0.8)), FixedPosterior(0.992)),
    DesignSpec(build_schedule(356, (1 / 3, 2 / 3)), FixedPosterior(0.989)),
    DesignSpec(build_schedule(368, (0.2, 0.4, 0.6, 0.8)), TwoPhasePosterior(0.998, 0.988, 0.5)),
    DesignSpec(build_schedule(368, (0.2, 0.4, 0.6, 0.8)), PredictiveHybrid(0.985, 0.94)),
    DesignSpec(build_schedule(200, (0.5,)), ZBoundary((2.797, 1.977))),
    DesignSpec(build_schedule(60, (0.25, 0.5, 0.75)), PredictiveHybrid(0.97, 0.6)),
]


@pytest.mark.parametrize("idx", range(len(REGRESSION_SET)))
@pytest.mark.parametrize("truth", [HYPRESS.null(), HYPRESS.alternative()], ids=["null", "alt"])
def test_agrees_with_exact_engine(idx, truth):
    spec = REGRESSION_SET[idx]
    b = compile_design(spec)
    exact = evaluate(spec, b, truth)
    r = simulate(spec, b, truth, 200000, seed=2024 + idx)
    assert abs(r.reject_freq - exact.reject_prob) <= Z_LIMIT * max(r.se_reject, 1e-12)
    assert abs(r.mean_n_total - exact.expected_n_total) <= Z_LIMIT * max(r.se_mean_n, 1e-12)
    for f, se, p in zip(r.stage_stop_freq, r.se_stage, exact.stage_stop_prob):
        # A zero-probability stage must never be hit; otherwise compare in SE units.
        assert abs(f - p) <= Z_LIMIT * se if se > 0 else f == 0.0 and p < 1e-5
