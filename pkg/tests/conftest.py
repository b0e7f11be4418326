import os

import pytest
from hypothesis import HealthCheck, settings

import bayesgsd.calibrate
import bayesgsd.cli
import bayesgsd.oc

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.register_profile("ci", max_examples=200, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

MASS_LIMIT = 1e-12
_MASS = {"worst": 0.0, "count": 0}
_original_evaluate = bayesgsd.oc.evaluate


def _tracked_evaluate(*args, **kwargs):
    oc = _original_evaluate(*args, **kwargs)
    _MASS["worst"] = max(_MASS["worst"], oc.mass_error)
    _MASS["count"] += 1
    return oc


# Every in-process evaluation is routed through the tracker.
for _mod in (bayesgsd.oc, bayesgsd.calibrate, bayesgsd.cli):
    _mod.evaluate = _tracked_evaluate


@pytest.fixture(autouse=True)
def mass_conserved():
    """Every exact evaluation made by a test conserves probability to 1e-12."""
    _MASS["worst"] = 0.0
    yield
    assert _MASS["worst"] <= MASS_LIMIT, f"mass error {_MASS['worst']:.3g} exceeds {MASS_LIMIT}"


ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
