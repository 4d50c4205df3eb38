import os
import random

import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from villadsen.dimension_system import random_system

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.register_profile("ci", max_examples=200, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


seeds = st.integers(min_value=0, max_value=2**32 - 1)


@st.composite
def systems(draw, levels=4, max_j=3, max_n=4, max_theta=3):
    rng = random.Random(draw(seeds))
    return random_system(rng, levels=draw(st.integers(2, levels)), max_j=max_j, max_n=max_n, max_theta=max_theta)


# -- acceptance summary -------------------------------------------------------------------

_ACCEPTANCE: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): acceptance criterion")


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("acceptance")
    if marker is None or call.when != "call":
        return
    number, title = marker.args
    outcome = "PASS" if call.excinfo is None else "FAIL"
    if _ACCEPTANCE.get(number, (title, "PASS"))[1] == "FAIL":
        outcome = "FAIL"
    _ACCEPTANCE[number] = (title, outcome)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, outcome = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {outcome}  {title}")


@pytest.fixture
def rng():
    return random.Random(20240611)
