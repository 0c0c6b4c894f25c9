import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st

from billiard_lab import circle, ellipse, support_fourier

settings.register_profile(
    "default", deadline=None, max_examples=25,
    suppress_health_check=[HealthCheck.function_scoped_fixture],
)
settings.load_profile("default")


def random_support_domain(rng, max_freq=6, budget=0.5, nodes=1024):
    """Smooth convex table with rho >= 1 - budget guaranteed."""
    freqs = rng.choice(np.arange(2, max_freq + 1), size=rng.integers(1, 4), replace=False)
    raw = rng.normal(size=(len(freqs), 2))
    weight = sum((n * n - 1) * math.hypot(*ab) for n, ab in zip(freqs, raw))
    scale = budget * rng.uniform(0.2, 1.0) / weight
    coeffs = [(int(n), float(a * scale), float(b * scale)) for n, (a, b) in zip(freqs, raw)]
    return support_fourier(1.0, coeffs, nodes)


@st.composite
def support_domains(draw, max_freq=6, budget=0.5):
    seed = draw(st.integers(0, 2**32 - 1))
    return random_support_domain(np.random.default_rng(seed), max_freq, budget)


@pytest.fixture(scope="session")
def unit_circle():
    return circle(1.0, 1024)


@pytest.fixture(scope="session")
def ellipse21():
    return ellipse(2.0, 1.0, 1024)


# acceptance bookkeeping: one PASS/FAIL line per criterion
_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    crit = getattr(report, "_criterion", None)
    if crit is None:
        return
    num, title = crit
    _, ok, dur = _CRITERIA.get(num, (title, True, 0.0))
    _CRITERIA[num] = (title, ok and report.outcome == "passed", dur + report.duration)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is not None:
        report._criterion = mark.args


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        title, ok, dur = _CRITERIA[num]
        terminalreporter.write_line(f"criterion {num}: {'PASS' if ok else 'FAIL'}  {title} ({dur:.1f}s)")
