import random

import pytest
from hypothesis import HealthCheck, settings, strategies as st

from fedosov_lab import fixtures
from fedosov_lab.sampling import random_element, random_polynomial, random_rational

settings.register_profile(
    "default",
    deadline=None,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def ring():
    return fixtures.plane_ring()


@pytest.fixture(scope="session")
def flat():
    return fixtures.flat_plane()


@pytest.fixture(scope="session")
def sphere():
    return fixtures.sphere_chart()


@pytest.fixture(scope="session")
def flat_setup():
    return fixtures.flat_setup(6)


@pytest.fixture(scope="session")
def flat_omega_setup():
    return fixtures.flat_setup(6, omega_multiple=True)


@pytest.fixture(scope="session")
def sphere_setup():
    return fixtures.sphere_setup(4)


def seeds():
    return st.integers(min_value=0, max_value=2**32 - 1)


def poly(ring, seed, degree=3):
    return random_polynomial(ring, random.Random(seed), degree)


def ratfun(ring, seed):
    return random_rational(ring, random.Random(seed))


def element(alg, seed, **kw):
    return random_element(alg, random.Random(seed), **kw)


_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): one acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None or rep.when not in ("setup", "call"):
        return
    number, title = mark.args
    prev = _ACCEPTANCE.get(number, (title, True))
    ok = prev[1] and not rep.failed and not (rep.when == "call" and rep.skipped)
    _ACCEPTANCE[number] = (title, ok)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, ok = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {title}")
