import pytest
from hypothesis import HealthCheck, settings

from warpgreen.geometry import ModelManifold, WarpingFamily, build_omega_table
from warpgreen.green import build_kernel

settings.register_profile(
    "repo",
    derandomize=True,
    deadline=None,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("repo")


@pytest.fixture(scope="session")
def euclid3():
    return ModelManifold(3, WarpingFamily.euclidean())


@pytest.fixture(scope="session")
def hyper3():
    return ModelManifold(3, WarpingFamily.hyperbolic())


@pytest.fixture(scope="session")
def euclid_kernel(euclid3):
    return build_kernel(euclid3)


@pytest.fixture(scope="session")
def hyper_kernel(hyper3):
    return build_kernel(hyper3)


@pytest.fixture(scope="session")
def euclid_table(euclid3):
    return build_omega_table(euclid3)


@pytest.fixture(scope="session")
def hyper_table(hyper3):
    return build_omega_table(hyper3)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line per acceptance criterion."""

    def record(number: int, title: str, passed: bool, detail: str) -> bool:
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:2d} {title}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
