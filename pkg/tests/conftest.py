import numpy as np
import pytest

from causalmeta import MetaDataset

ACCEPTANCE_RESULTS: dict[str, tuple[str, str]] = {}


@pytest.fixture
def record_criterion():
    """Store a one-line outcome for the acceptance summary."""

    def record(key: str, passed: bool, detail: str) -> None:
        ACCEPTANCE_RESULTS[key] = ("PASS" if passed else "FAIL", detail)

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS, key=lambda k: int(k.split()[0][1:])):
        status, detail = ACCEPTANCE_RESULTS[key]
        terminalreporter.write_line(f"{status}  {key}: {detail}")


@pytest.fixture
def worked_example() -> MetaDataset:
    return MetaDataset.from_counts([(10, 10, 5, 15)], name="worked")


@pytest.fixture
def two_study() -> MetaDataset:
    return MetaDataset.from_counts([(10, 10, 5, 15), (30, 70, 40, 60)], name="two")


@pytest.fixture
def three_study() -> MetaDataset:
    return MetaDataset.from_counts([(10, 10, 5, 15), (30, 70, 40, 60), (3, 17, 1, 19)], name="three")


def random_counts(rng: np.random.Generator, k: int, low: int = 1, high: int = 1000) -> list[tuple[int, ...]]:
    return [tuple(int(x) for x in rng.integers(low, high + 1, size=4)) for _ in range(k)]
