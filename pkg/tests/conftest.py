import os
from pathlib import Path

import numpy as np
import pytest

MNIST_DIR = os.environ.get("GANNOISE_MNIST_DIR", "/root/data/mnist")
_VERDICTS = []


def mnist_available():
    from gannoise.data import MNIST_FILES

    return all((Path(MNIST_DIR) / name).is_file() for pair in MNIST_FILES.values() for name in pair)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def verdict():
    """Record one acceptance line; it is echoed in the terminal summary."""

    def record(criterion, passed, detail):
        _VERDICTS.append((criterion, bool(passed), detail))
        print(f"criterion {criterion}: {'PASS' if passed else 'FAIL'} - {detail}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, passed, detail in sorted(_VERDICTS, key=lambda v: v[0]):
        terminalreporter.write_line(f"criterion {criterion:>2}: {'PASS' if passed else 'FAIL'}  {detail}")
