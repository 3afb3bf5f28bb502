import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from suppresskit.image import ImageBuffer


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def random_image(rng):
    return ImageBuffer(rng.random((32, 32, 3)))


@pytest.fixture
def random_gray(rng):
    return ImageBuffer(rng.random((32, 32)))


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import CRITERION_RESULTS
    except ImportError:
        return
    if CRITERION_RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in CRITERION_RESULTS:
            terminalreporter.write_line(line)
