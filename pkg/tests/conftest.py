import numpy as np
import pytest

from dwtforge.imagecore import ColorSpace, Image

from imagesets import natural_images

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def photos():
    return natural_images(512)


@pytest.fixture(scope="session")
def small_photos():
    return natural_images(128)


def rgb(array) -> Image:
    return Image.from_hwc(array, ColorSpace.RGB)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
