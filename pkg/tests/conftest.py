import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from evfilt import EventStream, Label, SensorGeometry  # noqa: E402

SCENES = os.path.join(os.path.dirname(os.path.dirname(__file__)), "scenes")


def random_stream(n, width=64, height=48, seed=0, max_dt=40, labeled=True):
    """Random sorted stream with bursts around a few moving hot spots plus uniform noise."""
    rng = np.random.default_rng(seed)
    g = SensorGeometry(width, height)
    t = np.cumsum(rng.integers(0, max_dt, n))
    hot = rng.random(n) < 0.6
    cx = (np.sin(t / 3e4) * 0.4 + 0.5) * (width - 1)
    cy = (np.cos(t / 4e4) * 0.4 + 0.5) * (height - 1)
    x = np.where(hot, np.clip(np.rint(cx + rng.normal(0, 2, n)), 0, width - 1), rng.integers(0, width, n))
    y = np.where(hot, np.clip(np.rint(cy + rng.normal(0, 2, n)), 0, height - 1), rng.integers(0, height, n))
    label = np.where(hot, Label.SIGNAL, Label.NOISE) if labeled else None
    return EventStream(g, t, x.astype(int), y.astype(int), rng.integers(0, 2, n), label)


@pytest.fixture
def scenes_dir():
    return SCENES


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
