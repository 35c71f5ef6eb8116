import re

import numpy as np
import pytest

from toolloc import _backend


@pytest.fixture(params=sorted(_backend.available_backends()))
def backend(request, monkeypatch):
    """Run a test once per kernel backend (compiled and pure Python)."""
    mod = _backend.available_backends()[request.param]
    monkeypatch.setattr("toolloc.cam2box.kernels", mod)
    monkeypatch.setattr("toolloc.metrics.kernels", mod)
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_VERDICTS = pytest.StashKey[list]()


@pytest.fixture
def verdict(request):
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""
    lines = request.config.stash.setdefault(_VERDICTS, [])

    def record(number, title, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {title}" + (f" ({detail})" if detail else "")
        lines.append(line)
        print(line)
        assert ok, line

    return record


def _criterion_key(line):
    tag = line.split()[2].rstrip(":")
    return int(re.match(r"\d+", tag).group()), tag


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_VERDICTS, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=_criterion_key):
            terminalreporter.write_line(line)
