import numpy as np
import pytest

from shockstab.eos import GlobalModel, LocalModel, StableModel
from shockstab.evans import build_system
from shockstab.hugoniot import trace_backward
from shockstab.profile import shoot_profile

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


def shock_at(model, S_minus, anchor=(1.0, 0.0)):
    return trace_backward(model, anchor, [S_minus]).samples[0].shock


_CACHE = {}


def gas_case(name):
    """(model, shock, profile, system) for the named reference shock; built once per session."""
    if name not in _CACHE:
        model, S = {
            "local": (LocalModel(), -5.0),
            "stable": (StableModel(), -5.0),
            "global": (GlobalModel(10.0), -15.0),
        }[name]
        shock = shock_at(model, S)
        profile = shoot_profile(model, shock)
        _CACHE[name] = (model, shock, profile, build_system(model, profile))
    return _CACHE[name]


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
