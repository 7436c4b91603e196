from __future__ import annotations

import pytest

from kcontact.expr import parse
from kcontact.models import load_model

STRING_PARAMS = {"rho": 1.0, "tau": 0.64, "gamma": 0.1}


@pytest.fixture(scope="session")
def string_model():
    return load_model("damped_string")


@pytest.fixture(scope="session")
def chart(string_model):
    return string_model.chart


@pytest.fixture(scope="session")
def lag(string_model):
    return string_model.lagrangian


@pytest.fixture(scope="session")
def P(chart):
    return lambda text: parse(text, chart)


@pytest.fixture(scope="session")
def models():
    return {name: load_model(name) for name in ("damped_string", "telegrapher", "coupled_strings", "damped_laplace")}
