"""
Общие фикстуры тестов DelayLab
"""
import os
import sys

sys.path.append(os.path.join(os.path.dirname(__file__), 'src'))

import math

import pytest

from physics.interferometer import ModelParams
from physics.spectrum import Spectrum


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="run desk-scale acceptance tests (N up to 1e7, hundreds of trials)")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: desk-scale acceptance run, needs --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(scope="session")
def narrow_spectrum():
    """Гауссов спектр ω₀ = 2·10¹⁵, Δω = 10¹⁴ рад/с, усечение ±6Δω целиком в ω > 0"""
    return Spectrum.gaussian(2.0e15, 1.0e14)


@pytest.fixture(scope="session")
def wide_spectrum():
    """Гауссов спектр Δω = 10¹⁵ рад/с, ω₀ = 10¹⁶ рад/с"""
    return Spectrum.gaussian(1.0e16, 1.0e15)


@pytest.fixture
def working_point(narrow_spectrum):
    """θ = 10⁻³, φ_c = π/2, без помех"""
    return ModelParams.from_theta(1e-3, 0.0, narrow_spectrum).replace(
        phi=math.pi / 2 + narrow_spectrum.center * 1e-3 / narrow_spectrum.spread)


def at_carrier_phase(spectrum, theta, phase, epsilon=0.0, omega_ratio=0.0):
    """Параметры модели с заданной фазой относительно несущей"""
    m = ModelParams.from_theta(theta, 0.0, spectrum, epsilon, omega_ratio)
    return m.replace(phi=phase + spectrum.center * m.tau)


@pytest.fixture(scope="session")
def carrier_model():
    return at_carrier_phase
