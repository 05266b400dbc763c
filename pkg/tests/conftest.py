import numpy as np
import pytest
from hypothesis import strategies as st

from mrkit.core import SummaryData


def random_data(rng, p=20, beta=0.4, tau=0.0, strength=5.0):
    """Summary statistics drawn from the measurement-error model."""
    sx = rng.uniform(0.5, 1.5, p) * 0.01
    sy = rng.uniform(0.5, 1.5, p) * 0.03
    gamma = sx * strength * rng.choice([-1.0, 1.0], p) * rng.uniform(0.5, 1.5, p)
    alpha = tau * rng.standard_normal(p)
    g = gamma + sx * rng.standard_normal(p)
    G = beta * gamma + alpha + sy * rng.standard_normal(p)
    return SummaryData.create(g, sx, G, sy)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@st.composite
def datasets(draw, min_p=5, max_p=40):
    seed = draw(st.integers(0, 2**32 - 1))
    p = draw(st.integers(min_p, max_p))
    beta = draw(st.floats(-1.0, 1.0))
    tau = draw(st.sampled_from([0.0, 0.02, 0.06]))
    strength = draw(st.floats(3.0, 12.0))
    return random_data(np.random.default_rng(seed), p, beta, tau, strength)


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(module.RESULTS):
        terminalreporter.write_line(module.RESULTS[n])
