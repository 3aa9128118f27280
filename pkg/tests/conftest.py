import numpy as np
import pytest

from hawkesgraph.model import LinkFunction
from hawkesgraph.simulate import SimulationSpec, simulate_panel

PSV_SMALL = """\
HR|O2Sat|Temp|SBP|DBP|Resp|Creatinine|BUN|ICULOS|Age|Gender|SepsisLabel
80|97|36.5|120|60|15|NaN|NaN|1|67|0|0
82|96|NaN|118|59|16|1.4|25|2|67|0|0
85|95|NaN|115|58|18|NaN|NaN|3|67|0|1
"""


@pytest.fixture
def small_psv_text():
    return PSV_SMALL


@pytest.fixture(scope="session")
def linear_spec():
    """Well-conditioned linear-link generator whose predictors stay inside
    [0, 1] by construction (no clamping)."""
    return SimulationSpec(
        n1=3, n2=1, n3=0, d=2, T=600,
        A=np.array([[0.45, 0.0, 0.0],
                    [0.35, 0.25, 0.0],
                    [0.0, 0.2, 0.3]]),
        R=np.ones((3, 3)),
        B=np.array([[0.15], [0.1], [-0.1]]),
        Rtilde=np.ones((3, 1)),
        nu=np.array([0.3, 0.3, 0.35]),
        link=LinkFunction("linear"),
        ar_coeff=0.5, ar_noise=0.25, clip=1.0,
    )


@pytest.fixture(scope="session")
def linear_panel(linear_spec):
    panel, thetas, info = simulate_panel(linear_spec, seed=11)
    assert info["clamp_count"] == 0
    return panel, thetas


@pytest.fixture(scope="session")
def sigmoid_spec():
    return SimulationSpec(
        n1=2, n2=1, n3=1, d=1, T=700,
        A=np.array([[0.9, 0.4], [0.0, 0.8]]),
        R=np.ones((2, 2)),
        B=np.array([[0.5], [-0.3]]),
        Rtilde=np.ones((2, 1)),
        Gamma=np.array([[0.4], [0.2]]),
        nu=np.array([-0.6, 0.1]),
        link=LinkFunction("sigmoid"),
        ar_coeff=0.4, ar_noise=0.4, clip=1.5,
    )


@pytest.fixture(scope="session")
def sigmoid_panel(sigmoid_spec):
    panel, thetas, _ = simulate_panel(sigmoid_spec, seed=5)
    return panel, thetas


@pytest.fixture(scope="session")
def sigmoid_panels(sigmoid_spec):
    """Several subjects: statics vary across panels, so the z coefficient is
    identifiable (within one panel it is collinear with the intercept)."""
    panels = [simulate_panel(sigmoid_spec, seed=s)[0] for s in (5, 6, 7, 8)]
    thetas = simulate_panel(sigmoid_spec, seed=5)[1]
    return panels, thetas
