import numpy as np
import pytest

from gkflow.backends import TorusChart
from gkflow.fields import Metric
from gkflow import scenarios as sc


@pytest.fixture(scope="session")
def t2():
    return TorusChart(2, 32, 2.0 * np.pi, stencil_order=4)


@pytest.fixture(scope="session")
def t2_fine():
    return TorusChart(2, 64, 2.0 * np.pi, stencil_order=6)


@pytest.fixture(scope="session")
def t3():
    return TorusChart(3, 32, 2.0 * np.pi, stencil_order=6)


@pytest.fixture(scope="session")
def t4():
    return TorusChart(4, (16, 8, 8, 8), 2.0 * np.pi, stencil_order=4)


@pytest.fixture(scope="session")
def t4_iso():
    return TorusChart(4, 10, 2.0 * np.pi, stencil_order=4)


@pytest.fixture(scope="session")
def flat_t4(t4):
    d = t4.dim
    return Metric.from_array(
        t4, np.broadcast_to(np.eye(d), t4.grid_shape + (d, d)).copy()
    )


@pytest.fixture(scope="session")
def s3():
    return sc.round_s3_algebra()


@pytest.fixture(scope="session")
def hopf():
    return sc.hopf_algebra()


@pytest.fixture(scope="session")
def hopf_gk():
    return sc.hopf_gk_state()


@pytest.fixture(scope="session")
def s3s3_gk():
    return sc.s3s3_gk_state()


@pytest.fixture(scope="session")
def squashed():
    return sc.squashed_hopf_plus()


@pytest.fixture(scope="session")
def pluriclosed_t4():
    return sc.pluriclosed_torus(seed=3, amplitude=0.04, resolution=12,
                                stencil_order=6)
