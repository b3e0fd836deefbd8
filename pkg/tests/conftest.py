import numpy as np
import pytest

from dqnmpc.dynamics import QuadrotorParams
from dqnmpc.ocp import OcpConfig
from dqnmpc.reference import TrajectorySpec, sample_references


@pytest.fixture(scope="session")
def params():
    return QuadrotorParams()


@pytest.fixture(scope="session")
def ocp_cfg():
    return OcpConfig()


@pytest.fixture(scope="session")
def hover_refs(params, ocp_cfg):
    """Hover-at-origin references covering one horizon (static setpoint)."""
    spec = TrajectorySpec.hover(duration=1e6)
    return sample_references(spec, 0.0, ocp_cfg.dt, ocp_cfg.n_nodes, params)


@pytest.fixture()
def rng():
    return np.random.default_rng(42)
