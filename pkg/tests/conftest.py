import numpy as np
import pytest

from gaussalign.model import CorrelationModel

ACCEPTANCE_LINES = []


def random_model(rng, max_dim=8, min_dim=1):
    """A random valid general model with d_a, d_b in [min_dim, max_dim]."""
    d_a = int(rng.integers(min_dim, max_dim + 1))
    d_b = int(rng.integers(min_dim, max_dim + 1))
    k = d_a + d_b
    w = rng.standard_normal((k, k + 2))
    joint = w @ w.T / (k + 2) + 0.05 * np.eye(k)
    joint = 0.5 * (joint + joint.T)
    return CorrelationModel(
        rng.standard_normal(d_a),
        rng.standard_normal(d_b),
        joint[:d_a, :d_a],
        joint[d_a:, d_a:],
        joint[:d_a, d_a:],
    )


def joint_sample(rng, model, size):
    joint = model.joint_covariance
    mu = np.concatenate([model.mu_a, model.mu_b])
    z = rng.multivariate_normal(mu, joint, size=size, method="cholesky")
    return z[:, : model.d_a], z[:, model.d_a :]


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
