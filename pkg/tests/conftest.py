import numpy as np
import pytest

from ensemble_oc import FixedWingUav


def fd_jac_x(model, x, u, h=1e-5):
    n = x.size
    jac = np.zeros((model.n, n))
    for i in range(n):
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        jac[:, i] = (model.rhs(xp, u) - model.rhs(xm, u)) / (2 * h)
    return jac


def fd_jac_u(model, x, u, h=1e-5):
    jac = np.zeros((model.n, model.m))
    for i in range(model.m):
        up, um = u.copy(), u.copy()
        up[i] += h
        um[i] -= h
        jac[:, i] = (model.rhs(x, up) - model.rhs(x, um)) / (2 * h)
    return jac


def random_uav_state(rng) -> np.ndarray:
    """A state inside the model's valid flight envelope."""
    x = FixedWingUav().nominal_state().copy()
    x[0:2] = rng.uniform(-200, 200, 2)
    x[2] = rng.uniform(-50, 900)
    x[3] = rng.uniform(14, 40)
    x[4] = rng.uniform(-0.45, 0.45)
    x[5] = rng.uniform(-3, 3)
    x[6] = rng.uniform(3.5, 34)
    x[7] = rng.uniform(-0.35, 0.35)
    x[8] = rng.uniform(-1.0, 1.0)
    x[9:13] *= rng.uniform(0.9, 1.1, 4)
    return x


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(20240817))
