import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ensemble_oc import (
    StepScheme,
    UgvBicycle,
    UgvDifferentialDrive,
    backward_gradient,
    fd_gradient,
    propagate_segment,
)
from test_integrators import Linear1d, Zero


def test_control_integrator_terminal_quadratic():
    # x' = u, Euler, J = x_N^2 / 2: every control grid cell gets x_N * dt
    model = Linear1d(a=0.0, b=1.0)
    scheme = StepScheme("euler", 0.5)
    controls = np.array([[1.0], [2.0], [-0.5], [0.25]])
    states = propagate_segment(scheme, model, np.array([[0.3]]), controls)
    x_n = states[-1, 0, 0]
    g_u, g_x0 = backward_gradient(scheme, model, states, controls, np.array([[x_n]]))
    np.testing.assert_allclose(g_u, x_n * 0.5 * np.ones((4, 1)), atol=1e-14)
    np.testing.assert_allclose(g_x0, [[x_n]], atol=1e-14)


def test_zero_field_controls_never_enter():
    model = Zero()
    scheme = StepScheme("rk4", 0.1)
    x0 = np.array([[0.5, -1.0], [2.0, 0.25], [0.0, 1.0]])
    controls = np.ones((6, 1))
    states = propagate_segment(scheme, model, x0, controls)
    seed = 2.0 * states[-1] / 3.0  # d/dx of mean |x|^2
    g_u, g_x0 = backward_gradient(scheme, model, states, controls, seed)
    np.testing.assert_array_equal(g_u, np.zeros((6, 1)))
    np.testing.assert_allclose(g_x0, 2.0 * x0 / 3.0)


@pytest.mark.parametrize("kind", ["euler", "rk3", "rk4", "ab2", "ab3"])
def test_backward_matches_fd_all_schemes(kind, rng):
    model = UgvBicycle()
    scheme = StepScheme(kind, 0.05)
    n_steps = 14
    x0 = rng.uniform(-1, 1, (4, 3))
    controls = rng.uniform(-0.8, 0.8, (n_steps, 2))
    w = rng.standard_normal((4, 3))
    states = propagate_segment(scheme, model, x0, controls)
    g_u, g_x0 = backward_gradient(scheme, model, states, controls, w)

    def terminal_of_u(flat):
        st_ = propagate_segment(scheme, model, x0, flat.reshape(n_steps, 2))
        return float(np.sum(w * st_[-1]))

    def terminal_of_x(flat):
        st_ = propagate_segment(scheme, model, flat.reshape(4, 3), controls)
        return float(np.sum(w * st_[-1]))

    fd_u = fd_gradient(terminal_of_u, controls.ravel()).reshape(n_steps, 2)
    fd_x = fd_gradient(terminal_of_x, x0.ravel()).reshape(4, 3)
    assert np.abs(g_u - fd_u).max() <= 1e-6
    assert np.abs(g_x0 - fd_x).max() <= 1e-6


def test_running_seed_accumulates(rng):
    # J = sum_j dt * 1^T x_j over left nodes, via per-node running seeds
    model = UgvDifferentialDrive(random_radius=False)
    scheme = StepScheme("rk4", 0.1)
    n_steps = 10
    x0 = rng.uniform(-0.5, 0.5, (2, 3))
    controls = rng.uniform(-1, 1, (n_steps, 2))
    states = propagate_segment(scheme, model, x0, controls)
    running = np.zeros_like(states)
    running[:-1] = 0.1
    g_u, _ = backward_gradient(
        scheme, model, states, controls, np.zeros((2, 3)), running_seed=running
    )

    def functional(flat):
        st_ = propagate_segment(scheme, model, x0, flat.reshape(n_steps, 2))
        return float(0.1 * st_[:-1].sum())

    fd_u = fd_gradient(functional, controls.ravel()).reshape(n_steps, 2)
    assert np.abs(g_u - fd_u).max() <= 1e-6


def test_sample_linearity_m3(rng):
    # gradient of the 3-sample mean equals the mean of per-sample gradients
    model = UgvDifferentialDrive(random_radius=True)
    scheme = StepScheme("rk4", 0.1)
    x0 = rng.uniform(-0.3, 0.3, (3, 4))
    x0[:, 3] = rng.uniform(1.0, 1.5, 3)
    controls = rng.uniform(-1, 1, (8, 2))
    states = propagate_segment(scheme, model, x0, controls)
    seed = states[-1].copy()
    g_mean, _ = backward_gradient(scheme, model, states, controls, seed / 3.0)
    singles = []
    for i in range(3):
        g_i, _ = backward_gradient(
            scheme, model, states[:, i : i + 1], controls, seed[i : i + 1]
        )
        singles.append(g_i)
    np.testing.assert_allclose(g_mean, np.mean(singles, axis=0), atol=1e-13)


def test_batch_split_and_workers_deterministic(rng):
    model = UgvDifferentialDrive(random_radius=True)
    scheme = StepScheme("rk4", 0.05)
    x0 = rng.uniform(-0.3, 0.3, (37, 4))
    x0[:, 3] = rng.uniform(1.0, 1.5, 37)
    controls = rng.uniform(-1, 1, (12, 2))
    states = propagate_segment(scheme, model, x0, controls)
    seed = rng.standard_normal((37, 4))
    ref_u, ref_x = backward_gradient(scheme, model, states, controls, seed, batch_size=37)
    for batch, workers in [(5, 1), (5, 4), (10, 2)]:
        g_u, g_x = backward_gradient(
            scheme, model, states, controls, seed, batch_size=batch, workers=workers
        )
        np.testing.assert_allclose(g_u, ref_u, atol=1e-12)
        np.testing.assert_array_equal(g_x, ref_x)


def test_repeated_calls_bit_identical(rng):
    model = UgvBicycle()
    scheme = StepScheme("rk3", 0.1)
    x0 = rng.uniform(-1, 1, (5, 3))
    controls = rng.uniform(-0.9, 0.9, (9, 2))
    states = propagate_segment(scheme, model, x0, controls)
    seed = rng.standard_normal((5, 3))
    a = backward_gradient(scheme, model, states, controls, seed)
    b = backward_gradient(scheme, model, states, controls, seed)
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])


def test_fd_exact_on_quadratic():
    g = fd_gradient(lambda v: float(v[0] ** 2), np.array([1.0]), h=1e-4)
    assert g[0] == pytest.approx(2.0, abs=1e-10)


def test_fd_sine_taylor_bound():
    g = fd_gradient(lambda v: float(np.sin(v[0])), np.array([0.0]), h=1e-4)
    assert g[0] == pytest.approx(1.0, abs=2e-9)


@settings(max_examples=30, deadline=None)
@given(
    a=st.floats(-3, 3, allow_nan=False),
    b=st.floats(-3, 3, allow_nan=False),
    c=st.floats(-3, 3, allow_nan=False),
)
def test_fd_exact_on_random_quadratics(a, b, c):
    # centered differences are exact on quadratics up to roundoff
    def f(v):
        return float(a * v[0] ** 2 + b * v[0] + c)

    x = np.array([0.7])
    g = fd_gradient(f, x, h=1e-4)
    assert g[0] == pytest.approx(2 * a * 0.7 + b, abs=1e-8)
