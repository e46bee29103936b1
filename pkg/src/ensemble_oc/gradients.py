"""Exact functional gradients via backward propagation over stored states.

The forward trajectory is kept in memory while step Jacobians are
re-evaluated on the fly during the backward sweep, so the sweep's auxiliary
memory is bounded by the sample batch size and does not grow with the number
of time steps. A central finite-difference fallback serves as the
independent cross-check.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .errors import ParameterError, ShapeMismatchError
from .integrators import StepScheme, step_jacobians
from .models import DynamicsModel

# target floats of per-batch Jacobian workspace; keeps the auxiliary footprint
# near one megabyte regardless of state dimension while amortizing call
# overhead for small systems
_BATCH_TARGET_FLOATS = 131072


def default_batch_size(n: int, m: int) -> int:
    return max(1, _BATCH_TARGET_FLOATS // (n * (n + m + 1)))


def _seed_accessor(running_seed, n_nodes):
    """Normalize running_seed (None | (N+1, M, n) array | callable) to a callable."""
    if running_seed is None:
        return lambda j: None
    if callable(running_seed):
        return running_seed
    arr = np.asarray(running_seed, dtype=float)
    if arr.shape[0] != n_nodes:
        raise ShapeMismatchError(
            f"running seed has {arr.shape[0]} rows, expected {n_nodes}"
        )
    return lambda j: arr[j]


def _sweep_single_step(scheme, model, states, controls, lam, seed_at, sl):
    """Backward recursion for one-step schemes over one sample batch."""
    n_steps = controls.shape[0]
    du = np.zeros((n_steps, model.m))
    for j in range(n_steps - 1, -1, -1):
        a_mat, b_mat = step_jacobians(scheme, model, states[j][sl], controls[j])
        du[j] = np.einsum("mr,mrc->c", lam, b_mat)
        lam = np.einsum("mr,mrc->mc", lam, a_mat)
        seed = seed_at(j)
        if seed is not None:
            lam = lam + seed[sl]
    return du, lam


def _sweep_multi_step(scheme, model, states, controls, lam_n, seed_at, sl):
    """Backward recursion for Adams-Bashforth maps.

    Each rhs value f(x_p, u_p) feeds up to s later updates, so the adjoint at
    node p collects the weighted future costates before applying the model
    Jacobians; startup steps integrated by the bootstrap Runge-Kutta scheme
    use its exact step Jacobians instead.
    """
    s = scheme.ab_steps
    w = scheme.weights
    dt = scheme.dt
    boot = scheme.bootstrap() if s > 1 else None
    n_steps = controls.shape[0]
    du = np.zeros((n_steps, model.m))
    lam_ahead = [lam_n]  # costates at nodes p+1, p+2, ...
    for p in range(n_steps - 1, -1, -1):
        u_p = controls[p]
        x_p = states[p][sl]
        gather = np.zeros_like(lam_ahead[0])
        for j in range(max(p, s - 1), min(p + s - 1, n_steps - 1) + 1):
            gather += w[j - p] * lam_ahead[j - p]
        gather *= dt
        jx = model.jac_x(x_p, u_p)
        ju = model.jac_u(x_p, u_p)
        if p <= s - 2:
            a_mat, b_mat = step_jacobians(boot, model, x_p, u_p)
            du[p] = np.einsum("mr,mrc->c", lam_ahead[0], b_mat)
            du[p] += np.einsum("mr,mrc->c", gather, ju)
            lam_p = np.einsum("mr,mrc->mc", lam_ahead[0], a_mat)
            lam_p += np.einsum("mr,mrc->mc", gather, jx)
        else:
            du[p] = np.einsum("mr,mrc->c", gather, ju)
            lam_p = lam_ahead[0] + np.einsum("mr,mrc->mc", gather, jx)
        seed = seed_at(p)
        if seed is not None:
            lam_p = lam_p + seed[sl]
        lam_ahead.insert(0, lam_p)
        del lam_ahead[s:]
    return du, lam_ahead[0]


def backward_gradient(
    scheme: StepScheme,
    model: DynamicsModel,
    states: np.ndarray,
    controls: np.ndarray,
    terminal_seed: np.ndarray,
    running_seed=None,
    batch_size: int | None = None,
    workers: int = 1,
):
    """Gradient of a seeded scalar functional over one shooting segment.

    states: (N + 1, M, n) stack produced by propagate_segment with the same
    scheme and controls. controls: (N, m), shared across samples.
    terminal_seed: (M, n) rows holding each sample's d(scalar)/dx at the
    segment end. running_seed optionally supplies additional per-node seeds,
    either as an (N + 1, M, n) array or as a callable j -> (M, n) or None.

    Returns (dJ/dU, dJ/dX0) with shapes (N, m) and (M, n); the control
    gradient is summed over samples, the initial-state gradient is per
    sample. Sample batches are reduced in a fixed order, so the result does
    not depend on the worker count.
    """
    states = np.asarray(states, dtype=float)
    controls = np.asarray(controls, dtype=float)
    terminal_seed = np.asarray(terminal_seed, dtype=float)
    if controls.ndim != 2:
        raise ShapeMismatchError("backward sweep expects shared (N, m) controls")
    if states.shape[0] != controls.shape[0] + 1:
        raise ShapeMismatchError(
            f"{states.shape[0]} stored states do not match {controls.shape[0]} steps"
        )
    if terminal_seed.shape != states.shape[1:]:
        raise ShapeMismatchError(
            f"terminal seed shape {terminal_seed.shape} != {states.shape[1:]}"
        )
    if scheme.dt is None:
        raise ParameterError("scheme must have a bound step size")

    n_samples = states.shape[1]
    seed_at = _seed_accessor(running_seed, states.shape[0])
    if batch_size is None:
        batch_size = default_batch_size(model.n, model.m)
    batch = max(1, int(batch_size))
    slices = [slice(i, min(i + batch, n_samples)) for i in range(0, n_samples, batch)]
    multi = scheme.ab_steps is not None and scheme.ab_steps > 1

    def one_batch(sl):
        lam = terminal_seed[sl].copy()
        seed = seed_at(controls.shape[0])
        if seed is not None:
            lam += seed[sl]
        if multi:
            return _sweep_multi_step(scheme, model, states, controls, lam, seed_at, sl)
        return _sweep_single_step(scheme, model, states, controls, lam, seed_at, sl)

    if workers > 1 and len(slices) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one_batch, slices))
    else:
        results = [one_batch(sl) for sl in slices]

    grad_controls = np.zeros((controls.shape[0], model.m))
    grad_initial = np.empty_like(terminal_seed)
    for sl, (du, lam0) in zip(slices, results):
        grad_controls += du
        grad_initial[sl] = lam0
    return grad_controls, grad_initial


def fd_gradient(functional, point: np.ndarray, h: float | None = None) -> np.ndarray:
    """Second-order centered finite differences of a scalar functional.

    The default step 1e-6 * (1 + |coordinate|) keeps the truncation and
    cancellation errors near 1e-7 for well-scaled functionals.
    """
    point = np.asarray(point, dtype=float)
    grad = np.empty(point.size)
    flat = point.ravel()
    for i in range(flat.size):
        hi = h if h is not None else 1e-6 * (1.0 + abs(flat[i]))
        plus = flat.copy()
        minus = flat.copy()
        plus[i] += hi
        minus[i] -= hi
        grad[i] = (functional(plus.reshape(point.shape)) - functional(minus.reshape(point.shape))) / (2.0 * hi)
    return grad.reshape(point.shape)
