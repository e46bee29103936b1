"""Chebyshev collocation operators on [-1, 1].

The full grid has n + 2 extreme points x_j = cos(j pi / (n + 1)), j = 0..n+1;
the inner grid drops both boundary points. Differentiation matrices for
homogeneous Dirichlet problems are obtained by deleting the first and last
rows and columns of the full-grid matrices, with the second-derivative matrix
squared on the full grid before truncation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError


@dataclass(frozen=True)
class ChebyshevOperators:
    nodes: np.ndarray  # inner nodes, descending in x
    d1: np.ndarray  # (n, n) first derivative, inner truncation
    d2: np.ndarray  # (n, n) second derivative, squared then truncated
    weights: np.ndarray  # Clenshaw-Curtis weights at the inner nodes
    full_nodes: np.ndarray
    full_d1: np.ndarray
    full_weights: np.ndarray


def _differentiation_matrix(nodes: np.ndarray) -> np.ndarray:
    npts = nodes.size
    c = np.ones(npts)
    c[0] = 2.0
    c[-1] = 2.0
    c *= (-1.0) ** np.arange(npts)
    dx = nodes[:, None] - nodes[None, :]
    d = np.outer(c, 1.0 / c) / (dx + np.eye(npts))
    d -= np.diag(d.sum(axis=1))
    return d


def clenshaw_curtis_weights(n_intervals: int) -> np.ndarray:
    """Quadrature weights for int_{-1}^{1} on the (n_intervals + 1)-point grid."""
    n = n_intervals
    if n == 0:
        return np.array([2.0])
    theta = np.pi * np.arange(n + 1) / n
    w = np.zeros(n + 1)
    ii = np.arange(1, n)
    v = np.ones(n - 1)
    if n % 2 == 0:
        w[0] = w[n] = 1.0 / (n**2 - 1)
        for k in range(1, n // 2):
            v -= 2.0 * np.cos(2.0 * k * theta[ii]) / (4.0 * k**2 - 1)
        v -= np.cos(n * theta[ii]) / (n**2 - 1)
    else:
        w[0] = w[n] = 1.0 / n**2
        for k in range(1, (n - 1) // 2 + 1):
            v -= 2.0 * np.cos(2.0 * k * theta[ii]) / (4.0 * k**2 - 1)
    w[ii] = 2.0 * v / n
    return w


def chebyshev_operators(n: int) -> ChebyshevOperators:
    """Inner-node operators for n collocation points, x_j = cos(j pi/(n+1))."""
    if n < 2:
        raise ParameterError(f"need n >= 2 inner nodes, got {n}")
    n_intervals = n + 1
    full_nodes = np.cos(np.pi * np.arange(n_intervals + 1) / n_intervals)
    full_d1 = _differentiation_matrix(full_nodes)
    full_d2 = full_d1 @ full_d1
    full_w = clenshaw_curtis_weights(n_intervals)
    return ChebyshevOperators(
        nodes=full_nodes[1:-1].copy(),
        d1=full_d1[1:-1, 1:-1].copy(),
        d2=full_d2[1:-1, 1:-1].copy(),
        weights=full_w[1:-1].copy(),
        full_nodes=full_nodes,
        full_d1=full_d1,
        full_weights=full_w,
    )
