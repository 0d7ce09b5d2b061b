"""Riemannian center of mass of weighted point clouds."""

from __future__ import annotations

from typing import Optional

import numpy as np

from .errors import InjectivityError, KarcherError
from .geodesic import _norm_g, exp_map, log_map
from .geometry import Chart

Array = np.ndarray


def _normalize_weights(points, weights):
    A = points.shape[-2]
    if weights is None:
        weights = np.full(points.shape[:-1], 1.0 / A)
    weights = np.broadcast_to(np.asarray(weights, float), points.shape[:-1])
    if np.any(weights < 0):
        raise KarcherError("weights must be nonnegative")
    s = weights.sum(axis=-1, keepdims=True)
    if np.any(np.abs(s - 1.0) > 1e-12):
        weights = weights / s
    return weights


def karcher_mean(
    chart: Chart,
    points,
    weights=None,
    tol: float = 1e-10,
    max_iter: int = 100,
    m0: Optional[Array] = None,
) -> Array:
    """Center of mass by the iteration m <- exp_m(sum_a mu_a log_m q_a).

    ``points`` has shape (..., A, n); leading axes index independent clouds.
    """
    q = np.asarray(points, float)
    mu = _normalize_weights(q, weights)
    m = np.einsum("...a,...ai->...i", mu, q) if m0 is None else np.array(m0, float)
    for _ in range(max_iter):
        try:
            logs = log_map(chart, m[..., None, :], q)
        except InjectivityError as exc:
            raise KarcherError(f"cloud too spread: {exc}") from exc
        grad = np.einsum("...a,...ai->...i", mu, logs)
        if np.all(_norm_g(chart, m, grad) <= tol):
            return m
        m = exp_map(chart, m, grad)
    raise KarcherError("Karcher iteration did not converge")


def gradient_residual(chart: Chart, m, points, weights=None) -> Array:
    q = np.asarray(points, float)
    mu = _normalize_weights(q, weights)
    logs = log_map(chart, np.asarray(m, float)[..., None, :], q)
    return _norm_g(chart, np.asarray(m, float), np.einsum("...a,...ai->...i", mu, logs))


def variance_functional(chart: Chart, m, points, weights=None) -> Array:
    """P(m) = 1/2 sum_a mu_a dist^2(m, q_a)."""
    q = np.asarray(points, float)
    mu = _normalize_weights(q, weights)
    m = np.asarray(m, float)
    logs = log_map(chart, np.broadcast_to(m[..., None, :], q.shape), q)
    d2 = _norm_g(chart, np.broadcast_to(m[..., None, :], q.shape), logs) ** 2
    return 0.5 * np.einsum("...a,...a->...", mu, d2)


def com_linearization_error(chart: Chart, points, weights, p) -> float:
    """|log_p(mean) - sum_a mu_a log_p(q_a)| in the metric at p."""
    q = np.asarray(points, float)
    mu = _normalize_weights(q, weights)
    p = np.asarray(p, float)
    mean = karcher_mean(chart, q, mu)
    lin = np.einsum("...a,...ai->...i", mu, log_map(chart, p[..., None, :], q))
    diff = log_map(chart, p, mean) - lin
    return float(np.max(_norm_g(chart, p, diff)))
