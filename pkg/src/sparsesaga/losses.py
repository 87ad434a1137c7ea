"""Scalar losses for linearly parametrized models and related constants.

The smooth part of the objective is (1/n) sum_i loss(a_i^T x, b_i)
+ (lambda1/2) ||x||^2.  The squared-l2 term is never stored in the gradient
memory; solvers apply it exactly at update time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


LOGISTIC = "logistic"
SQUARED = "squared"

# Upper bounds on the scalar second derivative of each loss.
_CURVATURE = {LOGISTIC: 0.25, SQUARED: 1.0}


@dataclass(frozen=True)
class Loss:
    kind: str
    lambda1: float = 0.0

    def __post_init__(self):
        if self.kind not in _CURVATURE:
            raise ValueError(f"unknown loss kind {self.kind!r}")
        if self.lambda1 < 0:
            raise ValueError("lambda1 must be nonnegative")

    def scalar(self, z, b):
        return loss_scalar(self.kind, z, b)

    def derivative(self, z, b):
        return loss_scalar(self.kind, z, b)[1]

    def values(self, z, b):
        """Vectorized loss values for margins z and labels b."""
        if self.kind == LOGISTIC:
            return _log1pexp(-np.asarray(b) * np.asarray(z))
        diff = np.asarray(z) - np.asarray(b)
        return 0.5 * diff * diff

    def derivatives(self, z, b):
        """Vectorized scalar derivatives d/dz loss(z, b)."""
        if self.kind == LOGISTIC:
            return -np.asarray(b) * _sigmoid(-np.asarray(b) * np.asarray(z))
        return np.asarray(z) - np.asarray(b)


def _log1pexp(t):
    # log(1 + exp(t)) without overflow: for t > 0 use t + log1p(exp(-t)).
    t = np.asarray(t, dtype=np.float64)
    out = np.empty_like(t)
    pos = t > 0
    out[pos] = t[pos] + np.log1p(np.exp(-t[pos]))
    out[~pos] = np.log1p(np.exp(t[~pos]))
    return out


def _sigmoid(t):
    t = np.asarray(t, dtype=np.float64)
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    et = np.exp(t[~pos])
    out[~pos] = et / (1.0 + et)
    return out


def loss_scalar(kind, z, b):
    """(value, derivative) of the scalar loss at margin z with label b."""
    if kind == LOGISTIC:
        t = -b * z
        if t > 0:
            value = t + np.log1p(np.exp(-t))
            sig = 1.0 / (1.0 + np.exp(-t))
        else:
            et = np.exp(t)
            value = np.log1p(et)
            sig = et / (1.0 + et)
        return float(value), float(-b * sig)
    diff = z - b
    return 0.5 * diff * diff, diff


@dataclass(frozen=True)
class SmoothnessInfo:
    L: float
    per_sample_L: np.ndarray

    @property
    def max_L(self):
        return self.L


def lipschitz_constant(data, loss):
    """Per-sample gradient Lipschitz bounds c * ||a_i||^2 + lambda1."""
    if data.n_samples == 0:
        raise ValueError("dataset is empty")
    c = _CURVATURE[loss.kind]
    per_sample = c * data.features.row_sqnorms() + loss.lambda1
    return SmoothnessInfo(L=float(per_sample.max()), per_sample_L=per_sample)


def margins(data, x):
    return data.features.matvec(x)


def smooth_value(data, loss, x):
    """(1/n) sum loss(a_i^T x, b_i) + (lambda1/2) ||x||^2."""
    z = margins(data, x)
    return float(np.mean(loss.values(z, data.labels))) + 0.5 * loss.lambda1 * float(x @ x)


def smooth_gradient(data, loss, x):
    """Full gradient of the smooth part, dense."""
    z = margins(data, x)
    d = loss.derivatives(z, data.labels)
    return data.features.rmatvec(d) / data.n_samples + loss.lambda1 * x


def sample_gradient(data, loss, x, i):
    """Gradient of f_i at x (dense vector), including the l2 term."""
    cols, vals = data.features.row(i)
    z = float(vals @ x[cols])
    g = loss.lambda1 * np.asarray(x, dtype=np.float64).copy()
    g[cols] += loss.derivative(z, data.labels[i]) * vals
    return g


def full_objective(data, loss, penalty, x, partition=None):
    """Smooth part plus penalty value."""
    return smooth_value(data, loss, x) + penalty.value(x, partition)
