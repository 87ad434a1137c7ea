"""Deterministic generators for desk-scale test problems."""

from __future__ import annotations

import numpy as np

from .data import CsrMatrix, Dataset
from .losses import LOGISTIC, SQUARED

LABEL_NOISE = 0.05  # fraction of flipped / perturbed labels; keeps kappa moderate


def gen_sparse_glm(n, p, density, seed, loss_kind=LOGISTIC):
    """Sparse design with planted sparse coefficients and noisy labels.

    Each row gets exactly max(1, round(density * p)) nonzeros at seeded
    random positions with standard normal values, so the per-row density is
    exact rather than Bernoulli.  Labels come from a planted model with 10%
    nonzero coefficients, passed through the loss's link, with 5% noise
    (sign flips for logistic, additive for squared).  Pure function of its
    arguments.
    """
    if n < 1 or p < 1:
        raise ValueError("n and p must be >= 1")
    if not 0 < density <= 1:
        raise ValueError("density must be in (0, 1]")
    rng = np.random.default_rng(int(seed))
    k = max(1, round(density * p))
    offsets = np.arange(n + 1, dtype=np.int64) * k
    cols = np.empty(n * k, dtype=np.int64)
    vals = rng.standard_normal(n * k)
    for i in range(n):
        cols[i * k:(i + 1) * k] = np.sort(rng.choice(p, size=k, replace=False))
    features = CsrMatrix(n_rows=n, n_cols=p, row_offsets=offsets,
                         col_indices=cols, values=vals)

    planted = np.zeros(p)
    support = rng.choice(p, size=max(1, p // 10), replace=False)
    planted[support] = rng.standard_normal(len(support))
    margins = features.matvec(planted)
    if loss_kind == LOGISTIC:
        labels = np.where(margins >= 0, 1.0, -1.0)
        flips = rng.random(n) < LABEL_NOISE
        labels[flips] *= -1.0
    elif loss_kind == SQUARED:
        scale = float(np.std(margins)) or 1.0
        labels = margins + LABEL_NOISE * scale * rng.standard_normal(n)
    else:
        raise ValueError(f"unknown loss kind {loss_kind!r}")
    return Dataset(features=features, labels=labels)


def gen_disjoint_glm(n, p, seed, coords_per_row=2, loss_kind=LOGISTIC):
    """Near-disjoint supports: row i covers a fixed small window of coordinates.

    Row i touches coordinates {k*i mod p, ..., k*i + k - 1 mod p} with
    k = coords_per_row, so every coordinate appears in at most
    ceil(n*k/p) + 1 rows and the block-sharing measure stays close to its
    1/n floor.  Rows are normalized to unit norm to keep the smoothness
    constant (and hence the condition number) small.  No coordinate is left
    uncovered as long as n * k >= p.
    """
    if n < 1 or p < 1 or coords_per_row < 1:
        raise ValueError("n, p and coords_per_row must be >= 1")
    if n * coords_per_row < p:
        raise ValueError("need n * coords_per_row >= p to cover every coordinate")
    rng = np.random.default_rng(int(seed))
    k = coords_per_row
    offsets = np.arange(n + 1, dtype=np.int64) * k
    cols = np.empty(n * k, dtype=np.int64)
    vals = rng.standard_normal(n * k)
    for i in range(n):
        window = (np.arange(k, dtype=np.int64) + k * i) % p
        window.sort()
        cols[i * k:(i + 1) * k] = window
        seg = vals[i * k:(i + 1) * k]
        vals[i * k:(i + 1) * k] = seg / np.linalg.norm(seg)
    features = CsrMatrix(n_rows=n, n_cols=p, row_offsets=offsets,
                         col_indices=cols, values=vals)
    planted = np.zeros(p)
    support = rng.choice(p, size=max(1, p // 10), replace=False)
    planted[support] = rng.standard_normal(len(support))
    margins = features.matvec(planted)
    if loss_kind == LOGISTIC:
        labels = np.where(margins >= 0, 1.0, -1.0)
        flips = rng.random(n) < LABEL_NOISE
        labels[flips] *= -1.0
    else:
        scale = float(np.std(margins)) or 1.0
        labels = margins + LABEL_NOISE * scale * rng.standard_normal(n)
    return Dataset(features=features, labels=labels)


def lambda_max(data):
    """Smallest l1 weight at which the all-zeros vector is optimal (logistic)."""
    grad0 = data.features.rmatvec(-0.5 * data.labels) / data.n_samples
    return float(np.max(np.abs(grad0)))


def gen_regularization(data, target_nnz_fraction, solve, max_steps=40,
                       rel_window=0.2):
    """Pick (lambda1, lambda2) for a target solution density.

    lambda1 is fixed at 1/n.  lambda2 is found by bisection on the nonzero
    fraction of the solution returned by ``solve(lambda1, lambda2)``, which
    must return a coefficient vector; the search stops once the fraction is
    within +-20% of the target.  Raises if the bracket never tightens.
    """
    if data.n_samples == 0:
        raise ValueError("dataset is empty")
    lam1 = 1.0 / data.n_samples
    if target_nnz_fraction >= 1.0:
        return lam1, 0.0
    lo, hi = 0.0, lambda_max(data)
    lo_frac = _nnz_fraction(solve(lam1, lo))
    if lo_frac <= target_nnz_fraction * (1 + rel_window):
        return lam1, lo
    for _ in range(max_steps):
        mid = 0.5 * (lo + hi)
        frac = _nnz_fraction(solve(lam1, mid))
        if abs(frac - target_nnz_fraction) <= rel_window * target_nnz_fraction:
            return lam1, mid
        if frac > target_nnz_fraction:
            lo = mid
        else:
            hi = mid
    raise RuntimeError(f"bisection did not converge in {max_steps} steps "
                       f"(bracket [{lo}, {hi}])")


def _nnz_fraction(x):
    x = np.asarray(x)
    return float(np.count_nonzero(np.abs(x) > 0)) / len(x)
