"""Sequential variance-reduced solvers with sparse updates.

Two solvers live here: the sparse proximal solver, whose per-iteration work
touches only the extended support of the sampled row, and the dense baseline
that visits every coordinate each iteration.  Both share the compressed
gradient memory (one scalar per sample plus the running average) and apply
the squared-l2 term exactly at update time rather than storing it.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from .data import build_support_index
from .losses import full_objective, lipschitz_constant, smooth_gradient
from .penalties import prox_extended_slice

STEP_RULES = ("1/5L", "1/2L", "1/36L", "1/36nmu")


def resolve_step_size(step, L, n=None, mu=None):
    """Turn a step-size rule string (or explicit float) into a float."""
    if isinstance(step, (int, float)):
        if step <= 0:
            raise ValueError("step size must be positive")
        return float(step)
    rule = step.replace(" ", "")
    if rule == "1/5L":
        return 1.0 / (5.0 * L)
    if rule == "1/2L":
        return 1.0 / (2.0 * L)
    if rule == "1/36L":
        return 1.0 / (36.0 * L)
    if rule == "1/36nmu":
        if n is None or mu is None or mu <= 0:
            raise ValueError("rule 1/36nmu needs n and mu > 0")
        return 1.0 / (36.0 * n * mu)
    raise ValueError(f"unknown step rule {step!r}; known: {STEP_RULES}")


def worker_rng(seed, worker_id=0):
    """Seeded, per-worker independent random stream.

    Stream identity is (seed, worker_id); the sequential solver uses worker
    id 0 so a single-threaded parallel run replays the same samples.
    """
    return np.random.default_rng([int(seed), int(worker_id)])


@dataclass
class GradientMemory:
    """Compressed gradient table: one scalar per sample plus the average.

    The implied per-sample gradient is scalars[i] * a_i, so its support is
    always the row support.  ``avg`` tracks (1/n) sum_i scalars[i] * a_i
    incrementally; ``resync_average`` removes accumulated rounding drift.
    """

    scalars: np.ndarray
    avg: np.ndarray

    @classmethod
    def zeros(cls, n, p):
        return cls(scalars=np.zeros(n), avg=np.zeros(p))

    @property
    def n(self):
        return len(self.scalars)


def resync_average(memory, data):
    """Recompute the running average exactly from the scalar table."""
    memory.avg[:] = data.features.rmatvec(memory.scalars) / data.n_samples
    return memory


@dataclass
class SolverConfig:
    step_size: object = "1/5L"
    epochs: int = 100
    seed: int = 0
    checkpoint_every: int = None
    tolerance: float = 0.0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if isinstance(self.step_size, (int, float)) and self.step_size <= 0:
            raise ValueError("step size must be positive")
        if self.checkpoint_every is not None and self.checkpoint_every < 1:
            raise ValueError("checkpoint_every must be >= 1")


@dataclass
class Trace:
    """Convergence trace: one row per checkpoint plus the final iterate."""

    iterations: list = field(default_factory=list)
    epochs: list = field(default_factory=list)
    objective: list = field(default_factory=list)
    wall_seconds: list = field(default_factory=list)
    threads: list = None
    distances: list = None
    final_x: np.ndarray = None
    meta: dict = field(default_factory=dict)

    def append(self, iteration, n, objective, wall, distance=None, threads=None):
        self.iterations.append(int(iteration))
        self.epochs.append(iteration / n)
        self.objective.append(float(objective))
        self.wall_seconds.append(float(wall))
        if distance is not None:
            if self.distances is None:
                self.distances = []
            self.distances.append(float(distance))
        if threads is not None:
            if self.threads is None:
                self.threads = []
            self.threads.append(int(threads))

    def to_csv(self, path):
        header = ["iterations", "epochs", "objective", "wall_seconds"]
        columns = [self.iterations, self.epochs, self.objective, self.wall_seconds]
        if self.threads is not None:
            header += ["threads", "counter_iterations"]
            columns += [self.threads, self.iterations]
        with open(path, "w") as fh:
            fh.write(",".join(header) + "\n")
            for row in zip(*columns):
                fh.write(",".join(repr(v) if isinstance(v, float) else str(v) for v in row) + "\n")

    def write_sidecar(self, path):
        with open(path, "w") as fh:
            json.dump(self.meta, fh, indent=2, default=_json_default)
            fh.write("\n")


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer, np.floating)):
        return obj.item()
    return str(obj)


def sparse_gradient_estimate(i, x, memory, index, loss, data):
    """Variance-reduced gradient estimate restricted to the extended support.

    Returns (coords, values, new_scalar): the estimate lives on ``coords``
    (the extended-support coordinates of sample i) and is zero elsewhere.
    The squared-l2 term enters through the weighted projection, which keeps
    the estimate sparse and, averaged over i, unbiased for the full smooth
    gradient.
    """
    cols, vals = data.features.row(i)
    ecols, weights, pos = index.ext_slice(i)
    xe = x[ecols]
    margin = float(vals @ xe[pos]) if len(cols) else 0.0
    new_scalar = loss.derivative(margin, data.labels[i])
    v = weights * (memory.avg[ecols] + loss.lambda1 * xe)
    v[pos] += (new_scalar - memory.scalars[i]) * vals
    return ecols, v, new_scalar


def sps_step(x, memory, i, gamma, penalty, index, loss, data):
    """One sparse proximal step in place: update x on T_i and the memory.

    The iterate is moved by the computed delta (rather than assigned), so
    the arithmetic matches the coordinate-add form used by the lock-free
    parallel variant exactly.
    """
    cols, vals = data.features.row(i)
    ecols, v, new_scalar = sparse_gradient_estimate(i, x, memory, index, loss, data)
    if len(ecols):
        xe = x[ecols]
        z = prox_extended_slice(penalty, index, i, gamma, xe - gamma * v)
        x[ecols] = xe + (z - xe)
    delta_scalar = new_scalar - memory.scalars[i]
    if len(cols):
        memory.avg[cols] += (delta_scalar / memory.n) * vals
    memory.scalars[i] = new_scalar


def dense_saga_step(x, memory, i, gamma, penalty, loss, data):
    """One dense baseline step: full-vector estimate and full prox of h.

    Uses the same compressed memory and exact l2 handling as the sparse
    solver; with a single all-coordinates block the two algorithms produce
    bit-identical iterates.
    """
    cols, vals = data.features.row(i)
    margin = float(vals @ x[cols]) if len(cols) else 0.0
    new_scalar = loss.derivative(margin, data.labels[i])
    u = memory.avg + loss.lambda1 * x
    u[cols] += (new_scalar - memory.scalars[i]) * vals
    z = penalty.prox(x - gamma * u, gamma)
    x += z - x
    delta_scalar = new_scalar - memory.scalars[i]
    if len(cols):
        memory.avg[cols] += (delta_scalar / memory.n) * vals
    memory.scalars[i] = new_scalar


def _prepare(data, loss, partition, config, index=None):
    if index is None:
        index = build_support_index(data.features, partition)
    info = lipschitz_constant(data, loss)
    mu = loss.lambda1
    gamma = resolve_step_size(config.step_size, info.L, data.n_samples, mu if mu > 0 else None)
    return index, info, gamma


def run_sequential(data, loss, penalty, partition, config, index=None,
                   track_distance_to=None):
    """Run the sparse proximal solver from x0 = 0 with zero-initialized memory.

    Samples uniformly from a seeded stream, checkpoints the objective every
    ``checkpoint_every`` iterations (default: once per epoch, plus an
    initial checkpoint at iteration 0), and optionally records the squared
    distance to a supplied reference point at every checkpoint.  With
    ``tolerance > 0``, stops early once the objective changes by less than
    the tolerance over a full epoch.
    """
    index, info, gamma = _prepare(data, loss, partition, config, index)
    n, p = data.n_samples, data.n_features
    every = config.checkpoint_every or n
    x = np.zeros(p)
    memory = GradientMemory.zeros(n, p)
    rng = worker_rng(config.seed, 0)
    total = config.epochs * n
    samples = rng.integers(0, n, size=total)

    trace = Trace(meta=_run_meta(data, loss, penalty, config, index, info, gamma, threads=1))
    start = time.perf_counter()
    track = track_distance_to is not None

    def checkpoint(t):
        obj = full_objective(data, loss, penalty, x, index.partition)
        dist = float(np.sum((x - track_distance_to) ** 2)) if track else None
        trace.append(t, n, obj, time.perf_counter() - start, distance=dist)

    checkpoint(0)
    last_epoch_obj = trace.objective[0]
    for t in range(total):
        sps_step(x, memory, int(samples[t]), gamma, penalty, index, loss, data)
        done = t + 1
        if done % every == 0 or done == total:
            checkpoint(done)
            if config.tolerance > 0 and done % n == 0:
                if abs(trace.objective[-1] - last_epoch_obj) < config.tolerance:
                    break
                last_epoch_obj = trace.objective[-1]
    trace.final_x = x
    trace.meta["iterations_run"] = trace.iterations[-1]
    return trace


def run_dense(data, loss, penalty, partition, config, track_distance_to=None):
    """Dense baseline runner with the same trace contract as run_sequential."""
    index, info, gamma = _prepare(data, loss, partition, config)
    n, p = data.n_samples, data.n_features
    every = config.checkpoint_every or n
    x = np.zeros(p)
    memory = GradientMemory.zeros(n, p)
    rng = worker_rng(config.seed, 0)
    total = config.epochs * n
    samples = rng.integers(0, n, size=total)

    trace = Trace(meta=_run_meta(data, loss, penalty, config, index, info, gamma, threads=1,
                                 algorithm="dense-saga"))
    start = time.perf_counter()
    track = track_distance_to is not None

    def checkpoint(t):
        obj = full_objective(data, loss, penalty, x, index.partition)
        dist = float(np.sum((x - track_distance_to) ** 2)) if track else None
        trace.append(t, n, obj, time.perf_counter() - start, distance=dist)

    checkpoint(0)
    last_epoch_obj = trace.objective[0]
    for t in range(total):
        dense_saga_step(x, memory, int(samples[t]), gamma, penalty, loss, data)
        done = t + 1
        if done % every == 0 or done == total:
            checkpoint(done)
            if config.tolerance > 0 and done % n == 0:
                if abs(trace.objective[-1] - last_epoch_obj) < config.tolerance:
                    break
                last_epoch_obj = trace.objective[-1]
    trace.final_x = x
    trace.meta["iterations_run"] = trace.iterations[-1]
    return trace


def fixed_point_residual(x, data, loss, penalty, index, gamma):
    """Distance of x from one weighted prox-gradient application of itself.

    Zero exactly at solutions: the optimum is the unique fixed point of
    z -> prox of the reweighted penalty at (z - gamma * D grad f(z)), with
    D the diagonal of block weights.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    grad = smooth_gradient(data, loss, x)
    d = index.coord_weights()
    inner = x - gamma * d * grad
    z = np.array(inner)
    if penalty.separable:
        z = penalty.prox(inner, gamma * d)
    else:
        for bid, coords in enumerate(index.partition.blocks):
            z[coords] = penalty.prox_block(inner[coords], gamma * index.d_B[bid])
    return float(np.linalg.norm(x - z))


def _run_meta(data, loss, penalty, config, index, info, gamma, threads, algorithm="sparse-saga"):
    mu = loss.lambda1
    return {
        "algorithm": algorithm,
        "n_samples": data.n_samples,
        "n_features": data.n_features,
        "loss": loss.kind,
        "lambda1": loss.lambda1,
        "penalty": repr(penalty),
        "step_size": gamma,
        "step_rule": config.step_size if isinstance(config.step_size, str) else None,
        "epochs": config.epochs,
        "seed": config.seed,
        "threads": threads,
        "L": info.L,
        "kappa": info.L / mu if mu > 0 else None,
        "delta": index.delta,
    }
