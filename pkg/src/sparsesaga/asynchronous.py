"""Lock-free asynchronous parallel solver.

Worker threads repeatedly apply the sparse proximal step to a shared
parameter vector through coordinate-level atomic operations only: reads are
inconsistent (coordinate-by-coordinate, no snapshot), writes are atomic
adds, and the per-sample memory scalar is updated with an atomic swap so
the running average can be credited against the value actually replaced.
No thread ever blocks on another; the only joins are at run start and end.

Progress is tracked by a global iteration counter that workers bump in
batches, so measuring it does not perturb the asynchrony.  A monitor in the
calling thread snapshots the shared vector at checkpoint intervals to
record the objective.
"""

from __future__ import annotations

import math
import threading
import time
from dataclasses import dataclass

import numpy as np

from . import _atomics
from .losses import full_objective
from .penalties import prox_extended_slice
from .saga import SolverConfig, Trace, _prepare, _run_meta, resync_average, worker_rng


@dataclass
class AsyncConfig(SolverConfig):
    threads: int = 1
    counter_batch: int = 100

    def __post_init__(self):
        super().__post_init__()
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        if self.counter_batch < 1:
            raise ValueError("counter_batch must be >= 1")


class SharedState:
    """Shared arrays accessed only through coordinate-level atomics.

    ``x`` and ``avg`` have one float64 cell per coordinate, ``scalars`` one
    per sample, and ``counter`` is a single int64 cell that undercounts the
    true iteration total by at most (batch - 1) * threads at any instant.
    """

    def __init__(self, n, p):
        self.x = np.zeros(p)
        self.avg = np.zeros(p)
        self.scalars = np.zeros(n)
        self.counter = np.zeros(1, dtype=np.int64)
        self._all_coords = np.arange(p, dtype=np.int64)

    def read_coords(self, coords, out=None):
        if out is None:
            out = np.empty(len(coords))
        _atomics.gather(self.x, coords, out)
        return out

    def snapshot_x(self):
        return self.read_coords(self._all_coords)

    def counter_value(self):
        return _atomics.fetch_add_i64(self.counter, 0, 0)

    def bump_counter(self, k):
        _atomics.fetch_add_i64(self.counter, 0, int(k))


def atomic_float_add(cell, index, delta):
    """Sequentially-consistent add on one float64 cell via CAS retries."""
    _atomics.add(cell, int(index), float(delta))


def worker_iteration(shared, i, gamma, penalty, index, loss, data):
    """One lock-free iteration on sample i; returns the applied x delta.

    Order matches the implemented parallel algorithm: sample first, then
    inconsistent coordinate reads of x, the memory scalar and the average
    on the extended support, local computation of the delta, and finally
    atomic coordinate writes (x add, scalar swap, average add on the row
    support).
    """
    cols, vals = data.features.row(i)
    ecols, weights, pos = index.ext_slice(i)

    xe = np.empty(len(ecols))
    _atomics.gather(shared.x, ecols, xe)
    old_scalar = _atomics.load(shared.scalars, int(i))
    ae = np.empty(len(ecols))
    _atomics.gather(shared.avg, ecols, ae)

    margin = float(vals @ xe[pos]) if len(cols) else 0.0
    new_scalar = loss.derivative(margin, data.labels[i])

    v = weights * (ae + loss.lambda1 * xe)
    v[pos] += (new_scalar - old_scalar) * vals
    if len(ecols):
        z = prox_extended_slice(penalty, index, i, gamma, xe - gamma * v)
        delta_x = z - xe
        _atomics.scatter_add(shared.x, ecols, delta_x)
    else:
        delta_x = np.empty(0)
    # Swap the memory scalar atomically and credit the average with the
    # delta against the value actually replaced.  A plain store would lose
    # a concurrent update of the same sample and leave the running average
    # permanently inconsistent with the scalar table.
    replaced = _atomics.exchange(shared.scalars, int(i), new_scalar)
    if len(cols):
        _atomics.scatter_add(shared.avg, cols,
                             ((new_scalar - replaced) / data.n_samples) * vals)
    return delta_x


def worker_sample_sequence(seed, worker_id, count, n):
    """The exact sample sequence worker ``worker_id`` draws for this run."""
    return worker_rng(seed, worker_id).integers(0, n, size=count)


def split_iterations(total, threads):
    base = total // threads
    counts = [base + (1 if w < total % threads else 0) for w in range(threads)]
    return counts


def run_async(data, loss, penalty, partition, config, index=None,
              track_distance_to=None, max_threads=64):
    """Run the lock-free parallel solver and return its trace.

    Spawns ``config.threads`` workers, each performing its share of
    epochs * n iterations with an independent seeded sample stream
    (stream id = worker id).  The calling thread acts as monitor: whenever
    the global counter crosses a checkpoint mark it snapshots x (atomic
    coordinate reads), evaluates the objective, and records a trace row.
    A worker exception aborts the run with the original traceback attached.
    """
    if config.threads > max_threads:
        raise ValueError(f"threads={config.threads} exceeds the cap of {max_threads}")
    index, info, gamma = _prepare(data, loss, partition, config, index)
    n, p = data.n_samples, data.n_features
    every = config.checkpoint_every or n
    total = config.epochs * n
    shared = SharedState(n, p)
    counts = split_iterations(total, config.threads)

    errors = []

    def work(worker_id, count):
        try:
            samples = worker_sample_sequence(config.seed, worker_id, count, n)
            batch = config.counter_batch
            pending = 0
            for k in range(count):
                worker_iteration(shared, int(samples[k]), gamma, penalty, index, loss, data)
                pending += 1
                if pending == batch:
                    shared.bump_counter(pending)
                    pending = 0
            if pending:
                shared.bump_counter(pending)
        except BaseException as exc:  # surfaced after join
            errors.append((worker_id, exc))

    threads = [
        threading.Thread(target=work, args=(w, counts[w]), name=f"saga-worker-{w}")
        for w in range(config.threads)
    ]

    meta = _run_meta(data, loss, penalty, config, index, info, gamma,
                     threads=config.threads, algorithm="async-saga")
    meta["counter_batch"] = config.counter_batch
    trace = Trace(meta=meta)
    track = track_distance_to is not None
    start = time.perf_counter()

    def checkpoint(iteration, x):
        obj = full_objective(data, loss, penalty, x, index.partition)
        dist = float(np.sum((x - track_distance_to) ** 2)) if track else None
        trace.append(iteration, n, obj, time.perf_counter() - start,
                     distance=dist, threads=config.threads)

    checkpoint(0, shared.snapshot_x())
    for t in threads:
        t.start()
    next_mark = every
    while any(t.is_alive() for t in threads):
        c = shared.counter_value()
        if c >= next_mark and next_mark < total:
            checkpoint(c, shared.snapshot_x())
            while next_mark <= c:
                next_mark += every
        else:
            time.sleep(0.0005)
    for t in threads:
        t.join()
    if errors:
        worker_id, exc = errors[0]
        raise RuntimeError(f"worker {worker_id} failed: {exc!r}") from exc

    final_x = shared.snapshot_x()
    checkpoint(shared.counter_value(), final_x)
    trace.final_x = final_x
    trace.meta["iterations_run"] = trace.iterations[-1]
    trace.shared = shared
    return trace


def iterations_to_target(trace, fstar, target):
    """Counter iterations at which suboptimality first reaches the target.

    Interpolates log-linearly between the straddling checkpoints; returns
    (iterations, wall_seconds) or None when the target is never reached.
    """
    floor = 1e-300
    subopt = [max(o - fstar, floor) for o in trace.objective]
    for k, s in enumerate(subopt):
        if s <= target:
            if k == 0:
                return trace.iterations[0], trace.wall_seconds[0]
            s_prev = subopt[k - 1]
            frac = math.log(s_prev / target) / math.log(s_prev / s)
            it = trace.iterations[k - 1] + frac * (trace.iterations[k] - trace.iterations[k - 1])
            wall = trace.wall_seconds[k - 1] + frac * (trace.wall_seconds[k] - trace.wall_seconds[k - 1])
            return it, wall
    return None


def measure_speedup(data, loss, penalty, partition, config, cores, target_subopt, fstar):
    """Iteration-count and wall-clock speedups to a target suboptimality.

    The first entry of ``cores`` must be 1 and serves as the baseline.  The
    iteration-count ("theoretical") speedup for c cores is
    c * iterations(1 core) / iterations(c cores); it counts work, not time,
    so it is hardware-independent.  Unreached targets are flagged, not
    fatal.  Returns a list of row dicts and the traces.
    """
    if not cores or cores[0] != 1 or sorted(cores) != list(cores):
        raise ValueError("cores must be ascending and start with 1")
    rows = []
    traces = {}
    base = None
    for c in cores:
        run_cfg = AsyncConfig(step_size=config.step_size, epochs=config.epochs,
                              seed=config.seed, checkpoint_every=config.checkpoint_every,
                              tolerance=0.0, threads=c,
                              counter_batch=config.counter_batch)
        trace = run_async(data, loss, penalty, partition, run_cfg)
        traces[c] = trace
        hit = iterations_to_target(trace, fstar, target_subopt)
        if c == 1:
            base = hit
        if hit is None or base is None:
            rows.append({"cores": c, "wall_speedup": float("nan"),
                         "theoretical_speedup": float("nan"), "reached": False})
            continue
        iters, wall = hit
        base_iters, base_wall = base
        if c == 1:
            wall_speedup = theoretical = 1.0
        else:
            wall_speedup = base_wall / wall if wall > 0 else float("inf")
            theoretical = c * base_iters / iters if iters > 0 else float("inf")
        rows.append({
            "cores": c,
            "wall_speedup": wall_speedup,
            "theoretical_speedup": theoretical,
            "reached": True,
        })
    return rows, traces


def speedup_table_csv(rows, path):
    with open(path, "w") as fh:
        fh.write("cores,wall_speedup,theoretical_speedup,reached\n")
        for r in rows:
            fh.write(f"{r['cores']},{r['wall_speedup']!r},{r['theoretical_speedup']!r},"
                     f"{str(r['reached']).lower()}\n")


def final_memory(trace, data):
    """Reconstruct a consistent memory view from a finished parallel run."""
    from .saga import GradientMemory

    shared = trace.shared
    memory = GradientMemory(scalars=shared.scalars.copy(), avg=shared.avg.copy())
    return memory


def resync_shared_average(trace, data):
    """Exact recomputation of the shared average after workers have joined."""
    memory = final_memory(trace, data)
    resync_average(memory, data)
    return memory
