"""Named property checks over the solver stack.

Each check is an independent function returning a small report dict with a
pass flag and a numeric margin.  ``run_checks`` executes a filtered subset
and is the engine behind the command-line ``verify`` subcommand; the test
suite reuses individual checks so the two never drift apart.
"""

from __future__ import annotations

import json
import threading
from pathlib import Path

import numpy as np

from . import _atomics
from .asynchronous import AsyncConfig, run_async
from .data import BlockPartition, build_support_index, singleton_partition, single_block_partition
from .diagnostics import (
    brute_force_prox,
    default_cache_dir,
    problem_hash,
    rate_envelope_check,
    reference_optimum,
    theorem_constant,
    theorem_rate_factor,
)
from .losses import LOGISTIC, Loss, full_objective, lipschitz_constant, smooth_gradient
from .penalties import BoxPenalty, GroupL2Penalty, L1Penalty, ZeroPenalty
from .problems import gen_regularization, gen_sparse_glm
from .saga import (
    GradientMemory,
    SolverConfig,
    dense_saga_step,
    fixed_point_residual,
    resolve_step_size,
    resync_average,
    run_sequential,
    sparse_gradient_estimate,
    sps_step,
    worker_rng,
)

ACCEPTANCE_N = 200
ACCEPTANCE_P = 50
ACCEPTANCE_DENSITY = 0.1
ACCEPTANCE_SEED = 42
ACCEPTANCE_NNZ_TARGET = 0.1


def acceptance_problem(cache_dir=None):
    """The calibrated reference instance used by most end-to-end checks.

    A 200 x 50 sparse logistic problem with lambda1 = 1/n and the l1 weight
    picked by bisection so roughly 10% of the solution coordinates are
    nonzero.  The bisection result is cached on disk so repeat calls are
    cheap.
    """
    data = gen_sparse_glm(ACCEPTANCE_N, ACCEPTANCE_P, ACCEPTANCE_DENSITY,
                          ACCEPTANCE_SEED)
    partition = singleton_partition(data.n_features)
    lam1 = 1.0 / data.n_samples
    lam2 = _cached_lambda2(data, partition, lam1, ACCEPTANCE_NNZ_TARGET, cache_dir)
    return data, Loss(LOGISTIC, lam1), L1Penalty(lam2), partition


def _cached_lambda2(data, partition, lam1, target, cache_dir):
    cache_dir = Path(cache_dir) if cache_dir is not None else default_cache_dir()
    key = problem_hash(data, Loss(LOGISTIC, lam1), ZeroPenalty(), partition,
                       extra=f"lambda2|{target}")
    path = cache_dir / f"lambda2-{key}.json"
    if path.exists():
        return json.loads(path.read_text())["lambda2"]

    def solve(l1, l2):
        cfg = SolverConfig(step_size="1/5L", epochs=100, seed=0)
        trace = run_sequential(data, Loss(LOGISTIC, l1), L1Penalty(l2),
                               partition, cfg)
        return trace.final_x

    _, lam2 = gen_regularization(data, target, solve)
    cache_dir.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps({"lambda2": lam2}) + "\n")
    return lam2


def _report(name, passed, margin, detail=""):
    return {"name": name, "passed": bool(passed), "margin": float(margin),
            "detail": detail}


def _random_partition(rng, p):
    perm = rng.permutation(p)
    n_blocks = int(rng.integers(1, p + 1))
    cuts = np.sort(rng.choice(np.arange(1, p), size=n_blocks - 1, replace=False)) if n_blocks > 1 else np.array([], dtype=int)
    pieces = np.split(perm, cuts)
    blocks = [np.sort(b) for b in pieces]
    block_of = np.empty(p, dtype=np.int64)
    for bid, coords in enumerate(blocks):
        block_of[coords] = bid
    return BlockPartition(block_of, blocks)


def check_weights_identity(cache_dir=None):
    """Averaged over samples, the reweighted projections compose to the identity."""
    rng = np.random.default_rng(20)
    worst = 0.0
    for case in range(20):
        n = int(rng.integers(30, 51))
        p = int(rng.integers(5, 21))
        data = gen_sparse_glm(n, p, float(rng.uniform(0.5, 0.9)), int(rng.integers(1e6)))
        partition = _random_partition(rng, p)
        index = build_support_index(data.features, partition)
        acc = np.zeros(p)
        for i in range(n):
            for bid in index.extended_support[i]:
                acc[partition.blocks[bid]] += index.d_B[bid]
        worst = max(worst, float(np.max(np.abs(acc / n - 1.0))))
    return _report("weights-identity", worst <= 1e-12, 1e-12 - worst,
                   f"max |E D - I| = {worst:.3e} over 20 random instances")


def check_weights_penalty_mean(cache_dir=None):
    """The reweighted per-sample penalty surrogate averages back to the penalty."""
    rng = np.random.default_rng(21)
    worst = 0.0
    for case in range(20):
        n = int(rng.integers(30, 51))
        p = int(rng.integers(5, 21))
        data = gen_sparse_glm(n, p, float(rng.uniform(0.5, 0.9)), int(rng.integers(1e6)))
        partition = _random_partition(rng, p)
        index = build_support_index(data.features, partition)
        penalty = L1Penalty(float(rng.uniform(0.1, 2.0))) if case % 2 else \
            GroupL2Penalty(float(rng.uniform(0.1, 2.0)))
        x = rng.standard_normal(p)
        h = penalty.value(x, partition)
        total = 0.0
        for i in range(n):
            phi = 0.0
            for bid in index.extended_support[i]:
                coords = partition.blocks[bid]
                phi += index.d_B[bid] * penalty.value(x[coords])
            total += phi
        worst = max(worst, abs(total / n - h))
    return _report("weights-penalty-mean", worst <= 1e-12, 1e-12 - worst,
                   f"max |E phi - h| = {worst:.3e} over 20 random instances")


def _subgradient_violation(penalty, z, v, gamma):
    """Max violation of (v - z)/gamma being a subgradient of the penalty at z."""
    g = (v - z) / gamma
    if isinstance(penalty, L1Penalty):
        lam = penalty.lam2
        viol = 0.0
        for zk, gk, vk in zip(np.atleast_1d(z), np.atleast_1d(g), np.atleast_1d(v)):
            if zk != 0.0:
                viol = max(viol, abs(gk - lam * np.sign(zk)))
            else:
                viol = max(viol, abs(gk) - lam)
        return viol
    if isinstance(penalty, GroupL2Penalty):
        lam = penalty.lam2
        norm = np.linalg.norm(z)
        if norm > 0:
            return float(np.max(np.abs(g - lam * z / norm)))
        return max(0.0, float(np.linalg.norm(g)) - lam)
    if isinstance(penalty, BoxPenalty):
        viol = max(0.0, float(np.max(z - penalty.hi)), float(np.max(penalty.lo - z)))
        for zk, gk in zip(np.atleast_1d(z), np.atleast_1d(g)):
            if penalty.lo < zk < penalty.hi:
                viol = max(viol, abs(gk))
            elif zk <= penalty.lo:
                viol = max(viol, gk)  # normal cone points down at the lower face
            else:
                viol = max(viol, -gk)
        return viol
    raise TypeError(f"no subgradient rule for {penalty!r}")


def check_prox_characterization(cache_dir=None):
    """prox output satisfies the optimality (subgradient inclusion) condition."""
    rng = np.random.default_rng(30)
    worst = 0.0
    for case in range(300):
        gamma = float(rng.uniform(0.01, 5.0))
        which = case % 3
        if which == 0:
            penalty = L1Penalty(float(rng.uniform(0.0, 3.0)))
            v = rng.standard_normal(int(rng.integers(1, 6)))
            z = penalty.prox(v, gamma)
        elif which == 1:
            penalty = GroupL2Penalty(float(rng.uniform(0.0, 3.0)))
            v = rng.standard_normal(int(rng.integers(1, 6)))
            z = penalty.prox_block(v, gamma)
        else:
            lo = float(rng.uniform(-2.0, 0.0))
            penalty = BoxPenalty(lo, lo + float(rng.uniform(0.1, 3.0)))
            v = rng.standard_normal(int(rng.integers(1, 6))) * 2.0
            z = penalty.prox(v, gamma)
        worst = max(worst, _subgradient_violation(penalty, z, v, gamma))
    return _report("prox-characterization", worst <= 1e-12, 1e-12 - worst,
                   f"max subgradient violation {worst:.3e} over 300 cases")


def check_prox_bruteforce(cache_dir=None):
    """Analytic scalar prox agrees with a grid-search oracle to 1e-5."""
    rng = np.random.default_rng(31)
    worst = 0.0
    for case in range(60):
        gamma = float(rng.uniform(0.05, 2.0))
        v = float(rng.uniform(-4.0, 4.0))
        which = case % 3
        if which == 0:
            penalty = L1Penalty(float(rng.uniform(0.0, 2.0)))
            z = float(penalty.prox(np.array([v]), gamma)[0])
        elif which == 1:
            penalty = GroupL2Penalty(float(rng.uniform(0.0, 2.0)))
            z = float(penalty.prox_block(np.array([v]), gamma)[0])
        else:
            penalty = BoxPenalty(-1.0, 1.0)
            z = float(penalty.prox(np.array([v]), gamma)[0])
        oracle = brute_force_prox(penalty, gamma, v)
        worst = max(worst, abs(z - oracle))
    return _report("prox-bruteforce", worst <= 1e-5, 1e-5 - worst,
                   f"max |analytic - grid oracle| = {worst:.3e} over 60 cases")


def check_gradient_unbiased(cache_dir=None):
    """The sparse variance-reduced estimate averages to the full smooth gradient."""
    rng = np.random.default_rng(40)
    worst = 0.0
    for case in range(10):
        n = int(rng.integers(20, 41))
        p = int(rng.integers(5, 16))
        data = gen_sparse_glm(n, p, float(rng.uniform(0.3, 0.8)), int(rng.integers(1e6)))
        partition = _random_partition(rng, p)
        index = build_support_index(data.features, partition)
        loss = Loss(LOGISTIC, float(rng.uniform(0.0, 0.1)))
        x = rng.standard_normal(p)
        memory = GradientMemory(scalars=rng.standard_normal(n), avg=np.zeros(p))
        resync_average(memory, data)
        mean = np.zeros(p)
        for i in range(n):
            ecols, v, _ = sparse_gradient_estimate(i, x, memory, index, loss, data)
            mean[ecols] += v
        dev = float(np.max(np.abs(mean / n - smooth_gradient(data, loss, x))))
        worst = max(worst, dev)
    return _report("gradient-unbiased", worst <= 1e-12, 1e-12 - worst,
                   f"max |E v - grad| = {worst:.3e} over 10 random instances")


def check_gradient_finite_diff(cache_dir=None):
    """Analytic smooth gradient matches central finite differences."""
    rng = np.random.default_rng(41)
    data = gen_sparse_glm(30, 12, 0.5, 5)
    loss = Loss(LOGISTIC, 0.05)
    x = rng.standard_normal(12)
    grad = smooth_gradient(data, loss, x)
    eps = 1e-6
    from .losses import smooth_value
    fd = np.empty_like(x)
    for j in range(len(x)):
        e = np.zeros_like(x)
        e[j] = eps
        fd[j] = (smooth_value(data, loss, x + e) - smooth_value(data, loss, x - e)) / (2 * eps)
    worst = float(np.max(np.abs(grad - fd)))
    return _report("gradient-finite-diff", worst <= 1e-5, 1e-5 - worst,
                   f"max |grad - finite diff| = {worst:.3e}")


def check_fixed_point(cache_dir=None):
    """The cached optimum is a fixed point of the weighted prox-gradient map."""
    data, loss, penalty, partition = acceptance_problem(cache_dir)
    ref = reference_optimum(data, loss, penalty, partition, cache_dir=cache_dir)
    index = build_support_index(data.features, partition)
    gamma = resolve_step_size("1/5L", lipschitz_constant(data, loss).L)
    res = fixed_point_residual(ref["x"], data, loss, penalty, index, gamma)
    return _report("fixed-point", res <= 1e-8, 1e-8 - res,
                   f"fixed-point residual {res:.3e} at the cached optimum")


def check_equivalence_dense(cache_dir=None):
    """With one all-coordinates block the sparse solver equals dense SAGA."""
    data, loss, penalty, _ = acceptance_problem(cache_dir)
    partition = single_block_partition(data.n_features)
    index = build_support_index(data.features, partition)
    gamma = resolve_step_size("1/5L", lipschitz_constant(data, loss).L)
    worst = 0.0
    for seed in range(3):
        xs = np.zeros(data.n_features)
        xd = np.zeros(data.n_features)
        ms = GradientMemory.zeros(data.n_samples, data.n_features)
        md = GradientMemory.zeros(data.n_samples, data.n_features)
        samples = worker_rng(seed, 0).integers(0, data.n_samples, size=3 * data.n_samples)
        for i in samples:
            sps_step(xs, ms, int(i), gamma, penalty, index, loss, data)
            dense_saga_step(xd, md, int(i), gamma, penalty, loss, data)
            worst = max(worst, float(np.max(np.abs(xs - xd))))
    return _report("equivalence-dense", worst <= 1e-14, 1e-14 - worst,
                   f"per-iterate max diff {worst:.3e} over 3 epochs, 3 seeds")


def check_equivalence_zero_penalty(cache_dir=None):
    """With no penalty the prox is the identity and iterates match a no-prox run."""
    data, loss, _, partition = acceptance_problem(cache_dir)
    penalty = ZeroPenalty()
    index = build_support_index(data.features, partition)
    gamma = resolve_step_size("1/5L", lipschitz_constant(data, loss).L)
    x = np.zeros(data.n_features)
    xr = np.zeros(data.n_features)
    mem = GradientMemory.zeros(data.n_samples, data.n_features)
    memr = GradientMemory.zeros(data.n_samples, data.n_features)
    samples = worker_rng(0, 0).integers(0, data.n_samples, size=3 * data.n_samples)
    worst = 0.0
    for i in samples:
        i = int(i)
        sps_step(x, mem, i, gamma, penalty, index, loss, data)
        # reference: same estimate, plain gradient step, no prox call
        cols, vals = data.features.row(i)
        ecols, v, new_scalar = sparse_gradient_estimate(i, xr, memr, index, loss, data)
        xe = xr[ecols]
        z = xe - gamma * v
        xr[ecols] = xe + (z - xe)
        memr.avg[cols] += ((new_scalar - memr.scalars[i]) / memr.n) * vals
        memr.scalars[i] = new_scalar
        worst = max(worst, float(np.max(np.abs(x - xr))))
    return _report("equivalence-zero-penalty", worst <= 1e-14, 1e-14 - worst,
                   f"per-iterate max diff {worst:.3e} over 3 epochs")


def check_equivalence_async_single_thread(cache_dir=None):
    """One worker thread replays the sequential solver exactly."""
    data, loss, penalty, partition = acceptance_problem(cache_dir)
    cfg = SolverConfig(step_size="1/5L", epochs=3, seed=0)
    seq = run_sequential(data, loss, penalty, partition, cfg)
    par = run_async(data, loss, penalty, partition,
                    AsyncConfig(step_size="1/5L", epochs=3, seed=0, threads=1))
    worst = float(np.max(np.abs(seq.final_x - par.final_x)))
    return _report("equivalence-async-single-thread", worst <= 1e-14, 1e-14 - worst,
                   f"final iterate max diff {worst:.3e}")


def check_rate_envelope(cache_dir=None):
    """Median squared distance to the optimum stays under the geometric envelope."""
    data, loss, penalty, partition = acceptance_problem(cache_dir)
    ref = reference_optimum(data, loss, penalty, partition, cache_dir=cache_dir)
    info = lipschitz_constant(data, loss)
    kappa = info.L / loss.lambda1
    rho = theorem_rate_factor(data.n_samples, kappa)
    C0 = theorem_constant(data, loss, ref["x"], info.L)
    per_seed = []
    for seed in range(10):
        cfg = SolverConfig(step_size="1/5L", epochs=100, seed=seed)
        trace = run_sequential(data, loss, penalty, partition, cfg,
                               track_distance_to=ref["x"])
        per_seed.append((trace.iterations, trace.distances))
    iters = per_seed[0][0]
    medians = {t: float(np.median([d[k] for _, d in per_seed]))
               for k, t in enumerate(iters)}
    records = rate_envelope_check(medians, rho, C0, slack=10.0)
    failed = [r for r in records if not r["passed"]]
    margin = min(r["margin"] for r in records)
    return _report("rate-envelope", not failed, margin,
                   f"{len(records)} checkpoints, {len(failed)} over the envelope")


def check_atomic_exactness(cache_dir=None):
    """Concurrent atomic adds lose no update: 8 x 1e5 adds of 1.0 are exact."""
    cell = np.zeros(1)
    count = 100_000
    workers = [threading.Thread(target=_atomics.add_repeat, args=(cell, 0, 1.0, count))
               for _ in range(8)]
    for w in workers:
        w.start()
    for w in workers:
        w.join()
    total = float(cell[0])
    exact = total == 8.0 * count
    return _report("atomic-exactness", exact, 0.0 if exact else abs(total - 8e5),
                   f"result {total!r}, expected 800000.0")


def check_write_sparsity(cache_dir=None):
    """The sparse solver never writes outside the sampled extended supports."""
    data, loss, penalty, partition = acceptance_problem(cache_dir)
    index = build_support_index(data.features, partition)
    gamma = resolve_step_size("1/5L", lipschitz_constant(data, loss).L)
    x = np.zeros(data.n_features)
    shadow = x.copy()
    mem = GradientMemory.zeros(data.n_samples, data.n_features)
    samples = worker_rng(3, 0).integers(0, data.n_samples, size=2 * data.n_samples)
    clean = True
    for i in samples:
        i = int(i)
        sps_step(x, mem, i, gamma, penalty, index, loss, data)
        ecols, _, _ = index.ext_slice(i)
        shadow[ecols] = x[ecols]
        if not np.array_equal(x, shadow):
            clean = False
            break
    return _report("write-sparsity", clean, 0.0 if clean else 1.0,
                   "bit-exact shadow copy over 2 epochs" if clean
                   else "write detected outside the sampled extended support")


CHECKS = [
    check_weights_identity,
    check_weights_penalty_mean,
    check_prox_characterization,
    check_prox_bruteforce,
    check_gradient_unbiased,
    check_gradient_finite_diff,
    check_fixed_point,
    check_equivalence_dense,
    check_equivalence_zero_penalty,
    check_equivalence_async_single_thread,
    check_rate_envelope,
    check_atomic_exactness,
    check_write_sparsity,
]


def check_names():
    return [fn.__name__.removeprefix("check_").replace("_", "-") for fn in CHECKS]


def run_checks(only=None, cache_dir=None):
    """Run every check whose name contains ``only`` (all when None)."""
    reports = []
    for fn in CHECKS:
        name = fn.__name__.removeprefix("check_").replace("_", "-")
        if only and only not in name:
            continue
        reports.append(fn(cache_dir=cache_dir))
    if only and not reports:
        raise ValueError(f"no check matches {only!r}; known: {check_names()}")
    return reports
