"""Acceptance criteria for the solver stack, one test per criterion.

Each test prints a single pass/fail line with the measured quantity and its
tolerance, then asserts.  Tolerances are part of the contract; do not relax
them to make a failing build green.
"""

import time

import numpy as np

import sparsesaga as sg
from sparsesaga.asynchronous import AsyncConfig, measure_speedup, run_async
from sparsesaga.saga import SolverConfig, run_dense, run_sequential
from sparsesaga.verify import (
    check_atomic_exactness,
    check_equivalence_dense,
    check_equivalence_zero_penalty,
    check_fixed_point,
    check_prox_bruteforce,
    check_prox_characterization,
    check_rate_envelope,
    check_weights_identity,
    check_weights_penalty_mean,
    check_write_sparsity,
)


def _line(criterion, passed, detail):
    status = "PASS" if passed else "FAIL"
    print(f"[criterion {criterion}] {status}: {detail}")
    assert passed, detail


def test_criterion_1_lemma_suite(cache_dir):
    start = time.perf_counter()
    identity = check_weights_identity()
    surrogate = check_weights_penalty_mean()
    lemma_seconds = time.perf_counter() - start
    prox = check_prox_characterization()
    brute = check_prox_bruteforce()
    fixed = check_fixed_point(cache_dir=cache_dir)
    parts = [identity, surrogate, prox, brute, fixed]
    ok = all(r["passed"] for r in parts) and lemma_seconds < 5.0
    _line(1, ok,
          f"lemma suite in {lemma_seconds:.2f} s (< 5 s); "
          + "; ".join(r["detail"] for r in parts))


def test_criterion_2_oracle_equivalences(cache_dir):
    dense = check_equivalence_dense(cache_dir=cache_dir)
    zero = check_equivalence_zero_penalty(cache_dir=cache_dir)
    ok = dense["passed"] and zero["passed"]
    _line(2, ok, f"{dense['detail']} (tol 1e-14); {zero['detail']} (tol 1e-14)")


def test_criterion_3_rate_envelope(cache_dir):
    start = time.perf_counter()
    report = check_rate_envelope(cache_dir=cache_dir)
    seconds = time.perf_counter() - start
    ok = report["passed"] and seconds < 60.0
    _line(3, ok,
          f"median distance under (1-rho)^t * C0 * 10 at every checkpoint, "
          f"10 seeds, 100 epochs: {report['detail']} in {seconds:.1f} s (< 60 s)")


def test_criterion_4_sequential_precision(acceptance, acceptance_ref):
    data, loss, penalty, partition = acceptance
    cfg = SolverConfig(step_size="1/5L", epochs=150, seed=0)
    trace = run_sequential(data, loss, penalty, partition, cfg)
    gap = sg.suboptimality([trace.objective[-1]], acceptance_ref["objective"])[0]
    _line(4, gap <= 1e-10,
          f"suboptimality {gap:.3e} after 150 epochs (tol 1e-10)")


def test_criterion_5_async_correctness(acceptance, acceptance_ref):
    data, loss, penalty, partition = acceptance
    start = time.perf_counter()
    worst = 0.0
    for threads in (2, 4):
        for seed in range(10):
            cfg = AsyncConfig(step_size="1/5L", epochs=120, seed=seed,
                              threads=threads)
            trace = run_async(data, loss, penalty, partition, cfg)
            gap = sg.suboptimality([trace.objective[-1]],
                                   acceptance_ref["objective"])[0]
            worst = max(worst, gap)
    seq = run_sequential(data, loss, penalty, partition,
                         SolverConfig(step_size="1/5L", epochs=120, seed=0))
    par = run_async(data, loss, penalty, partition,
                    AsyncConfig(step_size="1/5L", epochs=120, seed=0, threads=1))
    match = float(np.max(np.abs(seq.final_x - par.final_x)))
    seconds = time.perf_counter() - start
    ok = worst <= 1e-8 and match <= 1e-14 and seconds < 300.0
    _line(5, ok,
          f"worst suboptimality {worst:.3e} over 2/4 threads x 10 seeds "
          f"(tol 1e-8); single-thread match {match:.3e} (tol 1e-14); "
          f"{seconds:.0f} s (< 300 s)")


def test_criterion_6_theoretical_speedup(speedup_problem, speedup_ref):
    data, loss, penalty, partition = speedup_problem
    index = sg.build_support_index(data.features, partition)
    cfg = AsyncConfig(step_size="1/5L", epochs=25, seed=0)
    rows, _ = measure_speedup(data, loss, penalty, partition, cfg, [1, 2, 4],
                              1e-6, speedup_ref["objective"])
    four = next(r for r in rows if r["cores"] == 4)
    ok = (index.delta <= 0.05 and four["reached"]
          and four["theoretical_speedup"] >= 3.0)
    _line(6, ok,
          f"delta {index.delta:.4f} (<= 0.05); 4-core theoretical speedup "
          f"{four['theoretical_speedup']:.2f} to 1e-6 (>= 3.0); wall speedup "
          f"{four['wall_speedup']:.2f} reported, not asserted")


def test_criterion_7_sparsity_of_writes(cache_dir):
    report = check_write_sparsity(cache_dir=cache_dir)
    _line(7, report["passed"],
          f"no writes outside sampled extended supports: {report['detail']}")


def test_criterion_8_atomic_exactness():
    report = check_atomic_exactness()
    _line(8, report["passed"],
          f"8 threads x 1e5 atomic adds of 1.0: {report['detail']}")


def test_criterion_9_cross_solver_agreement(acceptance, acceptance_ref):
    data, loss, penalty, partition = acceptance
    sparse = run_sequential(data, loss, penalty, partition,
                            SolverConfig(step_size="1/5L", epochs=150, seed=0))
    dense = run_dense(data, loss, penalty, partition,
                      SolverConfig(step_size="1/5L", epochs=150, seed=0))
    fista = sg.run_fista(data, loss, penalty, partition, max_iters=800)
    finals = [sparse.objective[-1], dense.objective[-1], fista.objective[-1]]
    spread = max(finals) - min(finals)
    _line(9, spread <= 1e-9,
          f"final objective spread {spread:.3e} across sparse/dense/accelerated "
          f"solvers (tol 1e-9)")
