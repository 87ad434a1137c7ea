"""Compare convergence of the sparse stochastic solver against the
accelerated full-gradient baseline on a small l1 + l2 logistic problem.

Run:  python3 demos/suboptimality_trace.py
"""

import numpy as np

import sparsesaga as sg


def main():
    data = sg.gen_sparse_glm(200, 50, 0.1, 42)
    partition = sg.singleton_partition(data.n_features)
    loss = sg.Loss("logistic", 1.0 / data.n_samples)
    penalty = sg.L1Penalty(0.0222)

    ref = sg.reference_optimum(data, loss, penalty, partition)
    fstar = ref["objective"]
    print(f"reference objective {fstar:.12f} (residual {ref['residual']:.1e})")

    cfg = sg.SolverConfig(step_size="1/5L", epochs=60, seed=0)
    saga = sg.run_sequential(data, loss, penalty, partition, cfg)
    fista = sg.run_fista(data, loss, penalty, partition, max_iters=60)

    print(f"\n{'epoch':>6} {'stochastic':>14} {'accelerated':>14}")
    for k in range(0, 61, 10):
        s = sg.suboptimality([saga.objective[k]], fstar)[0]
        f = sg.suboptimality([fista.objective[k]], fstar)[0]
        print(f"{k:>6} {s:>14.3e} {f:>14.3e}")

    nnz = np.count_nonzero(saga.final_x)
    print(f"\nsolution has {nnz}/{data.n_features} nonzero coordinates")


if __name__ == "__main__":
    main()
