"""Shared fixtures: the calibrated acceptance instance and cached optima."""

import os
from pathlib import Path

# Keep optimum/bisection caches inside the repo so CI runs are hermetic.
os.environ.setdefault(
    "SPARSESAGA_CACHE_DIR",
    str(Path(__file__).resolve().parent.parent / ".cache"),
)

import pytest

import sparsesaga as sg
from sparsesaga.verify import acceptance_problem


@pytest.fixture(scope="session")
def cache_dir():
    return os.environ["SPARSESAGA_CACHE_DIR"]


@pytest.fixture(scope="session")
def acceptance(cache_dir):
    """(data, loss, penalty, partition) for the 200 x 50 logistic instance."""
    return acceptance_problem(cache_dir)


@pytest.fixture(scope="session")
def acceptance_ref(acceptance, cache_dir):
    data, loss, penalty, partition = acceptance
    return sg.reference_optimum(data, loss, penalty, partition,
                                cache_dir=cache_dir)


@pytest.fixture(scope="session")
def speedup_problem():
    """Near-disjoint 2000 x 2000 instance with a small sharing measure."""
    data = sg.gen_disjoint_glm(2000, 2000, 7)
    partition = sg.singleton_partition(data.n_features)
    loss = sg.Loss("logistic", 1.0 / data.n_samples)
    penalty = sg.L1Penalty(0.1 * sg.lambda_max(data))
    return data, loss, penalty, partition


@pytest.fixture(scope="session")
def speedup_ref(speedup_problem, cache_dir):
    data, loss, penalty, partition = speedup_problem
    return sg.reference_optimum(data, loss, penalty, partition,
                                cache_dir=cache_dir, solver="sparse",
                                residual_target=1e-8)
