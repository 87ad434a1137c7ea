"""Penalty values, proximal operators and the reweighted surrogate."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from sparsesaga.data import build_support_index, singleton_partition
from sparsesaga.penalties import (
    BoxPenalty,
    GroupL2Penalty,
    L1Penalty,
    ProxStep,
    ZeroPenalty,
    make_penalty,
    prox_block,
    prox_extended_slice,
    prox_phi,
)
from sparsesaga.problems import gen_sparse_glm

finite_vec = arrays(np.float64, st.integers(1, 6),
                    elements=st.floats(-50, 50, allow_nan=False))
gammas = st.floats(1e-3, 10.0, allow_nan=False)
lams = st.floats(0.0, 5.0, allow_nan=False)


def test_soft_threshold_values():
    pen = L1Penalty(1.0)
    v = np.array([3.0, -0.5, 0.0, -4.0])
    assert np.allclose(pen.prox(v, 1.0), [2.0, 0.0, 0.0, -3.0])
    assert pen.value(v) == pytest.approx(7.5)


def test_group_shrinkage():
    pen = GroupL2Penalty(1.0)
    v = np.array([3.0, 4.0])  # norm 5
    assert np.allclose(pen.prox_block(v, 1.0), v * (1 - 1 / 5))
    assert np.allclose(pen.prox_block(np.zeros(2), 1.0), 0.0)
    # past the kill threshold the whole block vanishes
    assert np.allclose(pen.prox_block(v, 6.0), 0.0)


def test_box_clamp_and_value():
    pen = BoxPenalty(-1.0, 2.0)
    assert np.allclose(pen.prox(np.array([-3.0, 0.5, 4.0]), 0.7), [-1.0, 0.5, 2.0])
    assert pen.value(np.array([0.0, 2.0])) == 0.0
    assert pen.value(np.array([2.1])) == np.inf


def test_zero_penalty_identity():
    pen = ZeroPenalty()
    v = np.array([1.0, -2.0])
    out = pen.prox(v, 3.0)
    assert np.array_equal(out, v)
    assert out is not v


@given(v=finite_vec, gamma=gammas, lam=lams)
@settings(max_examples=200, deadline=None)
def test_l1_prox_characterization(v, gamma, lam):
    """(v - z)/gamma must be a subgradient of lam*|.|_1 at z = prox(v)."""
    pen = L1Penalty(lam)
    z = pen.prox(v, gamma)
    g = (v - z) / gamma
    # cancellation in v - z scales with |v|/gamma, so the tolerance must too
    tol = 1e-12 * (1.0 + np.abs(v) / gamma)
    on = z != 0
    assert np.all(np.abs(g[on] - lam * np.sign(z[on])) <= tol[on])
    assert np.all(np.abs(g[~on]) <= lam + tol[~on])


@given(u=finite_vec, gamma=gammas, lam=lams, shift=st.floats(-5, 5))
@settings(max_examples=200, deadline=None)
def test_prox_firm_nonexpansiveness(u, gamma, lam, shift):
    pen = L1Penalty(lam)
    v = u + shift
    pu, pv = pen.prox(u, gamma), pen.prox(v, gamma)
    lhs = float(np.sum((pu - pv) ** 2))
    rhs = float((pu - pv) @ (u - v))
    assert lhs <= rhs + 1e-9


@given(v=finite_vec, gamma=gammas, lam=lams)
@settings(max_examples=100, deadline=None)
def test_group_prox_characterization(v, gamma, lam):
    pen = GroupL2Penalty(lam)
    z = pen.prox_block(v, gamma)
    g = (v - z) / gamma
    norm = np.linalg.norm(z)
    if norm > 1e-9:
        assert np.all(np.abs(g - lam * z / norm) <= 1e-9)
    else:
        assert np.linalg.norm(g) <= lam + 1e-9


def test_prox_step_validation():
    with pytest.raises(ValueError):
        ProxStep(gamma=0.0)
    with pytest.raises(ValueError):
        ProxStep(gamma=1.0, scale=0.5)
    assert ProxStep(gamma=0.5, scale=3.0).effective == pytest.approx(1.5)


def test_prox_block_rejects_nonfinite():
    with pytest.raises(ValueError):
        prox_block(L1Penalty(1.0), np.array([np.nan]), ProxStep(1.0))


def test_prox_phi_matches_slice_form():
    data = gen_sparse_glm(20, 8, 0.4, 11)
    part = singleton_partition(8)
    index = build_support_index(data.features, part)
    rng = np.random.default_rng(2)
    pen = L1Penalty(0.3)
    for i in range(data.n_samples):
        v = rng.standard_normal(8)
        full = prox_phi(pen, index, i, 0.1, v)
        coords, _, _ = index.ext_slice(i)
        sliced = prox_extended_slice(pen, index, i, 0.1, v[coords])
        assert np.allclose(full[coords], sliced, atol=1e-15)
        off = np.setdiff1d(np.arange(8), coords)
        assert np.array_equal(full[off], v[off])


def test_prox_phi_uses_block_weights():
    """On a block with weight d the surrogate prox uses step gamma * d."""
    data = gen_sparse_glm(20, 8, 0.4, 11)
    part = singleton_partition(8)
    index = build_support_index(data.features, part)
    pen = L1Penalty(0.5)
    i = 0
    coords, weights, _ = index.ext_slice(i)
    v = np.linspace(-2, 2, 8)
    out = prox_extended_slice(pen, index, i, 0.1, v[coords])
    expected = pen.prox(v[coords], 0.1 * weights)
    assert np.allclose(out, expected, atol=1e-15)


def test_make_penalty():
    assert isinstance(make_penalty("none"), ZeroPenalty)
    assert isinstance(make_penalty("l1", lam2=0.1), L1Penalty)
    assert isinstance(make_penalty("group-l1", lam2=0.1), GroupL2Penalty)
    box = make_penalty("box", lo=-2, hi=2)
    assert isinstance(box, BoxPenalty) and box.hi == 2.0
    with pytest.raises(ValueError):
        make_penalty("elastic")
    with pytest.raises(ValueError):
        L1Penalty(-1.0)
    with pytest.raises(ValueError):
        BoxPenalty(1.0, 0.0)
