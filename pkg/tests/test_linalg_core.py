import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from su2sps.linalg_core import (
    ContractError,
    SizeLimitError,
    TensorIndexer,
    dagger,
    inv_sqrt_psd,
    isometry_defect,
    kron,
    kron_apply,
    null_space,
    onb_of_complement,
    onb_of_span,
    op_norm,
    projector,
    projector_distance,
    unitarity_defect,
)

seeds = st.integers(0, 2**32 - 1)
small = st.integers(1, 5)


def random_matrix(rng, rows, cols, complex_=False):
    a = rng.standard_normal((rows, cols))
    if complex_:
        a = a + 1j * rng.standard_normal((rows, cols))
    return a


@given(seeds, small, small, small, small, st.integers(1, 4), st.booleans())
def test_kron_apply_matches_dense_kron(seed, r1, c1, r2, c2, width, complex_):
    rng = np.random.default_rng(seed)
    a, b = random_matrix(rng, r1, c1, complex_), random_matrix(rng, r2, c2)
    x = random_matrix(rng, c1 * c2, width, complex_)
    assert np.allclose(kron_apply(a, b, x), np.kron(a, b) @ x)


@given(seeds, small, small, st.integers(1, 3))
def test_kron_apply_accepts_identity_sizes(seed, d1, d2, width):
    rng = np.random.default_rng(seed)
    a = random_matrix(rng, d1, d1)
    x = random_matrix(rng, d1 * d2, width)
    assert np.allclose(kron_apply(a, d2, x), np.kron(a, np.eye(d2)) @ x)
    b = random_matrix(rng, d2, d2)
    assert np.allclose(kron_apply(d1, b, x), np.kron(np.eye(d1), b) @ x)


def test_kron_respects_budget():
    with pytest.raises(SizeLimitError):
        kron(np.ones((100, 100)), np.ones((100, 100)), budget=1000)


@given(st.integers(2, 4), st.integers(0, 4))
def test_tensor_indexer_is_a_bijection(q, degree):
    ix = TensorIndexer(q, degree)
    words = [ix.word(i) for i in range(ix.size)]
    assert len(set(words)) == ix.size
    assert all(ix.index(w) == i for i, w in enumerate(words))


@given(seeds, st.integers(1, 80), st.integers(1, 80))
def test_op_norm_agrees_with_singular_values(seed, rows, cols):
    a = np.random.default_rng(seed).standard_normal((rows, cols))
    expected = np.linalg.svd(a, compute_uv=False)[0]
    assert abs(op_norm(a) - expected) <= 1e-10 * max(1.0, expected)


def test_op_norm_gram_path_for_large_blocks():
    a = np.random.default_rng(3).standard_normal((200, 90))
    assert abs(op_norm(a) - np.linalg.svd(a, compute_uv=False)[0]) < 1e-10
    assert op_norm(np.zeros((0, 4))) == 0.0


@given(seeds, st.integers(2, 8), st.integers(1, 6))
def test_span_and_complement_are_orthogonal_and_exhaustive(seed, dim, k):
    rng = np.random.default_rng(seed)
    k = min(k, dim)
    s = random_matrix(rng, dim, k) @ random_matrix(rng, k, k + 2)  # rank k, redundant columns
    span = onb_of_span(s)
    comp = onb_of_complement(s, dim)
    assert span.shape[1] == k
    assert comp.shape[1] == dim - k
    assert isometry_defect(span) < 1e-12
    assert op_norm(dagger(comp) @ span) < 1e-10
    assert np.allclose(projector(span) + projector(comp), np.eye(dim))


def test_null_space_of_rank_one_map():
    a = np.array([[1.0, 1.0, 0.0]])
    ker = null_space(a)
    assert ker.shape == (3, 2)
    assert op_norm(a @ ker) < 1e-14


@given(seeds, st.integers(1, 6))
def test_inv_sqrt_psd_inverts_square_root_on_range(seed, dim):
    rng = np.random.default_rng(seed)
    b = random_matrix(rng, dim, max(1, dim - 1), True)
    a = b @ dagger(b)
    w, v = np.linalg.eigh(a)
    root = (v * np.sqrt(np.clip(w, 0, None))) @ dagger(v)
    p_range = projector(onb_of_span(b))
    assert op_norm(root @ inv_sqrt_psd(a) - p_range) < 1e-7


def test_inv_sqrt_psd_rejects_indefinite_input():
    with pytest.raises(ContractError):
        inv_sqrt_psd(np.diag([1.0, -0.5]))


def test_projector_distance_detects_different_lines():
    e0, e1 = np.eye(2)[:, :1], np.eye(2)[:, 1:]
    assert projector_distance(e0, e0) == 0.0
    assert abs(projector_distance(e0, e1) - 1.0) < 1e-15
    rot = np.array([[np.cos(0.1), -np.sin(0.1)], [np.sin(0.1), np.cos(0.1)]])
    assert abs(projector_distance(e0, rot @ e0) - np.sin(0.1)) < 1e-12
    assert unitarity_defect(rot) < 1e-15
