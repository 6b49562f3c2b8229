import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from su2sps.linalg_core import dagger, op_norm
from su2sps.su2_rep import (
    IDENTITY,
    SU2Element,
    haar_sample,
    invariant_subspace,
    irrep,
    representation_residuals,
    symmetric_basis,
    symmetrizer,
    torus_element,
)

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def brute_symmetrizer(m):
    """Average of all index permutations of (C^2)^{⊗m}, built by index arithmetic."""
    dim = 2**m
    out = np.zeros((dim, dim))
    for perm in itertools.permutations(range(m)):
        for idx in range(dim):
            bits = [(idx >> (m - 1 - i)) & 1 for i in range(m)]
            moved = [bits[perm[i]] for i in range(m)]
            out[int("".join(map(str, moved)), 2), idx] += 1
    return out / math.factorial(m)


@pytest.mark.parametrize("m", range(1, 6))
def test_symmetrizer_matches_permutation_average(m):
    assert np.allclose(symmetrizer(m), brute_symmetrizer(m), atol=1e-13)


@pytest.mark.parametrize("m", range(1, 7))
def test_symmetrizer_is_orthogonal_projection_of_rank_m_plus_1(m):
    p = symmetrizer(m)
    assert np.allclose(p @ p, p, atol=1e-12)
    assert np.allclose(p, p.T, atol=1e-12)
    assert round(np.trace(p)) == m + 1


@pytest.mark.parametrize("n", range(1, 6))
def test_symmetric_basis_orthonormal(n):
    b = symmetric_basis(n).basis
    assert np.allclose(dagger(b) @ b, np.eye(n + 1), atol=1e-12)


@given(seeds, seeds, st.integers(min_value=1, max_value=5))
def test_irrep_is_unitary_homomorphism(s1, s2, n):
    g, h = haar_sample(s1), haar_sample(s2)
    rg, rh = irrep(n, g), irrep(n, h)
    assert op_norm(dagger(rg) @ rg - np.eye(n + 1)) < 1e-10
    assert op_norm(irrep(n, g @ h) - rg @ rh) < 1e-10
    assert op_norm(irrep(n, g.inverse()) - dagger(rg)) < 1e-10


def test_irrep_of_identity_and_torus_weights():
    n = 3
    assert np.allclose(irrep(n, IDENTITY), np.eye(n + 1))
    theta = 0.37
    diag = np.diag(irrep(n, torus_element(theta)))
    # e_k has k copies of f_1 and n-k of f_0: weight e^{i(n-2k)θ}
    assert np.allclose(diag, [np.exp(1j * (n - 2 * k) * theta) for k in range(n + 1)])


def test_fundamental_irrep_is_defining_matrix():
    g = haar_sample(5)
    assert np.allclose(irrep(1, g), g.matrix)


def test_residual_summary():
    res = representation_residuals(4, samples=5)
    assert res["unitarity"] < 1e-10 and res["multiplicativity"] < 1e-10


def test_invalid_element_rejected():
    with pytest.raises(ValueError):
        SU2Element(1.0, 1.0)


def test_invariant_subspace_of_trivial_and_rotation():
    assert invariant_subspace([np.eye(3)]).shape[1] == 3
    r = np.array([[0, -1], [1, 0]], dtype=float)
    assert invariant_subspace([r]).shape[1] == 0
