import math

import numpy as np
import pytest

from su2sps.linalg_core import dagger, kron, op_norm
from su2sps.sequences import dim_sequence
from su2sps.toeplitz import (
    FockTruncation,
    commutator_decay,
    commutator_decay_closed_form,
    dimension_and_phi,
    generator,
    identity,
    vacuum_projection,
    verify_commutator_decay,
    verify_creation_norms,
    verify_gauge_equivariance,
    verify_phi_decay,
    verify_toeplitz_relations,
)

CASES = [(1, 6), (2, 5), (3, 4)]


def ambient_generator_block(sys, j, m):
    """Block E_m -> E_{m+1} of T_j computed from ambient bases only."""
    e = np.zeros((sys.q, 1))
    e[j] = 1
    return dagger(sys.basis(m + 1)) @ kron(e, sys.basis(m))


@pytest.mark.parametrize(("n", "M"), CASES)
def test_relations(get_system, get_fusion, n, M):
    reps = verify_toeplitz_relations(get_system(n, M), fm=get_fusion(n, M))
    bad = [r.line() for r in reps if not r.passed]
    assert not bad, bad


@pytest.mark.parametrize(("n", "M"), [(1, 4), (2, 3)])
def test_generators_match_ambient_oracle(get_system, n, M):
    sys = get_system(n, M)
    for j in range(sys.q):
        t = generator(sys, j)
        for m in range(M):
            assert op_norm(t.block(m) - ambient_generator_block(sys, j, m)) < 1e-12


@pytest.mark.parametrize(("n", "M"), CASES)
def test_row_sum_is_one_minus_vacuum(get_system, n, M):
    sys = get_system(n, M)
    ts = [generator(sys, j) for j in range(sys.q)]
    total = ts[0] @ ts[0].H
    for t in ts[1:]:
        total = total + t @ t.H
    expected = identity(total.dims) - vacuum_projection(total.dims)
    for m in total.blocks:
        assert op_norm(total.block(m) - expected.block(m)) < 1e-10


def test_fundamental_generators_commute(get_system):
    sys = get_system(1, 6)
    t0, t1 = generator(sys, 0), generator(sys, 1)
    comm = t0 @ t1 - t1 @ t0
    assert comm.blocks and max(op_norm(b) for b in comm.blocks.values()) < 1e-12


def test_higher_generators_do_not_commute(get_system):
    sys = get_system(2, 4)
    t0, t1 = generator(sys, 0), generator(sys, 1)
    comm = t0 @ t1 - t1 @ t0
    assert max(op_norm(b) for b in comm.blocks.values()) > 0.1


@pytest.mark.parametrize(("n", "M"), CASES)
def test_commutator_decay_closed_form(get_fusion, n, M):
    reps = verify_commutator_decay(get_fusion(n, M))
    assert all(r.passed for r in reps), [r.line() for r in reps if not r.passed]
    assert any(r.name == "weighted_commutator_bound" for r in reps)


def test_decay_closed_form_against_naive_formula():
    for d in range(2, 60):
        naive = math.sqrt(2) * math.sqrt(1 - math.sqrt(1 - 1 / d**2))
        assert math.isclose(commutator_decay_closed_form(d), naive, rel_tol=1e-9)


def test_decay_values_are_decreasing(get_fusion):
    values = commutator_decay(get_fusion(2, 5))
    assert all(b < a for a, b in zip(values, values[1:]))
    d = dim_sequence(2, 5)
    for m, v in zip(range(2, 6), values):
        assert abs(v - commutator_decay_closed_form(d[m - 1])) < 1e-9


@pytest.mark.parametrize(("n", "M"), CASES)
def test_norms_phi_and_gauge(get_system, n, M):
    sys = get_system(n, M)
    reps = verify_creation_norms(sys) + verify_phi_decay(sys) + verify_gauge_equivariance(sys)
    assert all(r.passed for r in reps), [r.line() for r in reps if not r.passed]


def test_dimension_operator_blocks(get_system):
    sys = get_system(2, 4)
    D, Phi = dimension_and_phi(sys)
    d = dim_sequence(2, 5)
    for m in range(5):
        assert np.allclose(D.block(m), d[m] * np.eye(d[m]))
        assert np.allclose(Phi.block(m), d[m] / d[m + 1] * np.eye(d[m]))


def test_dense_embedding_of_shift(get_system):
    sys = get_system(1, 3)
    trunc = FockTruncation.of(sys)
    dense = trunc.to_dense(generator(sys, 0))
    assert dense.shape == (trunc.total, trunc.total)
    # creation raises degree, so the dense matrix is strictly block lower triangular
    assert np.allclose(np.triu(dense), 0)


def test_shadowed_block_raises(get_system):
    t = generator(get_system(1, 3), 0)
    with pytest.raises(KeyError):
        t.block(3)
