import numpy as np
import pytest

from su2sps.linalg_core import SizeLimitError, dagger, kron, op_norm, projector_distance
from su2sps.sequences import dim_sequence
from su2sps.sps_core import (
    build_system,
    determinant_dimension,
    determinant_dimension_numeric,
    determinant_vector,
    load_system,
    verify_axioms,
    verify_determinant,
    verify_equivariance,
)
from su2sps.su2_rep import haar_sample, irrep

# hand-checked values: n=1 gives m+1, n=2 every other Fibonacci number, n=3 the Chebyshev-like 1,4,15,56,209
KNOWN_DIMS = {
    (1, 8): [1, 2, 3, 4, 5, 6, 7, 8, 9],
    (2, 5): [1, 3, 8, 21, 55, 144],
    (3, 4): [1, 4, 15, 56, 209],
}


def complement_rank(n, m):
    """q^m minus the rank of the span of all placements of delta, computed by SVD alone."""
    q = n + 1
    delta = determinant_vector(n)[:, None]
    cols = np.hstack([kron(np.eye(q**i), delta, np.eye(q ** (m - 2 - i))) for i in range(m - 1)])
    return q**m - np.linalg.matrix_rank(cols, tol=1e-9)


@pytest.mark.parametrize(("n", "M"), KNOWN_DIMS)
def test_dimensions_by_construction(get_system, n, M):
    assert get_system(n, M).dims == KNOWN_DIMS[(n, M)]
    assert dim_sequence(n, M) == KNOWN_DIMS[(n, M)]


@pytest.mark.parametrize(("n", "m"), [(1, 4), (2, 3), (2, 4), (3, 3)])
def test_dimensions_against_rank_oracle(get_system, n, m):
    assert get_system(n, m).dim(m) == complement_rank(n, m)


@pytest.mark.parametrize(("n", "M"), [(1, 5), (2, 4), (3, 3)])
def test_recursive_and_direct_agree(get_system, n, M):
    rec = get_system(n, M)
    direct = build_system(n, M, method="direct")
    for m in range(M + 1):
        assert projector_distance(rec.basis(m), direct.basis(m)) < 1e-10


@pytest.mark.parametrize(("n", "M"), [(1, 6), (2, 4), (3, 3)])
def test_axioms(get_system, n, M):
    reps = verify_axioms(get_system(n, M))
    bad = [r.line() for r in reps if not r.passed]
    assert not bad, bad
    names = {r.name for r in reps}
    assert {"coassociativity", "coisometry_rows", "subproduct_inclusion", "coisometry_two_routes"} <= names


@pytest.mark.parametrize(("n", "M"), [(1, 5), (2, 4)])
def test_equivariance(get_system, n, M):
    reps = verify_equivariance(get_system(n, M))
    assert all(r.passed for r in reps), [r.line() for r in reps if not r.passed]


def test_fibres_are_invariant_under_the_full_tensor_power(get_system):
    sys = get_system(2, 3)
    g = haar_sample(11)
    big = kron(*([irrep(2, g)] * 3))
    b = sys.basis(3)
    assert op_norm(big @ b - b @ (dagger(b) @ big @ b)) < 1e-10


@pytest.mark.parametrize("n", [1, 2, 3])
def test_determinant_is_the_unique_invariant(n):
    reps = verify_determinant(n)
    assert all(r.passed for r in reps)
    assert {r.name for r in reps} >= {"determinant_dimension", "determinant_vector"}


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_delta_fixed_by_random_elements(n):
    delta = determinant_vector(n)
    for s in range(3):
        u = irrep(n, haar_sample(s))
        assert np.linalg.norm(np.kron(u, u) @ delta - delta) < 1e-10


@pytest.mark.parametrize(("pattern", "expected"), [((0, 0, 1), 1), ((0, 2), 4), ((1, 1), 2), ((0, 1, 1), 2), ((2,), 4), ((1, 0, 2), 5)])
def test_reducible_determinant_dimension(pattern, expected):
    assert determinant_dimension(pattern) == expected
    assert determinant_dimension_numeric(pattern) == expected


def test_json_round_trip(tmp_path, get_system):
    sys = get_system(2, 4)
    path = tmp_path / "sys.json"
    sys.save(path)
    back = load_system(path)
    assert back.dims == sys.dims and back.equivariant
    for k in range(1, 4):
        for m in range(1, 5 - k):
            assert np.array_equal(back.inclusion(k, m), sys.inclusion(k, m))


def test_round_trip_through_ambient_bases(get_system):
    sys = get_system(1, 4)
    data = sys.to_json()
    data.pop("inclusions")
    back = type(sys).from_json(data)
    for m in range(5):
        assert projector_distance(back.basis(m), sys.basis(m)) < 1e-12


def test_argument_errors():
    with pytest.raises(ValueError):
        build_system(0, 3)
    with pytest.raises(ValueError):
        build_system(1, 3, method="other")
    with pytest.raises(SizeLimitError):
        build_system(3, 9, method="direct")
    with pytest.raises(IndexError):
        build_system(1, 2).inclusion(2, 1)
