import functools
import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from su2sps.kk_gysin import (
    AbelianGroup,
    BiGradedOperator,
    Box,
    KKContext,
    certify_delta_inverse,
    certify_gamma_delta,
    certify_homotopy,
    certify_intertwining,
    certify_partial_isometry,
    certify_right_defect_rank_one,
    certify_theta,
    certify_toeplitz_form,
    cokernel_and_kernel,
    commutator_profile,
    euler_class,
    gysin_k_theory,
    k_theory_report,
    resolvent_bounds,
    resolvent_sup,
    smith_normal_form,
)
from su2sps.linalg_core import op_norm


@functools.lru_cache(maxsize=None)
def context(n, K):
    return KKContext.for_ranges(n, K, K)


def failures(reps):
    return [r.line() for r in reps if not r.passed]


# lazy operators


def random_operator(shift, dims, top, seed):
    rng = np.random.default_rng(seed)
    cache = {}

    def fn(k, m):
        if (k, m) not in cache:
            rows = dims[k + shift[0]] * dims[m + shift[1]]
            cols = dims[k] * dims[m]
            cache[(k, m)] = rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))
        return cache[(k, m)]

    return BiGradedOperator.build(shift, dims, top, fn), fn


DIMS = (1, 2, 3, 4, 5, 6)
TOP = Box(3, 4)


def test_lazy_product_and_adjoint_match_dense_blocks():
    a, fa = random_operator((1, 0), DIMS, TOP, 1)
    b, fb = random_operator((0, 1), DIMS, TOP, 2)
    prod = a @ b
    for s in TOP:
        if prod.is_known(s):
            mid = (s[0], s[1] + 1)
            assert np.allclose(prod.block(s), fa(*mid) @ fb(*s))
    adj = a.H
    for s in TOP:
        src = (s[0] - 1, s[1])
        if src[0] >= 0 and adj.is_known(s) and a.is_known(src):
            assert np.allclose(adj.block(s), fa(*src).conj().T)


def test_lazy_sum_scale_and_negative_targets():
    a, fa = random_operator((-1, 1), DIMS, TOP, 3)
    b, fb = random_operator((-1, 1), DIMS, TOP, 4)
    expr = 2.0 * a - b
    assert expr.block((0, 2)).shape == (0, DIMS[0] * DIMS[2])
    assert np.allclose(expr.block((2, 1)), 2 * fa(2, 1) - fb(2, 1))


def test_blocks_outside_box_are_shadowed():
    a, _ = random_operator((1, 1), DIMS, TOP, 5)
    assert not a.is_known((2, 2))
    with pytest.raises(KeyError):
        a.block((2, 2))


@given(st.integers(0, 2**31), st.integers(0, 3), st.integers(0, 3))
def test_adjoint_inner_products(seed, k, m):
    a, _ = random_operator((0, 1), DIMS, TOP, seed)
    s, t = (k, m), (k, m + 1)
    if not (a.is_known(s) and a.H.is_known(t)):
        return
    rng = np.random.default_rng(seed + 1)
    x = rng.standard_normal((a.width(s), 1))
    y = rng.standard_normal((a.width(t), 1))
    assert np.isclose(np.vdot(y, a.apply(s, x)), np.vdot(a.H.apply(t, y), x))


# certificates at small truncations


@pytest.mark.parametrize(("n", "K"), [(1, 2), (2, 1)])
def test_partial_isometry_defects(n, K):
    ctx = context(n, K)
    reps = certify_partial_isometry(ctx) + certify_right_defect_rank_one(ctx)
    assert not failures(reps)


@pytest.mark.parametrize(("n", "K"), [(1, 2), (2, 1)])
def test_spectra_and_theta(n, K):
    ctx = context(n, K)
    reps = certify_gamma_delta(ctx) + certify_theta(ctx) + certify_delta_inverse(ctx)
    assert not failures(reps)


@pytest.mark.parametrize(("n", "K"), [(1, 2), (2, 1)])
def test_toeplitz_form_and_intertwining(n, K):
    ctx = context(n, K)
    assert not failures(certify_toeplitz_form(ctx) + certify_intertwining(ctx))


@pytest.mark.parametrize("n", [1, 2, 3])
def test_resolvent_bounds(n):
    ctx = context(n, 1)
    assert not failures(resolvent_bounds(ctx))
    gamma_sup, delta_sup = resolvent_sup(ctx)
    assert 0 < gamma_sup <= n + 1 + 1e-9


def test_homotopy_sign_corrected_identity_passes():
    reps = certify_homotopy(context(1, 2))
    corrected = [r for r in reps if r.name == "I0_equals_H_half_pi_sign_flipped_on_P"]
    assert corrected and all(r.passed for r in corrected)
    others = [r for r in reps if r.name != "I0_equals_H_half_pi"]
    assert not failures(others)


def test_homotopy_literal_endpoint_identity():
    """I_0 equals H_{pi/2} exactly, with no sign correction."""
    reps = [r for r in certify_homotopy(context(1, 2)) if r.name == "I0_equals_H_half_pi"]
    assert reps
    assert not failures(reps)


def test_commutator_profile_decreases():
    prof = commutator_profile(context(1, 3))
    values = [prof[k] for k in sorted(prof)]
    assert all(b < a for a, b in zip(values, values[1:]))


def test_context_needs_enough_degrees(get_system):
    with pytest.raises(IndexError):
        KKContext(get_system(1, 3), 1, 1)


# K-theory


def det(m):
    n = len(m)
    if n == 0:
        return 1
    total = 0
    for perm in itertools.permutations(range(n)):
        inv = sum(1 for i in range(n) for j in range(i + 1, n) if perm[i] > perm[j])
        total += (-1) ** inv * math.prod(m[i][perm[i]] for i in range(n))
    return total


def minors_gcd(a, size):
    rows, cols = len(a), len(a[0])
    g = 0
    for r in itertools.combinations(range(rows), size):
        for c in itertools.combinations(range(cols), size):
            g = math.gcd(g, det([[a[i][j] for j in c] for i in r]))
    return g


matrices = st.integers(1, 3).flatmap(
    lambda r: st.integers(1, 3).flatmap(
        lambda c: st.lists(st.lists(st.integers(-6, 6), min_size=c, max_size=c), min_size=r, max_size=r)
    )
)


@given(matrices)
def test_smith_form_matches_determinantal_divisors(a):
    D, diag = smith_normal_form(a)
    for i, row in enumerate(D):
        for j, x in enumerate(row):
            assert i == j or x == 0
    assert all(x >= 0 for x in diag)
    nonzero = [x for x in diag if x]
    assert diag[: len(nonzero)] == nonzero
    for x, y in zip(nonzero, nonzero[1:]):
        assert y % x == 0
    prod = 1
    for i, x in enumerate(nonzero, start=1):
        prod *= x
        assert prod == minors_gcd(a, i)
    if len(nonzero) < min(len(a), len(a[0])):
        assert minors_gcd(a, len(nonzero) + 1) == 0


def test_cokernel_and_kernel_examples():
    assert cokernel_and_kernel([[2, 0], [0, 3]]) == (AbelianGroup(0, (6,)), AbelianGroup(0))
    assert cokernel_and_kernel([[0]]) == (AbelianGroup(1), AbelianGroup(1))
    assert cokernel_and_kernel([[1, 2, 3]]) == (AbelianGroup(0), AbelianGroup(2))


@pytest.mark.parametrize("n", range(1, 11))
def test_k_theory(n):
    k0, k1 = gysin_k_theory(n)
    if n == 1:
        assert (k0, k1) == (AbelianGroup(1), AbelianGroup(1))
    elif n == 2:
        assert (k0, k1) == (AbelianGroup(0), AbelianGroup(0))
    else:
        assert k0 == AbelianGroup(0, (n - 1,)) and k1 == AbelianGroup(0)
    assert k_theory_report(n)["euler"] == 1 - n


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_euler_class_uses_computed_determinant(n):
    e = euler_class(n)
    assert e.determinant == 1 and e.total == 1 - n
