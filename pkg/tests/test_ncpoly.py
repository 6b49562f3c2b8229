import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from su2sps.linalg_core import projector_distance
from su2sps.ncpoly import (
    GeneratorRangeError,
    HomogeneityError,
    HomogeneousIdeal,
    NcPolynomial,
    PolynomialSyntaxError,
    determinant_ideal,
    format_polynomial,
    ideal_component,
    ideal_from_system,
    parse_polynomial,
    system_from_ideal,
    verify_ideal_correspondence,
)


def commutator_ideal(n):
    gens = []
    for i in range(n + 1):
        for j in range(i + 1, n + 1):
            gens.append(NcPolynomial.from_terms(n, {(i, j): 1, (j, i): -1}))
    return HomogeneousIdeal(n, gens)


def test_parse_simple():
    p = parse_polynomial("x0*x1 - x1*x0", 1)
    assert p.degree == 2 and p.terms == {(0, 1): 1, (1, 0): -1}


def test_parse_coefficients():
    p = parse_polynomial("(1+2i)*x0*x1 - 3/2 x1*x0 + 0.5*x1*x1", 1)
    assert p.terms[(0, 1)] == 1 + 2j
    assert p.terms[(1, 0)] == -1.5
    assert p.terms[(1, 1)] == 0.5


def test_parse_collects_like_terms_and_cancels():
    p = parse_polynomial("x0*x1 + x0*x1 - 2*x0*x1", 1)
    assert p.is_zero()


@pytest.mark.parametrize(
    ("text", "error"),
    [
        ("x0*x1 + x0", HomogeneityError),
        ("x0*x3", GeneratorRangeError),
        ("x0 ** x1", PolynomialSyntaxError),
        ("x0 $ x1", PolynomialSyntaxError),
        ("(1+2i*x0", PolynomialSyntaxError),
    ],
)
def test_parse_errors(text, error):
    with pytest.raises(error):
        parse_polynomial(text, 2)


def test_syntax_error_has_position():
    with pytest.raises(PolynomialSyntaxError) as info:
        parse_polynomial("x0 $ x1", 1)
    assert info.value.position == 3


coefficients = st.one_of(
    st.integers(min_value=-5, max_value=5).filter(bool).map(complex),
    st.tuples(st.integers(-4, 4), st.integers(-4, 4)).filter(any).map(lambda t: complex(*t)),
)


@st.composite
def polynomials(draw):
    n = draw(st.integers(min_value=1, max_value=3))
    degree = draw(st.integers(min_value=1, max_value=3))
    words = draw(st.lists(st.tuples(*[st.integers(0, n)] * degree), min_size=1, max_size=5, unique=True))
    return NcPolynomial.from_terms(n, {w: draw(coefficients) for w in words})


@given(polynomials())
def test_format_parse_round_trip(p):
    back = parse_polynomial(format_polynomial(p), p.n)
    assert back.terms == p.terms


@given(polynomials())
def test_vector_round_trip(p):
    back = NcPolynomial.from_vector(p.vector(), p.n, p.degree)
    assert back.terms == p.terms


def test_product_concatenates_words():
    a = parse_polynomial("x0 + x1", 1)
    b = parse_polynomial("x0 - x1", 1)
    assert (a * b).terms == {(0, 0): 1, (0, 1): -1, (1, 0): 1, (1, 1): -1}


def test_constant_generators_rejected():
    with pytest.raises(ValueError):
        HomogeneousIdeal(1, [NcPolynomial.from_terms(1, {(): 1})])


@pytest.mark.parametrize("n", [1, 2])
def test_commutator_ideal_gives_symmetric_algebra(n):
    sys = system_from_ideal(commutator_ideal(n), 4)
    assert sys.dims == [math.comb(m + n, n) for m in range(5)]


def test_zero_ideal_gives_full_tensor_algebra():
    sys = system_from_ideal(HomogeneousIdeal(1, []), 3)
    assert sys.dims == [1, 2, 4, 8]


@pytest.mark.parametrize(("n", "M"), [(1, 5), (2, 5)])
def test_determinant_ideal_reproduces_system(get_system, n, M):
    sys = get_system(n, M)
    reps = verify_ideal_correspondence(sys)
    assert all(r.passed for r in reps), [r.line() for r in reps if not r.passed]
    other = system_from_ideal(determinant_ideal(n), M)
    assert other.dims == sys.dims
    for m in range(1, M + 1):
        assert projector_distance(other.basis(m), sys.basis(m)) < 1e-9


def test_ideal_from_system_is_the_orthocomplement(get_system):
    sys = get_system(2, 3)
    slices = dict(ideal_from_system(sys))
    assert 1 not in slices
    for m in (2, 3):
        assert projector_distance(slices[m], ideal_component(determinant_ideal(2), m)) < 1e-9


def test_determinant_generator_coefficients():
    gen = determinant_ideal(2).generators[0]
    assert gen.terms == {(0, 2): 1, (1, 1): -1, (2, 0): 1}
    assert np.isclose(np.linalg.norm(gen.vector()), math.sqrt(3))
