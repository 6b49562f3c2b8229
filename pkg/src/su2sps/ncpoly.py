"""Homogeneous polynomials in noncommuting variables x_0..x_n and their two-sided ideals.

A polynomial of degree m is identified with its coefficient vector in
(C^{n+1})^{⊗m}: the word x_{i_1}...x_{i_m} maps to e_{i_1} ⊗ ... ⊗ e_{i_m}.
Degree slices of a homogeneous ideal are then subspaces of tensor powers,
and their orthogonal complements form a subproduct system.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .linalg_core import SIZE_BUDGET, TensorIndexer, check_budget, kron, onb_of_complement, onb_of_span, projector_distance
from .report import IdentityReport, exact
from .sps_core import SubproductSystem

Word = tuple[int, ...]


class PolynomialSyntaxError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class HomogeneityError(ValueError):
    pass


class GeneratorRangeError(ValueError):
    pass


@dataclass(frozen=True)
class NcPolynomial:
    n: int
    terms: dict  # Word -> complex, no zero entries
    degree: int

    @classmethod
    def from_terms(cls, n: int, terms: dict) -> "NcPolynomial":
        clean = {tuple(w): complex(c) for w, c in terms.items() if c != 0}
        degrees = {len(w) for w in clean}
        if len(degrees) > 1:
            raise HomogeneityError(f"terms of degrees {sorted(degrees)} mixed")
        for w in clean:
            if any(not 0 <= x <= n for x in w):
                raise GeneratorRangeError(f"word {w} uses a generator outside x0..x{n}")
        degree = degrees.pop() if degrees else 0
        return cls(n, dict(sorted(clean.items())), degree)

    def __add__(self, other: "NcPolynomial") -> "NcPolynomial":
        out = dict(self.terms)
        for w, c in other.terms.items():
            out[w] = out.get(w, 0) + c
        return NcPolynomial.from_terms(max(self.n, other.n), out)

    def __neg__(self) -> "NcPolynomial":
        return NcPolynomial.from_terms(self.n, {w: -c for w, c in self.terms.items()})

    def __sub__(self, other: "NcPolynomial") -> "NcPolynomial":
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, NcPolynomial):
            out: dict = {}
            for w1, c1 in self.terms.items():
                for w2, c2 in other.terms.items():
                    out[w1 + w2] = out.get(w1 + w2, 0) + c1 * c2
            return NcPolynomial.from_terms(max(self.n, other.n), out)
        return NcPolynomial.from_terms(self.n, {w: c * other for w, c in self.terms.items()})

    __rmul__ = __mul__

    def is_zero(self) -> bool:
        return not self.terms

    def vector(self) -> np.ndarray:
        """Coefficient vector in (C^{n+1})^{⊗degree}."""
        idx = TensorIndexer(self.n + 1, self.degree)
        v = np.zeros(idx.size, dtype=complex)
        for w, c in self.terms.items():
            v[idx.index(w)] = c
        return v if np.any(v.imag) else v.real.copy()

    @classmethod
    def from_vector(cls, vec: np.ndarray, n: int, degree: int, tol: float = 1e-12) -> "NcPolynomial":
        idx = TensorIndexer(n + 1, degree)
        return cls.from_terms(n, {idx.word(i): complex(c) for i, c in enumerate(vec) if abs(c) > tol})

    def __str__(self) -> str:
        return format_polynomial(self)


# parsing

_TOKEN = re.compile(
    r"""
    (?P<space>\s+)
  | (?P<gen>x(?P<index>\d+))
  | (?P<rational>\d+/\d+)
  | (?P<decimal>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<imag>i)
  | (?P<op>[+\-*()])
    """,
    re.VERBOSE,
)


def _tokenize(text: str):
    pos = 0
    tokens = []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise PolynomialSyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        if kind == "index":
            kind = "gen"
        if kind != "space":
            value = m.group(kind)
            if kind == "gen":
                value = int(m.group("index"))
            tokens.append((kind, value, pos))
        pos = m.end()
    tokens.append(("end", None, len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, n: int):
        self.tokens = _tokenize(text)
        self.i = 0
        self.n = n

    def peek(self, offset: int = 0):
        return self.tokens[min(self.i + offset, len(self.tokens) - 1)]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op: str):
        kind, value, pos = self.take()
        if kind != "op" or value != op:
            raise PolynomialSyntaxError(f"expected {op!r}", pos)

    def number(self) -> float:
        kind, value, pos = self.take()
        if kind == "rational":
            return float(Fraction(value))
        if kind == "decimal":
            return float(value)
        raise PolynomialSyntaxError("expected a number", pos)

    def signed_number(self) -> float:
        kind, value, _ = self.peek()
        sign = 1.0
        if kind == "op" and value in "+-":
            self.take()
            sign = -1.0 if value == "-" else 1.0
        return sign * self.number()

    def composite(self) -> complex:
        # '(' a ')' | '(' a 'i' ')' | '(' a ('+'|'-') b 'i' ')'
        self.expect_op("(")
        kind, value, pos = self.peek()
        if kind == "imag":
            self.take()
            self.expect_op(")")
            return 1j
        first = self.signed_number()
        kind, value, pos = self.peek()
        if kind == "imag":
            self.take()
            self.expect_op(")")
            return complex(0.0, first)
        if kind == "op" and value in "+-":
            self.take()
            sign = -1.0 if value == "-" else 1.0
            if self.peek()[0] == "imag":
                second = 1.0
            else:
                second = self.number()
            kind, _, pos = self.take()
            if kind != "imag":
                raise PolynomialSyntaxError("expected 'i' in complex coefficient", pos)
            self.expect_op(")")
            return complex(first, sign * second)
        self.expect_op(")")
        return complex(first)

    def coefficient(self):
        kind, value, _ = self.peek()
        if kind in ("rational", "decimal"):
            return complex(self.number())
        if kind == "imag":
            self.take()
            return 1j
        if kind == "op" and value == "(":
            return self.composite()
        return None

    def monomial(self) -> Word:
        letters = []
        while True:
            kind, value, pos = self.take()
            if kind != "gen":
                raise PolynomialSyntaxError("expected a generator x<index>", pos)
            if value > self.n:
                raise GeneratorRangeError(f"generator x{value} at position {pos} exceeds x{self.n}")
            letters.append(value)
            if self.peek()[0] == "op" and self.peek()[1] == "*":
                self.take()
                continue
            return tuple(letters)

    def term(self):
        start = self.peek()[2]
        coeff = self.coefficient()
        kind, value, pos = self.peek()
        if kind == "op" and value == "*":
            if coeff is None:
                raise PolynomialSyntaxError("'*' without a coefficient", pos)
            self.take()
            return coeff, self.monomial(), start
        if kind == "gen":
            return (1.0 if coeff is None else coeff), self.monomial(), start
        if coeff is None:
            raise PolynomialSyntaxError("expected a term", pos)
        return coeff, (), start

    def polynomial(self) -> NcPolynomial:
        terms: dict = {}
        sign = 1.0
        kind, value, _ = self.peek()
        if kind == "op" and value in "+-":
            self.take()
            sign = -1.0 if value == "-" else 1.0
        degree = None
        while True:
            coeff, word, start = self.term()
            if degree is None:
                degree = len(word)
            elif len(word) != degree:
                raise HomogeneityError(f"term at position {start} has degree {len(word)}, expected {degree}")
            terms[word] = terms.get(word, 0) + sign * coeff
            kind, value, pos = self.peek()
            if kind == "end":
                break
            if kind == "op" and value in "+-":
                self.take()
                sign = -1.0 if value == "-" else 1.0
                continue
            raise PolynomialSyntaxError("expected '+', '-' or end of input", pos)
        poly = NcPolynomial.from_terms(self.n, terms)
        if poly.is_zero():
            return NcPolynomial(self.n, {}, degree or 0)
        return poly


def parse_polynomial(text: str, n: int) -> NcPolynomial:
    """Parse e.g. ``"x0*x2 - x1*x1 + x2*x0"`` or ``"(1+2i)*x0*x1 - 3/2 x1*x0"``."""
    return _Parser(text, n).polynomial()


def _format_real(x: float) -> str:
    return repr(float(x))


def _format_coefficient(c: complex) -> tuple[str, str]:
    """Sign and body of a coefficient; body is '' for a unit coefficient."""
    if c.imag == 0:
        sign = "-" if c.real < 0 else "+"
        mag = abs(c.real)
        return sign, "" if mag == 1.0 else _format_real(mag)
    im = c.imag
    body = f"({_format_real(c.real)}{'-' if im < 0 else '+'}{_format_real(abs(im))}i)"
    return "+", body


def format_polynomial(p: NcPolynomial) -> str:
    if p.is_zero():
        return "0"
    parts = []
    for word, c in p.terms.items():
        sign, body = _format_coefficient(c)
        mono = "*".join(f"x{i}" for i in word)
        if not mono:
            term = body or "1"
        elif body:
            term = f"{body}*{mono}"
        else:
            term = mono
        if not parts:
            parts.append(("-" if sign == "-" else "") + term)
        else:
            parts.append(f" {sign} {term}")
    return "".join(parts)


# ideals


@dataclass(frozen=True)
class HomogeneousIdeal:
    n: int
    generators: tuple

    def __init__(self, n: int, generators=()):
        gens = tuple(generators)
        for g in gens:
            if g.degree < 1 and not g.is_zero():
                raise ValueError("generators must have degree >= 1 (the ideal would not be proper)")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "generators", tuple(g for g in gens if not g.is_zero()))


def determinant_ideal(n: int) -> HomogeneousIdeal:
    """Ideal generated by Σ_i (-1)^i x_i x_{n-i}."""
    gen = NcPolynomial.from_terms(n, {(i, n - i): (-1) ** i for i in range(n + 1)})
    return HomogeneousIdeal(n, [gen])


def ideal_spanning_set(J: HomogeneousIdeal, m: int, budget: int = SIZE_BUDGET) -> np.ndarray:
    q = J.n + 1
    cols = []
    for p in J.generators:
        d = p.degree
        if d > m:
            continue
        check_budget(q**m, (m - d + 1) * q ** (m - d), budget)
        v = p.vector()[:, None]
        for a in range(m - d + 1):
            cols.append(kron(np.eye(q**a), v, np.eye(q ** (m - d - a)), budget=budget))
    if not cols:
        return np.zeros((q**m, 0))
    return np.hstack(cols)


def ideal_component(J: HomogeneousIdeal, m: int) -> np.ndarray:
    """Orthonormal basis of J^{(m)}: the span of x^α p x^β with |α| + |β| = m - deg p."""
    if m < 0:
        raise ValueError("degree must be non-negative")
    if m == 0:
        return np.zeros((1, 0))
    return onb_of_span(ideal_spanning_set(J, m))


def system_from_ideal(J: HomogeneousIdeal, M: int) -> SubproductSystem:
    """Subproduct system with E_m = (C^{n+1})^{⊗m} ⊖ J^{(m)}."""
    q = J.n + 1
    bases = [np.ones((1, 1))]
    for m in range(1, M + 1):
        comp = ideal_component(J, m)
        if comp.shape[1] >= q**m:
            raise ValueError(f"ideal is not proper: its degree-{m} slice is everything")
        bases.append(onb_of_complement(comp, q**m))
    return SubproductSystem.from_bases(J.n, bases)


def verify_ideal_correspondence(sys: SubproductSystem, tol: float = 1e-9) -> list[IdentityReport]:
    """The determinant ideal reproduces ``sys`` degree by degree: equal dimensions and equal subspaces."""
    other = system_from_ideal(determinant_ideal(sys.n), sys.M)
    out = []
    for m in range(1, sys.M + 1):
        out.append(exact("ideal_system_dimension", other.dim(m), sys.dim(m), n=sys.n, m=m))
        dist = projector_distance(other.basis(m), sys.basis(m))
        out.append(IdentityReport("ideal_system_subspace", {"n": sys.n, "m": m}, dist, tol))
    return out


def ideal_from_system(sys: SubproductSystem, M: int | None = None) -> list[tuple[int, np.ndarray]]:
    """Per degree, an orthonormal basis of the coefficient vectors orthogonal to E_m (zero slices dropped)."""
    top = sys.M if M is None else M
    out = []
    for m in range(1, top + 1):
        comp = onb_of_complement(sys.basis(m), sys.q**m)
        if comp.shape[1]:
            out.append((m, comp))
    return out
