"""The spin-n/2 representation of SU(2) realised on symmetric tensors of C^2."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .linalg_core import SizeLimitError, dagger, kron, op_norm

MAX_IRREP_N = 8


@dataclass(frozen=True)
class SU2Element:
    """The matrix [[a, -conj(b)], [b, conj(a)]] with |a|^2 + |b|^2 = 1."""

    a: complex
    b: complex

    def __post_init__(self):
        if abs(abs(self.a) ** 2 + abs(self.b) ** 2 - 1.0) > 1e-12:
            raise ValueError("SU(2) element needs |a|^2 + |b|^2 = 1")

    @property
    def matrix(self) -> np.ndarray:
        a, b = complex(self.a), complex(self.b)
        return np.array([[a, -b.conjugate()], [b, a.conjugate()]])

    def __matmul__(self, other: "SU2Element") -> "SU2Element":
        g = self.matrix @ other.matrix
        return _renormalised(g[0, 0], g[1, 0])

    def inverse(self) -> "SU2Element":
        return SU2Element(complex(self.a).conjugate(), -complex(self.b))


def _renormalised(a: complex, b: complex) -> SU2Element:
    r = math.hypot(abs(a), abs(b))
    return SU2Element(complex(a) / r, complex(b) / r)


IDENTITY = SU2Element(1.0 + 0j, 0j)


def haar_sample(seed) -> SU2Element:
    """Deterministic Haar-distributed element: a normalised complex Gaussian pair."""
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(4)
    return _renormalised(complex(z[0], z[1]), complex(z[2], z[3]))


def torus_element(theta: float) -> SU2Element:
    return SU2Element(complex(math.cos(theta), math.sin(theta)), 0j)


def rotation_element(phi: float) -> SU2Element:
    return SU2Element(complex(math.cos(phi)), complex(math.sin(phi)))


def fixed_space_generators(seed=0) -> list[SU2Element]:
    """Elements used to cut out fixed spaces: two random ones and two at irrational angles."""
    seeds = np.random.SeedSequence(seed).spawn(2)
    return [haar_sample(seeds[0]), haar_sample(seeds[1]), torus_element(math.sqrt(2)), rotation_element(math.sqrt(3))]


def _permutation_operator(perm: tuple[int, ...]) -> np.ndarray:
    """Matrix of v_1⊗...⊗v_m ↦ v_{perm^{-1}(1)}⊗... on (C^2)^{⊗m}: tensor slot i moves to slot perm[i]."""
    m = len(perm)
    dim = 2**m
    eye = np.eye(dim).reshape((2,) * m + (dim,))
    axes = [0] * m
    for src, dst in enumerate(perm):
        axes[dst] = src
    return eye.transpose(axes + [m]).reshape(dim, dim)


def _transposition(m: int, i: int, j: int) -> np.ndarray:
    perm = list(range(m))
    perm[i], perm[j] = perm[j], perm[i]
    return _permutation_operator(tuple(perm))


@lru_cache(maxsize=None)
def symmetrizer(m: int) -> np.ndarray:
    """Projection onto symmetric tensors in (C^2)^{⊗m}.

    Uses the coset decomposition of S_m over S_{m-1}:
    p_m = (p_{m-1} ⊗ 1) · (1/m) Σ_{j<m} (j m), with (m m) the identity.
    """
    if m == 0:
        return np.ones((1, 1))
    if m == 1:
        return np.eye(2)
    avg = sum(_transposition(m, j, m - 1) for j in range(m - 1)) + np.eye(2**m)
    return np.kron(symmetrizer(m - 1), np.eye(2)) @ avg / m


@dataclass(frozen=True)
class IrrepRealization:
    n: int
    sym_projector: np.ndarray
    basis: np.ndarray

    @property
    def dim(self) -> int:
        return self.n + 1


def _unit(index: int, dim: int = 2) -> np.ndarray:
    v = np.zeros(dim)
    v[index] = 1.0
    return v


def symmetric_monomial(n: int, k: int) -> np.ndarray:
    """p_n(f_0^{⊗(n-k)} ⊗ f_1^{⊗k}) as a vector in (C^2)^{⊗n}."""
    vec = kron(*([_unit(0)] * (n - k) + [_unit(1)] * k)) if n else np.ones((1, 1))
    return symmetrizer(n) @ vec.reshape(-1)


@lru_cache(maxsize=None)
def symmetric_basis(n: int) -> IrrepRealization:
    """Orthonormal basis e_k = sqrt(C(n,k)) · p_n(f_0^{⊗(n-k)} ⊗ f_1^{⊗k}), k = 0..n.

    With this labelling e_0 = f_0 and e_1 = f_1 when n = 1.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if n > MAX_IRREP_N:
        raise SizeLimitError(f"n={n} exceeds the cap {MAX_IRREP_N} for the tensor realisation")
    p = symmetrizer(n)
    cols = []
    for k in range(n + 1):
        v = symmetric_monomial(n, k)
        expected = math.factorial(k) * math.factorial(n - k) / math.factorial(n)
        if abs(v @ v - expected) > 1e-12:
            raise ArithmeticError(f"norm of symmetric monomial {k} is {v @ v}, expected {expected}")
        cols.append(math.sqrt(math.comb(n, k)) * v)
    return IrrepRealization(n, p, np.column_stack(cols))


def irrep_matrix(real: IrrepRealization, g: SU2Element) -> np.ndarray:
    """Matrix of rho_n(g) in the basis e_0..e_n."""
    big = kron(*([g.matrix] * real.n))
    return dagger(real.basis) @ big @ real.basis


def irrep(n: int, g: SU2Element) -> np.ndarray:
    """rho_n(g); n = 0 is the trivial representation."""
    if n == 0:
        return np.ones((1, 1), dtype=complex)
    return irrep_matrix(symmetric_basis(n), g)


def invariant_subspace(unitaries, tol: float = 1e-9) -> np.ndarray:
    """Orthonormal basis of the joint fixed space of the given unitaries."""
    unitaries = [np.asarray(u) for u in unitaries]
    dim = unitaries[0].shape[0]
    if any(u.shape != (dim, dim) for u in unitaries):
        raise ValueError("all unitaries must be square of equal size")
    stacked = np.vstack([u - np.eye(dim) for u in unitaries])
    # ker(A) is the complement of the row space of A, i.e. of the column span of A^H.
    u, s, _ = np.linalg.svd(dagger(stacked), full_matrices=True)
    rank = int(np.count_nonzero(s > tol))
    return u[:, rank:]


def representation_residuals(n: int, samples: int = 10, seed=0) -> dict[str, float]:
    """Worst unitarity and multiplicativity defects of rho_n over random samples."""
    real = symmetric_basis(n)
    seeds = np.random.SeedSequence(seed).spawn(2 * samples)
    unit = mult = 0.0
    for i in range(samples):
        g, h = haar_sample(seeds[2 * i]), haar_sample(seeds[2 * i + 1])
        rg, rh = irrep_matrix(real, g), irrep_matrix(real, h)
        unit = max(unit, op_norm(dagger(rg) @ rg - np.eye(n + 1)))
        mult = max(mult, op_norm(irrep_matrix(real, g @ h) - rg @ rh))
    return {"unitarity": unit, "multiplicativity": mult}


__all__ = [
    "IDENTITY",
    "IrrepRealization",
    "SU2Element",
    "fixed_space_generators",
    "haar_sample",
    "invariant_subspace",
    "irrep",
    "irrep_matrix",
    "representation_residuals",
    "rotation_element",
    "symmetric_basis",
    "symmetrizer",
    "torus_element",
]
