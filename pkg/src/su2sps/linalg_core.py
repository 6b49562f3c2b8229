"""Dense linear-algebra helpers shared by the rest of the package.

Every linear map is a numpy array acting on column vectors.  Tensor
products follow the big-endian convention of :func:`numpy.kron`: the word
``(i_1, ..., i_m)`` over an alphabet of size ``q`` sits at flat index
``sum_j i_j * q**(m-j)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from itertools import product

import numpy as np

DEFAULT_TOL = 1e-9
RANK_RTOL = 1e-12
# Largest number of matrix entries any single assembled matrix may have.
SIZE_BUDGET = 3_000_000


class SizeLimitError(ValueError):
    """Raised when an assembled matrix would exceed the entry budget."""


class ContractError(ValueError):
    """Raised when an input violates a documented precondition."""


@dataclass(frozen=True)
class TensorIndexer:
    """Bijection between words over ``{0..q-1}`` of length ``degree`` and flat indices."""

    alphabet_size: int
    degree: int

    @property
    def size(self) -> int:
        return self.alphabet_size**self.degree

    def index(self, word) -> int:
        if len(word) != self.degree:
            raise ValueError(f"word {word!r} does not have length {self.degree}")
        idx = 0
        for letter in word:
            if not 0 <= letter < self.alphabet_size:
                raise ValueError(f"letter {letter} outside alphabet of size {self.alphabet_size}")
            idx = idx * self.alphabet_size + letter
        return idx

    def word(self, index: int) -> tuple[int, ...]:
        if not 0 <= index < self.size:
            raise ValueError(f"index {index} out of range")
        letters = []
        for _ in range(self.degree):
            index, r = divmod(index, self.alphabet_size)
            letters.append(r)
        return tuple(reversed(letters))

    def words(self):
        return product(range(self.alphabet_size), repeat=self.degree)


def check_budget(rows: int, cols: int, budget: int = SIZE_BUDGET) -> None:
    if rows * cols > budget:
        raise SizeLimitError(f"{rows}x{cols} matrix exceeds the budget of {budget} entries")


def kron(*factors: np.ndarray, budget: int = SIZE_BUDGET) -> np.ndarray:
    """Kronecker product of any number of matrices (or column vectors)."""
    mats = [np.atleast_2d(np.asarray(f)) for f in factors]
    rows = int(np.prod([m.shape[0] for m in mats]))
    cols = int(np.prod([m.shape[1] for m in mats]))
    check_budget(rows, cols, budget)
    return reduce(np.kron, mats)


def kron_apply(a: np.ndarray | int, b: np.ndarray | int, x: np.ndarray) -> np.ndarray:
    """Compute ``(a ⊗ b) @ x`` without forming the Kronecker product.

    An integer in place of ``a`` or ``b`` stands for the identity of that size.
    """
    a_in = a if isinstance(a, int) else a.shape[1]
    b_in = b if isinstance(b, int) else b.shape[1]
    if x.shape[0] != a_in * b_in:
        raise ValueError(f"operand has {x.shape[0]} rows, expected {a_in}*{b_in}")
    t = x.reshape(a_in, b_in, x.shape[1])
    if not isinstance(a, int):
        t = np.tensordot(a, t, axes=(1, 0))
    if not isinstance(b, int):
        t = np.moveaxis(np.tensordot(b, t, axes=(1, 1)), 0, 1)
    return t.reshape(t.shape[0] * t.shape[1], x.shape[1])


def dagger(a: np.ndarray) -> np.ndarray:
    return a.conj().T


def op_norm(a: np.ndarray) -> float:
    """Operator norm (largest singular value); 0 for empty matrices."""
    if a.size == 0:
        return 0.0
    if min(a.shape) <= 64:
        return float(np.linalg.norm(a, 2))
    # Largest eigenvalue of the smaller Gram matrix; accurate to ~1e-8 relative, far cheaper than an SVD.
    g = dagger(a) @ a if a.shape[0] >= a.shape[1] else a @ dagger(a)
    return float(np.sqrt(max(np.linalg.eigvalsh(g)[-1], 0.0)))


def _rank_from_singular_values(s: np.ndarray, tol: float) -> int:
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > tol * s[0]))


def onb_of_span(s: np.ndarray, tol: float = RANK_RTOL) -> np.ndarray:
    """Orthonormal basis (as columns) of the column span of ``s``."""
    s = np.atleast_2d(np.asarray(s))
    if s.shape[1] == 0:
        return np.zeros((s.shape[0], 0), dtype=s.dtype)
    u, sv, _ = np.linalg.svd(s, full_matrices=False)
    return u[:, : _rank_from_singular_values(sv, tol)]


def onb_of_complement(s: np.ndarray, ambient_dim: int, tol: float = RANK_RTOL) -> np.ndarray:
    """Orthonormal basis of the orthogonal complement of the column span of ``s``."""
    s = np.asarray(s)
    if s.size == 0:
        return np.eye(ambient_dim, dtype=s.dtype if s.dtype.kind == "c" else float)
    if s.ndim == 1:
        s = s[:, None]
    if s.shape[0] != ambient_dim:
        raise ValueError(f"spanning set lives in dimension {s.shape[0]}, not {ambient_dim}")
    u, sv, _ = np.linalg.svd(s, full_matrices=True)
    return u[:, _rank_from_singular_values(sv, tol) :]


def null_space(a: np.ndarray, tol: float = RANK_RTOL) -> np.ndarray:
    """Orthonormal basis of ``ker a``."""
    return onb_of_complement(dagger(a), a.shape[1], tol)


def inv_sqrt_psd(a: np.ndarray, tol: float = RANK_RTOL) -> np.ndarray:
    """Pseudo-inverse square root of a hermitian positive semidefinite matrix.

    Eigenvalues below ``tol`` times the largest one are treated as zero, so
    ``sqrtm(a) @ inv_sqrt_psd(a)`` is the projection onto the range of ``a``.
    """
    a = np.asarray(a)
    if a.size == 0:
        return a.copy()
    scale = max(op_norm(a), 1.0)
    if op_norm(a - dagger(a)) > 1e-8 * scale:
        raise ContractError("inv_sqrt_psd needs a hermitian matrix")
    w, v = np.linalg.eigh((a + dagger(a)) / 2)
    if w.min() < -1e-8 * scale:
        raise ContractError(f"matrix has negative eigenvalue {w.min():.3e}")
    cut = tol * max(w.max(), 0.0)
    inv = np.zeros_like(w)
    keep = w > cut
    inv[keep] = 1.0 / np.sqrt(w[keep])
    return (v * inv) @ dagger(v)


def projector(basis: np.ndarray) -> np.ndarray:
    return basis @ dagger(basis)


def projector_distance(b1: np.ndarray, b2: np.ndarray) -> float:
    """Operator-norm distance between the orthogonal projections onto two spans."""
    if b1.shape[0] != b2.shape[0]:
        raise ValueError("bases live in different ambient spaces")
    return op_norm(projector(b1) - projector(b2))


def isometry_defect(v: np.ndarray) -> float:
    return op_norm(dagger(v) @ v - np.eye(v.shape[1]))


def unitarity_defect(u: np.ndarray) -> float:
    if u.shape[0] != u.shape[1]:
        return float("inf")
    return max(isometry_defect(u), op_norm(u @ dagger(u) - np.eye(u.shape[0])))
