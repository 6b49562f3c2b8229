"""Subproduct systems inside tensor powers, and the SU(2)-equivariant one of an irreducible representation.

A system is stored through its *right inclusions*: for each m >= 2 the matrix
``R_m`` of the isometry E_m -> E_{m-1} ⊗ E_1 in orthonormal coordinates, plus
the ambient basis of E_1.  Ambient bases of E_m, the general inclusions
E_{k+m} -> E_k ⊗ E_m and their adjoints (the structure coisometries) are all
derived from these, so degrees far beyond what fits in (n+1)^m coordinates
remain accessible.
"""

from __future__ import annotations

import json
import math
import threading
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from .linalg_core import (
    DEFAULT_TOL,
    SIZE_BUDGET,
    SizeLimitError,
    check_budget,
    dagger,
    isometry_defect,
    kron,
    kron_apply,
    null_space,
    onb_of_complement,
    op_norm,
    projector_distance,
)
from .report import IdentityReport, exact
from .sequences import dim_sequence
from .su2_rep import SU2Element, fixed_space_generators, haar_sample, invariant_subspace, irrep

__all__ = [
    "IdentityReport",
    "SubproductSystem",
    "build_system",
    "determinant_dimension",
    "determinant_dimension_numeric",
    "determinant_vector",
    "load_system",
    "structure_coisometry",
    "verify_axioms",
    "verify_determinant",
    "verify_equivariance",
]


def determinant_vector(n: int) -> np.ndarray:
    """delta = (n+1)^{-1/2} Σ_k (-1)^k e_k ⊗ e_{n-k}, as a flat vector of length (n+1)^2."""
    if n < 1:
        raise ValueError("n must be positive")
    q = n + 1
    v = np.zeros(q * q)
    for k in range(q):
        v[k * q + (n - k)] = (-1) ** k
    return v / math.sqrt(q)


def verify_determinant(n: int, seed=0, tol: float = DEFAULT_TOL) -> list[IdentityReport]:
    """Compare the fixed space of rho_n ⊗ rho_n with the closed-form delta."""
    gens = [irrep(n, g) for g in fixed_space_generators(seed)]
    fixed = invariant_subspace([np.kron(u, u) for u in gens])
    delta = determinant_vector(n)[:, None]
    reports = [exact("determinant_dimension", fixed.shape[1], 1, n=n)]
    if fixed.shape[1] == 1:
        reports.append(IdentityReport("determinant_vector", {"n": n}, projector_distance(fixed, delta), tol))
    reports.append(IdentityReport("determinant_norm", {"n": n}, abs(np.linalg.norm(delta) - 1.0), 1e-12))
    return reports


def determinant_dimension(multiplicities: Sequence[int]) -> int:
    """Dimension of the determinant of ⊕_m rho_m^{⊕k_m}: Σ k_m^2."""
    if any(k < 0 for k in multiplicities):
        raise ValueError("multiplicities must be non-negative")
    return sum(k * k for k in multiplicities)


def _block_diag(blocks: list[np.ndarray]) -> np.ndarray:
    size = sum(b.shape[0] for b in blocks)
    out = np.zeros((size, size), dtype=complex)
    pos = 0
    for b in blocks:
        out[pos : pos + b.shape[0], pos : pos + b.shape[0]] = b
        pos += b.shape[0]
    return out


def determinant_dimension_numeric(multiplicities: Sequence[int], seed=0) -> int:
    """Fixed-space dimension of τ⊗τ for τ = ⊕_m rho_m^{⊕k_m}, computed from sampled group elements."""
    if sum(multiplicities) == 0:
        return 0
    mats = []
    for g in fixed_space_generators(seed):
        blocks = [irrep(m, g) for m, k in enumerate(multiplicities) for _ in range(k)]
        tau = _block_diag(blocks)
        mats.append(np.kron(tau, tau))
    return invariant_subspace(mats).shape[1]


def _flatten_columns(mat: np.ndarray) -> list[list[float]]:
    return [[float(z.real), float(z.imag)] for z in np.asarray(mat, dtype=complex).ravel(order="F")]


def _unflatten_columns(data, rows: int, cols: int) -> np.ndarray:
    arr = np.array(data, dtype=float).reshape(-1, 2) if len(data) else np.zeros((0, 2))
    if arr.shape[0] != rows * cols:
        raise ValueError(f"expected {rows * cols} entries, found {arr.shape[0]}")
    z = arr[:, 0] + 1j * arr[:, 1] if np.any(arr[:, 1]) else arr[:, 0].copy()
    return z.reshape((rows, cols), order="F")


@dataclass
class SubproductSystem:
    """Standard subproduct system with fibres E_0 = C, E_1 ⊆ C^{n+1}, E_m ⊆ E_{m-1} ⊗ E_1.

    ``first`` is the ambient basis of E_1 and ``right`` maps m >= 2 to the
    coordinates of E_m inside E_{m-1} ⊗ E_1.  ``equivariant`` marks systems
    built from the SU(2) representation on C^{n+1} (those carry delta).
    """

    n: int
    M: int
    first: np.ndarray
    right: dict[int, np.ndarray]
    equivariant: bool = False
    _cache: dict = field(default_factory=dict, repr=False, compare=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def __post_init__(self):
        # one memory layout whatever the source, so BLAS sums in the same order for built and loaded systems
        self.first = np.ascontiguousarray(self.first)
        self.right = {m: np.ascontiguousarray(r) for m, r in self.right.items()}

    @property
    def q(self) -> int:
        """Size of the ambient alphabet, n+1."""
        return self.n + 1

    @property
    def dims(self) -> list[int]:
        return [self.dim(m) for m in range(self.M + 1)]

    def dim(self, m: int) -> int:
        if m < 0:
            return 0
        if m == 0:
            return 1
        if m == 1:
            return self.first.shape[1]
        return self._right(m).shape[1]

    def _right(self, m: int) -> np.ndarray:
        if m > self.M:
            raise IndexError(f"degree {m} beyond the constructed range 0..{self.M}")
        return self.right[m]

    def _cached(self, key, compute):
        with self._lock:
            if key in self._cache:
                return self._cache[key]
        value = compute()
        value.setflags(write=False)
        with self._lock:
            return self._cache.setdefault(key, value)

    def inclusion(self, k: int, m: int) -> np.ndarray:
        """Matrix of the isometry E_{k+m} -> E_k ⊗ E_m in fibre coordinates."""
        if k < 0 or m < 0:
            raise IndexError("negative degree")
        if k + m > self.M:
            raise IndexError(f"inclusion ({k},{m}) needs degree {k + m} > {self.M}")
        if k == 0 or m == 0:
            return np.eye(self.dim(k + m))
        if m == 1:
            return self._right(k + 1)
        return self._cached(("inc", k, m), lambda: self._inclusion_recursive(k, m))

    def _inclusion_recursive(self, k: int, m: int) -> np.ndarray:
        # (1_k ⊗ ι_{m-1,1}) ι_{k,m} = (ι_{k,m-1} ⊗ 1) ι_{k+m-1,1}; the left factor is an isometry.
        lifted = kron_apply(self.inclusion(k, m - 1), self.dim(1), self._right(k + m))
        return kron_apply(self.dim(k), dagger(self.inclusion(m - 1, 1)), lifted)

    def coisometry(self, k: int, m: int) -> np.ndarray:
        """Matrix of ι*_{k,m}: E_k ⊗ E_m -> E_{k+m}."""
        return dagger(self.inclusion(k, m))

    def projection(self, k: int, m: int) -> np.ndarray:
        inc = self.inclusion(k, m)
        return inc @ dagger(inc)

    def basis(self, m: int, budget: int = SIZE_BUDGET) -> np.ndarray:
        """Ambient orthonormal basis of E_m inside (C^{n+1})^{⊗m}."""
        if m == 0:
            return np.ones((1, 1))
        if m == 1:
            return self.first
        check_budget(self.q**m, self.dim(m), budget)
        return self._cached(("basis", m), lambda: kron(self.basis(m - 1, budget), self.first, budget=budget) @ self._right(m))

    def coisometry_ambient(self, k: int, m: int) -> np.ndarray:
        """ι*_{k,m} recomputed as B_{k+m}^H (B_k ⊗ B_m); an independent route for cross-checks."""
        return dagger(self.basis(k + m)) @ kron(self.basis(k), self.basis(m))

    def tau(self, m: int, g: SU2Element, _memo: dict | None = None) -> np.ndarray:
        """Compression of rho(g)^{⊗m} to E_m, built degree by degree."""
        if not self.equivariant:
            raise TypeError("group action is only defined for the SU(2) systems")
        memo = {} if _memo is None else _memo
        if m in memo:
            return memo[m]
        if m == 0:
            out = np.ones((1, 1), dtype=complex)
        elif m == 1:
            out = dagger(self.first) @ irrep(self.n, g) @ self.first
        else:
            r = self._right(m)
            out = dagger(r) @ kron(self.tau(m - 1, g, memo), self.tau(1, g, memo)) @ r
        memo[m] = out
        return out

    def taus(self, g: SU2Element, top: int | None = None) -> list[np.ndarray]:
        memo: dict = {}
        return [self.tau(m, g, memo) for m in range(0, (self.M if top is None else top) + 1)]

    # persistence

    def to_json(self) -> dict:
        ambient_ok = all(self.q**m * self.dim(m) <= SIZE_BUDGET for m in range(self.M + 1))
        out = {"n": self.n, "M": self.M, "dims": self.dims, "equivariant": self.equivariant}
        if ambient_ok:
            out["bases"] = [_flatten_columns(self.basis(m)) for m in range(self.M + 1)]
        out["first"] = _flatten_columns(self.first)
        out["inclusions"] = [_flatten_columns(self._right(m)) for m in range(2, self.M + 1)]
        return out

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh)

    @classmethod
    def from_json(cls, data: dict) -> "SubproductSystem":
        n, M = int(data["n"]), int(data["M"])
        q = n + 1
        if "inclusions" in data and "dims" in data:
            dims = [int(x) for x in data["dims"]]
            first = _unflatten_columns(data["first"], q, dims[1])
            right = {
                m: _unflatten_columns(blob, dims[m - 1] * dims[1], dims[m])
                for m, blob in zip(range(2, M + 1), data["inclusions"])
            }
            return cls(n, M, first, right, bool(data.get("equivariant", False)))
        bases = []
        for m, blob in enumerate(data["bases"]):
            rows = q**m
            bases.append(_unflatten_columns(blob, rows, len(blob) // rows if rows else 0))
        return cls.from_bases(n, bases, equivariant=bool(data.get("equivariant", False)))

    @classmethod
    def from_bases(cls, n: int, bases: Sequence[np.ndarray], equivariant: bool = False, tol: float = 1e-10):
        """Build from ambient bases B_0..B_M, checking E_m ⊆ E_{m-1} ⊗ E_1 along the way."""
        M = len(bases) - 1
        first = np.asarray(bases[1]) if M >= 1 else np.eye(n + 1)
        right = {}
        for m in range(2, M + 1):
            lift = kron(bases[m - 1], first)
            r = dagger(lift) @ bases[m]
            if op_norm(lift @ r - bases[m]) > tol:
                raise ArithmeticError(f"E_{m} is not contained in E_{m - 1} ⊗ E_1")
            right[m] = r
        return cls(n, M, first, right, equivariant)


def load_system(path) -> SubproductSystem:
    with open(path, encoding="utf-8") as fh:
        return SubproductSystem.from_json(json.load(fh))


def _right_step(prev: np.ndarray, delta_mat: np.ndarray, d_prevprev: int, q: int) -> np.ndarray:
    """Coordinates of E_m in E_{m-1} ⊗ E_1: vectors whose last two legs are orthogonal to delta."""
    # prev maps E_{m-1} into E_{m-2} ⊗ E_1; contract its E_1 leg and a new E_1 leg with delta^*.
    r3 = prev.reshape(d_prevprev, q, prev.shape[1])
    constraint = np.einsum("aib,ij->abj", r3, delta_mat.conj()).reshape(d_prevprev, prev.shape[1] * q)
    return null_space(constraint)


def _k_space_spanning(n: int, m: int) -> np.ndarray:
    """Columns kron(I, delta, I) spanning Σ_i H^{⊗i} ⊗ C·delta ⊗ H^{⊗(m-2-i)}."""
    q = n + 1
    delta = determinant_vector(n)[:, None]
    cols = [kron(np.eye(q**i), delta, np.eye(q ** (m - 2 - i))) for i in range(m - 1)]
    return np.hstack(cols)


def build_system(n: int, M: int, method: str = "recursive", budget: int = SIZE_BUDGET) -> SubproductSystem:
    """The SU(2)-equivariant subproduct system of rho_n up to degree M.

    ``method="recursive"`` cuts E_m out of E_{m-1} ⊗ E_1 (cost governed by d_m);
    ``method="direct"`` takes the orthogonal complement of the spanning set of
    K_m in (C^{n+1})^{⊗m} and is limited by the ambient size budget.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if M < 0:
        raise ValueError("M must be non-negative")
    d = dim_sequence(n, max(M, 1))
    q = n + 1
    if method == "direct":
        for m in range(2, M + 1):
            check_budget(q**m, (m - 1) * q ** (m - 2), budget)
        bases = [np.ones((1, 1))] + ([np.eye(q)] if M >= 1 else [])
        for m in range(2, M + 1):
            b = onb_of_complement(_k_space_spanning(n, m), q**m)
            if b.shape[1] != d[m]:
                raise ArithmeticError(f"dim E_{m} = {b.shape[1]}, expected {d[m]}")
            bases.append(b)
        return SubproductSystem.from_bases(n, bases, equivariant=True)
    if method != "recursive":
        raise ValueError(f"unknown method {method!r}")
    delta_mat = determinant_vector(n).reshape(q, q)
    right: dict[int, np.ndarray] = {}
    prev = np.eye(q)  # E_1 inside E_0 ⊗ E_1
    for m in range(2, M + 1):
        check_budget(d[m - 1] * q, d[m - 1] * q, budget * 4)
        r = _right_step(prev, delta_mat, d[m - 2], q)
        if r.shape[1] != d[m]:
            raise ArithmeticError(f"dim E_{m} = {r.shape[1]}, expected {d[m]}")
        right[m] = r
        prev = r
    return SubproductSystem(n, M, np.eye(q), right, equivariant=True)


def structure_coisometry(sys: SubproductSystem, k: int, m: int) -> np.ndarray:
    return sys.coisometry(k, m)


def verify_axioms(sys: SubproductSystem, tol: float = 1e-10, ambient_budget: int = SIZE_BUDGET) -> list[IdentityReport]:
    """Subproduct axioms and dimension facts, in fibre coordinates and (where small) ambiently."""
    M, n = sys.M, sys.n
    reports: list[IdentityReport] = []
    if sys.equivariant:
        d = dim_sequence(n, max(M, 1))
        for m in range(M + 1):
            reports.append(exact("fibre_dimension", sys.dim(m), d[m], n=n, m=m))
    for m in range(2, M + 1):
        reports.append(IdentityReport("right_inclusion_isometry", {"n": n, "m": m}, isometry_defect(sys.inclusion(m - 1, 1)), tol))
    for k in range(1, M + 1):
        for m in range(1, M + 1 - k):
            c = sys.coisometry(k, m)
            reports.append(IdentityReport("coisometry_rows", {"n": n, "k": k, "m": m}, op_norm(c @ dagger(c) - np.eye(c.shape[0])), tol))
    for k in range(1, M + 1):
        for l in range(1, M + 1 - k):
            for m in range(1, M + 1 - k - l):
                lhs = kron_apply(sys.dim(k), sys.inclusion(l, m), sys.inclusion(k, l + m))
                rhs = kron_apply(sys.inclusion(k, l), sys.dim(m), sys.inclusion(k + l, m))
                reports.append(IdentityReport("coassociativity", {"n": n, "k": k, "l": l, "m": m}, op_norm(lhs - rhs), tol))
    ambient_top = max((m for m in range(M + 1) if sys.q**m * sys.dim(m) <= ambient_budget), default=0)
    for k in range(1, ambient_top + 1):
        for m in range(1, ambient_top + 1 - k):
            big = sys.basis(k + m)
            lift = kron(sys.basis(k), sys.basis(m))
            contained = op_norm(big - lift @ (dagger(lift) @ big))
            reports.append(IdentityReport("subproduct_inclusion", {"n": n, "k": k, "m": m}, contained, tol))
            routes = op_norm(sys.coisometry(k, m) - sys.coisometry_ambient(k, m))
            reports.append(IdentityReport("coisometry_two_routes", {"n": n, "k": k, "m": m}, routes, tol))
    if sys.equivariant and M >= 2:
        delta = determinant_vector(n)[:, None]
        e2 = sys.basis(2)
        reports.append(IdentityReport("second_fibre_is_delta_complement", {"n": n}, op_norm(e2 @ dagger(e2) + delta @ dagger(delta) - np.eye(sys.q**2)), 1e-12))
        reports.append(exact("noncommutative_witness", sys.dim(2) > (n + 2) * (n + 1) // 2, n > 1, n=n))
    return reports


def verify_equivariance(sys: SubproductSystem, samples: int = 3, seed=0, tol: float = DEFAULT_TOL, ambient_budget: int = 200_000) -> list[IdentityReport]:
    """Invariance of the fibres, unitarity of the compressed action and equivariance of the coisometries."""
    reports: list[IdentityReport] = []
    seeds = np.random.SeedSequence(seed).spawn(samples)
    elements = [haar_sample(s) for s in seeds]
    invariance = unitarity = equiv = ambient_inv = 0.0
    q = sys.q
    for g in elements:
        taus = sys.taus(g)
        for m in range(2, sys.M + 1):
            r = sys.inclusion(m - 1, 1)
            moved = kron(taus[m - 1], taus[1]) @ r
            invariance = max(invariance, op_norm(moved - r @ (dagger(r) @ moved)))
            if q**m * q**m <= ambient_budget:
                b = sys.basis(m)
                big = kron(*([irrep(sys.n, g)] * m))
                ambient_inv = max(ambient_inv, op_norm(big @ b - b @ (dagger(b) @ big @ b)))
        for m in range(sys.M + 1):
            t = taus[m]
            unitarity = max(unitarity, op_norm(dagger(t) @ t - np.eye(t.shape[0])))
        for k in range(1, sys.M + 1):
            for m in range(1, sys.M + 1 - k):
                c = sys.coisometry(k, m)
                equiv = max(equiv, op_norm(c @ kron(taus[k], taus[m]) - taus[k + m] @ c))
    params = {"n": sys.n, "M": sys.M, "samples": samples}
    reports.append(IdentityReport("fibre_invariance", params, invariance, tol))
    reports.append(IdentityReport("fibre_invariance_ambient", params, ambient_inv, tol))
    reports.append(IdentityReport("compressed_unitarity", params, unitarity, tol))
    reports.append(IdentityReport("coisometry_equivariance", params, equiv, tol))
    return reports
