"""Truncated Fock space F = E_0 ⊕ ... ⊕ E_M, creation operators and their relations.

Operators with a fixed degree shift are stored block by block.  A block is
*known* when its value is exact within the truncation; blocks that would need
a fibre above degree M are simply absent, and any relation that touches them
is reported as shadowed instead of producing a spurious residual.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Mapping
from dataclasses import dataclass
from types import MappingProxyType

import numpy as np

from .linalg_core import DEFAULT_TOL, dagger, kron, kron_apply, op_norm
from .report import IdentityReport, shadowed
from .sequences import IntegerSequencePack
from .sps_core import SubproductSystem
from .su2_rep import haar_sample


@dataclass(frozen=True)
class FockTruncation:
    dims: tuple[int, ...]

    @classmethod
    def of(cls, sys: SubproductSystem, M: int | None = None) -> "FockTruncation":
        M = sys.M if M is None else M
        return cls(tuple(sys.dim(m) for m in range(M + 1)))

    @property
    def M(self) -> int:
        return len(self.dims) - 1

    @property
    def offsets(self) -> tuple[int, ...]:
        out = [0]
        for d in self.dims:
            out.append(out[-1] + d)
        return tuple(out)

    @property
    def total(self) -> int:
        return self.offsets[-1]

    def block(self, m: int) -> slice:
        off = self.offsets
        return slice(off[m], off[m + 1])

    def to_dense(self, op: "GradedOperator") -> np.ndarray:
        """Matrix on the truncated space with the known blocks filled in (unknown ones left 0)."""
        if op.in_mult != 1 or op.out_mult != 1:
            raise ValueError("only scalar-valued graded operators embed in the truncated Fock space")
        out = np.zeros((self.total, self.total), dtype=np.result_type(*op.blocks.values(), float))
        for m, blk in op.blocks.items():
            t = m + op.shift
            if 0 <= t <= self.M and m <= self.M:
                out[self.block(t), self.block(m)] = blk
        return out


@dataclass(frozen=True)
class GradedOperator:
    """Operator with a fixed degree shift; block m maps E_m (⊗ C^in_mult) to E_{m+shift} (⊗ C^out_mult).

    Multiplicities model an extra tensor factor such as E_1 in F ⊗ E_1.
    """

    shift: int
    blocks: Mapping[int, np.ndarray]
    dims: tuple[int, ...]
    in_mult: int = 1
    out_mult: int = 1

    def __post_init__(self):
        frozen = {}
        for m, blk in self.blocks.items():
            blk = np.asarray(blk)
            expected = (self.d(m + self.shift) * self.out_mult, self.d(m) * self.in_mult)
            if blk.shape != expected:
                raise ValueError(f"block {m} has shape {blk.shape}, expected {expected}")
            blk = blk.copy()
            blk.setflags(write=False)
            frozen[m] = blk
        object.__setattr__(self, "blocks", MappingProxyType(dict(sorted(frozen.items()))))

    @property
    def M(self) -> int:
        return len(self.dims) - 1

    def d(self, m: int) -> int:
        return self.dims[m] if 0 <= m < len(self.dims) else 0

    def known(self, m: int) -> bool:
        return m in self.blocks

    def block(self, m: int) -> np.ndarray:
        if m not in self.blocks:
            raise KeyError(f"block {m} is shadowed by the truncation")
        return self.blocks[m]

    def _zero_block(self, shift: int, m: int, in_mult: int, out_mult: int) -> np.ndarray:
        return np.zeros((self.d(m + shift) * out_mult, self.d(m) * in_mult))

    def __matmul__(self, other: "GradedOperator") -> "GradedOperator":
        if self.in_mult != other.out_mult:
            raise ValueError("multiplicities do not match")
        shift = self.shift + other.shift
        out = {}
        for m, b in other.blocks.items():
            mid = m + other.shift
            if mid < 0:
                out[m] = self._zero_block(shift, m, other.in_mult, self.out_mult)
            elif self.known(mid):
                out[m] = self.blocks[mid] @ b
        return GradedOperator(shift, out, self.dims, other.in_mult, self.out_mult)

    def _combine(self, other: "GradedOperator", op: Callable) -> "GradedOperator":
        if (self.shift, self.in_mult, self.out_mult) != (other.shift, other.in_mult, other.out_mult):
            raise ValueError("operators differ in shift or multiplicity")
        keys = set(self.blocks) & set(other.blocks)
        return GradedOperator(
            self.shift, {m: op(self.blocks[m], other.blocks[m]) for m in keys}, self.dims, self.in_mult, self.out_mult
        )

    def __add__(self, other):
        return self._combine(other, np.add)

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __mul__(self, scalar):
        return GradedOperator(
            self.shift, {m: scalar * b for m, b in self.blocks.items()}, self.dims, self.in_mult, self.out_mult
        )

    __rmul__ = __mul__

    def __neg__(self):
        return -1 * self

    @property
    def H(self) -> "GradedOperator":
        """Adjoint.  A block landing below degree 0 is exactly zero, so its adjoint is known too."""
        out = {}
        for t in range(self.M + 1):
            m = t - self.shift
            if m < 0:
                out[t] = np.zeros((0, self.d(t) * self.out_mult))
            elif self.known(m):
                out[t] = dagger(self.blocks[m])
        return GradedOperator(-self.shift, out, self.dims, self.out_mult, self.in_mult)

    def tensor_identity(self, q: int) -> "GradedOperator":
        """op ⊗ 1 on F ⊗ C^q (the extra factor goes to the right of any existing multiplicity)."""
        return GradedOperator(
            self.shift,
            {m: kron(b, np.eye(q)) for m, b in self.blocks.items()},
            self.dims,
            self.in_mult * q,
            self.out_mult * q,
        )

    def norm(self) -> float:
        """Largest block norm over the known blocks, which is the norm of a shift operator."""
        return max((op_norm(b) for b in self.blocks.values()), default=0.0)


def _diagonal(dims: tuple[int, ...], values: Callable[[int], float], mult: int = 1) -> GradedOperator:
    return GradedOperator(
        0, {m: values(m) * np.eye(dims[m] * mult) for m in range(len(dims))}, dims, mult, mult
    )


def identity(dims: tuple[int, ...], mult: int = 1) -> GradedOperator:
    return _diagonal(dims, lambda m: 1.0, mult)


def vacuum_projection(dims: tuple[int, ...]) -> GradedOperator:
    """Q_0, the projection onto E_0."""
    return _diagonal(dims, lambda m: 1.0 if m == 0 else 0.0)


def _dims(sys: SubproductSystem, M: int | None) -> tuple[int, ...]:
    M = sys.M if M is None else M
    if M > sys.M:
        raise IndexError(f"truncation {M} exceeds the constructed degree {sys.M}")
    return tuple(sys.dim(m) for m in range(M + 1))


def creation_operator(
    sys: SubproductSystem, xi: np.ndarray, k: int = 1, M: int | None = None, side: str = "left"
) -> GradedOperator:
    """T_ξ(ζ) = ι*_{k,m}(ξ ⊗ ζ) for ξ given in fibre coordinates of E_k; side="right" uses ζ ⊗ ξ."""
    dims = _dims(sys, M)
    xi = np.asarray(xi).reshape(-1)
    if xi.shape[0] != sys.dim(k):
        raise ValueError(f"xi has {xi.shape[0]} coordinates, E_{k} has {sys.dim(k)}")
    top = len(dims) - 1
    blocks = {}
    for m in range(top + 1 - k):
        dm = dims[m]
        if side == "left":
            c = sys.coisometry(k, m).reshape(-1, sys.dim(k), dm)
            blocks[m] = np.einsum("aim,i->am", c, xi)
        elif side == "right":
            c = sys.coisometry(m, k).reshape(-1, dm, sys.dim(k))
            blocks[m] = np.einsum("ami,i->am", c, xi)
        else:
            raise ValueError(f"side must be 'left' or 'right', not {side!r}")
    return GradedOperator(k, blocks, dims)


def generator(sys: SubproductSystem, j: int, M: int | None = None, side: str = "left") -> GradedOperator:
    """T_j (or the right creation operator T'_j) for the basis vector e_j of the ambient space."""
    if not 0 <= j < sys.q:
        raise IndexError(f"generator index {j} outside 0..{sys.q - 1}")
    return creation_operator(sys, dagger(sys.first)[:, j], 1, M, side)


def dimension_and_phi(sys: SubproductSystem, M: int | None = None) -> tuple[GradedOperator, GradedOperator]:
    """The dimension operator D (d_m on E_m) and Φ (d_m/d_{m+1} on E_m)."""
    dims = _dims(sys, M)
    seq = IntegerSequencePack.build(sys.n, len(dims) + 1)
    return _diagonal(dims, lambda m: float(seq.d(m))), _diagonal(dims, seq.phi)


def left_inclusion(sys: SubproductSystem, M: int | None = None) -> GradedOperator:
    """ι_L: F -> E_1 ⊗ F, zero on E_0; the E_1 factor is carried as an output multiplicity on the left."""
    dims = _dims(sys, M)
    q = sys.dim(1)
    blocks = {0: np.zeros((0, 1))}
    for m in range(1, len(dims)):
        inc = sys.inclusion(1, m - 1).reshape(q, dims[m - 1], dims[m])
        blocks[m] = inc.transpose(1, 0, 2).reshape(dims[m - 1] * q, dims[m])
    return GradedOperator(-1, blocks, dims, 1, q)


def right_inclusion(sys: SubproductSystem, M: int | None = None) -> GradedOperator:
    """ι_R: F -> F ⊗ E_1, zero on E_0."""
    dims = _dims(sys, M)
    blocks = {0: np.zeros((0, 1))}
    for m in range(1, len(dims)):
        blocks[m] = sys.inclusion(m - 1, 1)
    return GradedOperator(-1, blocks, dims, 1, sys.dim(1))


def _left_to_internal(x: np.ndarray, q: int, d: int) -> np.ndarray:
    """Rows ordered (E_1, E_m) -> rows ordered (E_m, E_1), the layout GradedOperator uses for multiplicities."""
    cols = x.shape[1]
    return x.reshape(q, d, cols).transpose(1, 0, 2).reshape(d * q, cols)


def isometry_operators(fm, M: int | None = None) -> tuple[GradedOperator, GradedOperator]:
    """V_R: F -> F ⊗ E_1 and V_L: F -> E_1 ⊗ F, built from the recursive maps (block m-1 is V_m)."""
    dims = _dims(fm.sys, M)
    q = fm.q
    right, left = {}, {}
    for m in range(1, len(dims)):
        right[m - 1] = fm.vee(m, "right")
        left[m - 1] = _left_to_internal(fm.vee(m, "left"), q, dims[m])
    return GradedOperator(1, right, dims, 1, q), GradedOperator(1, left, dims, 1, q)


def isometries_from_toeplitz(sys: SubproductSystem, M: int | None = None) -> tuple[GradedOperator, GradedOperator]:
    """V_R = Σ (-1)^{n-j} T'_{n-j} Φ^{1/2} ⊗ e_j and V_L = Σ (-1)^j e_j ⊗ T_{n-j} Φ^{1/2}."""
    dims = _dims(sys, M)
    n, q = sys.n, sys.q
    _, phi = dimension_and_phi(sys, M)
    root = _diagonal(dims, lambda m: math.sqrt(phi.block(m)[0, 0]) if dims[m] else 0.0)
    right, left = {}, {}
    for j in range(q):
        e_j = np.zeros((q, 1))
        e_j[j] = 1.0
        tr = generator(sys, n - j, M, side="right") @ root
        tl = generator(sys, n - j, M) @ root
        for m, b in tr.blocks.items():
            right[m] = right.get(m, 0) + (-1) ** (n - j) * kron(b, e_j)
        for m, b in tl.blocks.items():
            left[m] = left.get(m, 0) + (-1) ** j * kron(b, e_j)
    return GradedOperator(1, right, dims, 1, q), GradedOperator(1, left, dims, 1, q)


def _blockwise(
    name: str, lhs: GradedOperator, rhs: GradedOperator, tol: float, **params
) -> list[IdentityReport]:
    """One report per degree 0..M: a residual where both sides are known, shadowed otherwise."""
    out = []
    for m in range(lhs.M + 1):
        if lhs.known(m) and rhs.known(m):
            a, b = lhs.block(m), rhs.block(m)
            res = op_norm(a - b) / max(1.0, op_norm(b))
            out.append(IdentityReport(name, {**params, "m": m}, res, tol))
        else:
            out.append(shadowed(name, **params, m=m))
    return out


def verify_toeplitz_relations(sys: SubproductSystem, M: int | None = None, tol: float = DEFAULT_TOL, fm=None) -> list[IdentityReport]:
    """Evaluate the creation-operator relations degree by degree.

    Covers Σ T_i T_i* = 1 - Q_0, Σ (-1)^i T_i T_{n-i} = 0, the adjoint relation
    T_i* T_j = δ_ij + (-1)^{i+j+1}((n+1) - Φ^{-1}) T_{n-i} T_{n-j}*, Σ T_i* T_i = Φ^{-1},
    the factorisations of ι*_L, ι*_R, V_L and V_R through creation operators,
    and for n = 1 the relations of a commuting, essentially normal, pure row contraction.
    """
    from .fusion import FusionMaps

    dims = _dims(sys, M)
    top = len(dims) - 1
    if top < 3:
        raise ValueError("need truncation degree M >= 3")
    n, q = sys.n, sys.q
    one = identity(dims)
    q0 = vacuum_projection(dims)
    D, phi = dimension_and_phi(sys, M)
    phi_inv = _diagonal(dims, lambda m: 1.0 / phi.block(m)[0, 0])
    T = [generator(sys, j, M) for j in range(q)]
    Tr = [generator(sys, j, M, side="right") for j in range(q)]
    base = {"n": n, "M": top}
    out: list[IdentityReport] = []

    purity = T[0] @ T[0].H
    for t in T[1:]:
        purity = purity + t @ t.H
    out += _blockwise("sum_TTstar", purity, one - q0, tol, **base)

    iota_l = left_inclusion(sys, M)
    iota_r = right_inclusion(sys, M)
    out += _blockwise("iotaL_star_iotaL", iota_l.H @ iota_l, one - q0, tol, **base)

    alt = T[0] @ T[n]
    for i in range(1, q):
        alt = alt + (-1) ** i * (T[i] @ T[n - i])
    zero2 = GradedOperator(2, {m: np.zeros_like(b) for m, b in alt.blocks.items()}, dims)
    out += _blockwise("alternating_square", alt, zero2, tol, **base)

    scale = (n + 1) * one - phi_inv
    for i in range(q):
        for j in range(q):
            lhs = T[i].H @ T[j]
            rhs = (1.0 if i == j else 0.0) * one + (-1) ** (i + j + 1) * (scale @ T[n - i] @ T[n - j].H)
            out += _blockwise("adjoint_relation", lhs, rhs, tol, **base, i=i, j=j)

    sph = T[0].H @ T[0]
    for t in T[1:]:
        sph = sph + t.H @ t
    out += _blockwise("sum_TstarT", sph, phi_inv, tol, **base)

    # ι*_L = Σ <e_j,·> ⊗ T_j and ι*_R = Σ T'_j ⊗ <e_j,·>, written blockwise as column stacks.
    left_star = iota_l.H
    right_star = iota_r.H
    lhs_blocks, rhs_blocks, lb, rb = {}, {}, {}, {}
    for m in range(top):
        if all(t.known(m) for t in T) and left_star.known(m):
            stacked = np.hstack([t.block(m) for t in T])  # columns ordered (j, E_m)
            lb[m] = left_star.block(m)
            lhs_blocks[m] = _left_to_internal(stacked.T, q, dims[m]).T
        if all(t.known(m) for t in Tr) and right_star.known(m):
            interleaved = np.stack([t.block(m) for t in Tr], axis=2).reshape(dims[m + 1], dims[m] * q)
            rb[m] = right_star.block(m)
            rhs_blocks[m] = interleaved
    out += _blockwise("iotaL_star_from_T", GradedOperator(1, lb, dims, q, 1), GradedOperator(1, lhs_blocks, dims, q, 1), tol, **base)
    out += _blockwise("iotaR_star_from_Tprime", GradedOperator(1, rb, dims, q, 1), GradedOperator(1, rhs_blocks, dims, q, 1), tol, **base)

    if sys.equivariant:
        fm = FusionMaps(sys) if fm is None else fm
        vr, vl = isometry_operators(fm, M)
        vr_t, vl_t = isometries_from_toeplitz(sys, M)
        out += _blockwise("VR_from_Tprime", vr, vr_t, tol, **base)
        out += _blockwise("VL_from_T", vl, vl_t, tol, **base)
        one_q = identity(dims, q)
        out += _blockwise("VR_isometry", vr.H @ vr, one, tol, **base)
        out += _blockwise("VL_isometry", vl.H @ vl, one, tol, **base)
        out += _blockwise("right_decomposition", iota_r @ iota_r.H + vr @ vr.H, one_q, tol, **base)
        out += _blockwise("left_decomposition", iota_l @ iota_l.H + vl @ vl.H, one_q, tol, **base)

    if n == 1:
        inv_n1 = _diagonal(dims, lambda m: 1.0 / (m + 1))
        out += _blockwise("fundamental_commute", T[0] @ T[1], T[1] @ T[0], tol, **base)
        out += _blockwise(
            "fundamental_sphere", T[0].H @ T[0] + T[1].H @ T[1], _diagonal(dims, lambda m: (m + 2) / (m + 1)), tol, **base
        )
        for i in range(2):
            for j in range(2):
                lhs = T[i].H @ T[j] - T[j] @ T[i].H
                rhs = inv_n1 @ ((1.0 if i == j else 0.0) * one - T[j] @ T[i].H)
                out += _blockwise("fundamental_commutator", lhs, rhs, tol, **base, i=i, j=j)
        out += _blockwise("fundamental_dimension_is_N_plus_1", D, _diagonal(dims, lambda m: m + 1.0), tol, **base)
    return out


def verify_creation_norms(sys: SubproductSystem, M: int | None = None, samples: int = 20, seed=0) -> list[IdentityReport]:
    """‖T_ξ‖ ≤ ‖ξ‖ for random complex ξ in each degree k with at least one known block."""
    dims = _dims(sys, M)
    rng = np.random.default_rng(seed)
    out = []
    for k in range(1, len(dims)):
        worst = 0.0
        for _ in range(samples):
            xi = rng.standard_normal(dims[k]) + 1j * rng.standard_normal(dims[k])
            t = creation_operator(sys, xi, k, M)
            worst = max(worst, t.norm() - np.linalg.norm(xi) * (1 + 1e-12))
        out.append(IdentityReport("creation_norm_bound", {"n": sys.n, "k": k, "samples": samples}, max(worst, 0.0), 0.0))
    return out


def verify_gauge_equivariance(
    sys: SubproductSystem, M: int | None = None, samples: int = 3, seed=0, tol: float = 1e-8
) -> list[IdentityReport]:
    """τ(g) T_ξ τ(g)^{-1} = T_{g ξ}, checked per block for sampled g and random ξ in each degree."""
    dims = _dims(sys, M)
    top = len(dims) - 1
    ss = np.random.SeedSequence(seed)
    g_seeds, xi_seed = ss.spawn(samples), ss.spawn(1)[0]
    rng = np.random.default_rng(xi_seed)
    out = []
    for k in range(1, top + 1):
        worst = 0.0
        for gs in g_seeds:
            taus = sys.taus(haar_sample(gs), top)
            xi = rng.standard_normal(dims[k]) + 1j * rng.standard_normal(dims[k])
            t = creation_operator(sys, xi, k, M)
            tg = creation_operator(sys, taus[k] @ xi, k, M)
            for m, b in t.blocks.items():
                lhs = taus[m + k] @ b @ dagger(taus[m])
                worst = max(worst, op_norm(lhs - tg.block(m)))
        out.append(IdentityReport("gauge_equivariance", {"n": sys.n, "k": k, "samples": samples}, worst, tol))
    return out


def commutator_decay_closed_form(d_prev: int) -> float:
    """√2 (1 - (1 - 1/d²)^{1/2})^{1/2}, written to avoid cancellation for large d."""
    x = 1.0 / (d_prev * d_prev)
    return math.sqrt(2.0 * x / (1.0 + math.sqrt(1.0 - x)))


def commutator_decay(fm, M: int | None = None) -> list[float]:
    """‖(ι_{1,m-1} ⊗ 1)V_m - (1 ⊗ V_{m-1})ι_{1,m-2}‖ on E_{m-1}, for m = 2..M."""
    sys, q = fm.sys, fm.q
    top = sys.M if M is None else M
    values = []
    for m in range(2, top + 1):
        a = kron_apply(sys.inclusion(1, m - 1), q, fm.vee(m))
        b = kron_apply(q, fm.vee(m - 1), sys.inclusion(1, m - 2))
        values.append(op_norm(a - b))
    return values


def weighted_commutator(fm, j: int, p: float, M: int | None = None) -> GradedOperator:
    """(D^p ⊗ 1)((T_j* ⊗ 1) V_R - V_R T_j*) D^{1-p}, a degree-preserving map F -> F ⊗ E_1."""
    sys, q = fm.sys, fm.q
    dims = _dims(sys, M)
    seq = IntegerSequencePack.build(sys.n, len(dims))
    Dp = _diagonal(dims, lambda m: float(seq.d(m)) ** p)
    Dq = _diagonal(dims, lambda m: float(seq.d(m)) ** (1 - p))
    vr, _ = isometry_operators(fm, M)
    t = generator(sys, j, M)
    comm = t.H.tensor_identity(q) @ vr - vr @ t.H
    return Dp.tensor_identity(q) @ comm @ Dq


def verify_commutator_decay(fm, M: int | None = None, tol: float = DEFAULT_TOL) -> list[IdentityReport]:
    """Decay sequence against its closed form, its monotonicity, and the D-weighted bound √2."""
    sys = fm.sys
    top = sys.M if M is None else M
    values = commutator_decay(fm, M)
    out = []
    for m, v in zip(range(2, top + 1), values):
        out.append(IdentityReport("commutator_decay_closed_form", {"n": sys.n, "m": m}, abs(v - commutator_decay_closed_form(fm.d(m - 1))), tol))
    increases = [max(0.0, b - a) for a, b in zip(values, values[1:])]
    out.append(IdentityReport("commutator_decay_monotone", {"n": sys.n, "M": top}, max(increases, default=0.0), tol))
    bound = math.sqrt(2.0)
    for p in (0.0, 0.5, 1.0):
        for j in range(fm.q):
            w = weighted_commutator(fm, j, p, M)
            for m, b in w.blocks.items():
                excess = max(0.0, op_norm(b) - bound)
                out.append(IdentityReport("weighted_commutator_bound", {"n": sys.n, "p": p, "j": j, "m": m}, excess, tol))
    return out


def verify_phi_decay(sys: SubproductSystem, M: int | None = None) -> list[IdentityReport]:
    """Φ - γ_n has block norms decreasing to 0; the last one sits below 10·|d_{M-1}/d_M - γ_n|.

    Φ increases towards γ_n from below, so the block norms are γ_n - d_m/d_{m+1}.
    """
    dims = _dims(sys, M)
    top = len(dims) - 1
    seq = IntegerSequencePack.build(sys.n, top + 2)
    gaps = [seq.gamma - seq.phi(m) for m in range(top + 1)]
    increases = [max(0.0, b - a) for a, b in zip(gaps, gaps[1:])]
    boundary = 10 * abs(seq.d(top - 1) / seq.d(top) - seq.gamma)
    return [
        IdentityReport("phi_gap_monotone", {"n": sys.n, "M": top}, max(increases, default=0.0), 0.0),
        IdentityReport("phi_gap_positive", {"n": sys.n, "M": top}, max(0.0, -min(gaps)), 0.0),
        IdentityReport("phi_gap_boundary", {"n": sys.n, "M": top}, max(0.0, gaps[top] - boundary), 0.0),
        IdentityReport("phi_inverse_norm", {"n": sys.n}, abs(max(1 / seq.phi(m) for m in range(top + 1)) - (sys.n + 1)), 1e-12),
    ]


__all__ = [
    "FockTruncation",
    "GradedOperator",
    "commutator_decay",
    "commutator_decay_closed_form",
    "creation_operator",
    "dimension_and_phi",
    "generator",
    "identity",
    "isometries_from_toeplitz",
    "isometry_operators",
    "left_inclusion",
    "right_inclusion",
    "vacuum_projection",
    "verify_commutator_decay",
    "verify_creation_norms",
    "verify_gauge_equivariance",
    "verify_phi_decay",
    "verify_toeplitz_relations",
    "weighted_commutator",
]
