"""Recursive maps G_m, G'_m, isometries V_m, V'_m, the maps sigma_{k,m} and the fusion unitaries.

All matrices use fibre coordinates: a map into E_k ⊗ E_m has d_k·d_m rows,
ordered as ``kron`` orders them.  The right and left maps are

    G_m  : E_{m-1} -> E_m ⊗ E_1,   G_1 = G'_1 = delta,
    G'_m : E_{m-1} -> E_1 ⊗ E_m,

and sigma_{k,m} = (1 ⊗ ι*_{1,m})(G_{k+1} ⊗ 1): E_k ⊗ E_m -> E_{k+1} ⊗ E_{m+1}.
"""

from __future__ import annotations

import math
import threading
from collections.abc import Callable, Iterable

import numpy as np

from .linalg_core import DEFAULT_TOL, dagger, kron, kron_apply, op_norm, unitarity_defect
from .report import IdentityReport, exact
from .sequences import IntegerSequencePack
from .sps_core import SubproductSystem, determinant_vector
from .su2_rep import haar_sample


class FusionMaps:
    """Lazily computed G, V, sigma and W matrices for an SU(2) subproduct system."""

    def __init__(self, sys: SubproductSystem):
        if not sys.equivariant:
            raise TypeError("fusion maps need the SU(2)-equivariant system")
        self.sys = sys
        self.n = sys.n
        self.q = sys.n + 1
        self.seq = IntegerSequencePack.build(sys.n, sys.M + 2)
        self.delta = determinant_vector(sys.n)[:, None]
        self._cache: dict = {}
        self._lock = threading.Lock()

    def _cached(self, key, compute: Callable[[], np.ndarray]) -> np.ndarray:
        with self._lock:
            if key in self._cache:
                return self._cache[key]
        value = compute()
        with self._lock:
            return self._cache.setdefault(key, value)

    def d(self, m: int) -> int:
        return self.seq.d(m)

    def mu(self, m: int) -> int:
        return self.seq.mu(m)

    def sign(self, m: int) -> int:
        """(-1)^{(n+1)(m-1)}."""
        return -1 if (self.q * (m - 1)) % 2 else 1

    def _check_degree(self, m: int) -> None:
        if not 1 <= m <= self.sys.M:
            raise IndexError(f"G_{m} needs 1 <= m <= {self.sys.M}")

    # G and V

    def gee_lifted(self, m: int, side: str = "right") -> np.ndarray:
        """The recursive formula evaluated before compressing: E_{m-1} -> E_{m-1} ⊗ E_1 ⊗ E_1 (right side)."""
        self._check_degree(m)
        if m < 2:
            raise IndexError("the lifted form starts at m = 2")
        sys, q, dm1 = self.sys, self.q, self.d(m - 1)
        coeff = self.sign(m) * dm1
        if side == "right":
            prev = kron_apply(self.gee(m - 1, "right"), q, sys.inclusion(m - 2, 1))
            return prev + coeff * kron(np.eye(dm1), self.delta)
        if side == "left":
            prev = kron_apply(q, self.gee(m - 1, "left"), sys.inclusion(1, m - 2))
            return prev + coeff * kron(self.delta, np.eye(dm1))
        raise ValueError(f"side must be 'left' or 'right', not {side!r}")

    def gee(self, m: int, side: str = "right") -> np.ndarray:
        """G_m (right) or G'_m (left) in fibre coordinates of E_m ⊗ E_1 or E_1 ⊗ E_m."""
        self._check_degree(m)
        if m == 1:
            return self.delta
        q = self.q

        def compute():
            lifted = self.gee_lifted(m, side)
            if side == "right":
                return kron_apply(dagger(self.sys.inclusion(m - 1, 1)), q, lifted)
            return kron_apply(q, dagger(self.sys.inclusion(1, m - 1)), lifted)

        return self._cached(("G", side, m), compute)

    def vee(self, m: int, side: str = "right") -> np.ndarray:
        """Isometry V_m = (-1)^{(n+1)(m-1)} mu_m^{-1/2} G_m (or its left analogue)."""
        return self.sign(m) / math.sqrt(self.mu(m)) * self.gee(m, side)

    # sigma and W

    def sigma(self, k: int, m: int) -> np.ndarray:
        """sigma_{k,m}: E_k ⊗ E_m -> E_{k+1} ⊗ E_{m+1}; zero when k or m is -1."""
        if k < 0 or m < 0:
            return np.zeros((self.d(k + 1) * self.d(m + 1), 0))

        def compute():
            dk, dm = self.d(k), self.d(m)
            x = kron_apply(self.gee(k + 1, "right"), dm, np.eye(dk * dm))
            return kron_apply(self.d(k + 1), self.sys.coisometry(1, m), x)

        return self._cached(("sigma", k, m), compute)

    def sigma_power(self, k: int, m: int, j: int) -> np.ndarray:
        """sigma^j = sigma_{k+j-1,m+j-1} ... sigma_{k,m}: E_k ⊗ E_m -> E_{k+j} ⊗ E_{m+j}."""
        if k < 0 or m < 0:
            return np.zeros((self.d(k + j) * self.d(m + j), 0))
        out = np.eye(self.d(k) * self.d(m))
        for i in range(j):
            out = self.sigma(k + i, m + i) @ out
        return out

    def fusion_weight(self, k: int, m: int, j: int) -> float:
        """Normalisation of the j-th fusion component sigma^j ι_{k-j,m-j}."""
        d = self.d
        w = 1.0
        for i in range(1, j + 1):
            w /= math.sqrt(self.mu(k - j + i) * (1 - d(k - j) * d(m - j - 1) / (d(k - j + i) * d(m - j + i - 1))))
        return w

    def fusion_component(self, k: int, m: int, j: int) -> np.ndarray:
        if j == 0:
            return self.sys.inclusion(k, m)
        return self.fusion_weight(k, m, j) * self.sigma_power(k - j, m - j, j) @ self.sys.inclusion(k - j, m - j)

    def fusion_unitary(self, k: int, m: int) -> np.ndarray:
        """W_{k,m}: ⊕_{j=0}^{min(k,m)} E_{k+m-2j} -> E_k ⊗ E_m, columns ordered by j."""
        if k + m > self.sys.M:
            raise IndexError(f"W_({k},{m}) needs degree {k + m} > {self.sys.M}")
        return self._cached(
            ("W", k, m), lambda: np.hstack([self.fusion_component(k, m, j) for j in range(min(k, m) + 1)])
        )

    def fusion_blocks(self, k: int, m: int) -> list[int]:
        return [self.d(k + m - 2 * j) for j in range(min(k, m) + 1)]

    # Toeplitz-form pieces used by the registry

    def left_creation_block(self, j: int, m: int) -> np.ndarray:
        """T_j on E_m (to E_{m+1})."""
        dm = self.d(m)
        return self.sys.coisometry(1, m)[:, j * dm : (j + 1) * dm]

    def right_creation_block(self, j: int, m: int) -> np.ndarray:
        """T'_j on E_m (to E_{m+1})."""
        return self.sys.coisometry(m, 1)[:, j :: self.q]


# identity registry


def _diff(lhs: np.ndarray, rhs: np.ndarray) -> float:
    """Operator-norm difference relative to max(1, ‖rhs‖)."""
    rhs = np.asarray(rhs)
    return op_norm(np.asarray(lhs) - rhs) / max(1.0, op_norm(rhs))


def _zero(x: np.ndarray, scale: float) -> float:
    """Norm of a map that should vanish, relative to the product of its factors' norms."""
    return op_norm(x) / max(1.0, scale)


def _frob_diff(lhs: np.ndarray, rhs: np.ndarray) -> float:
    """Frobenius norm of the difference: an upper bound on the operator norm that avoids a large eigensolve.

    Only used between unitaries, where relative and absolute residuals coincide.
    """
    return float(np.linalg.norm(lhs - rhs))


def _s1(fm: FusionMaps, m: int) -> int:
    """(-1)^{(n+1)m+1}."""
    return -1 if (fm.q * m + 1) % 2 else 1


def _delta_pairing(fm, m, side):
    """(1 ⊗ delta*)(G_m ⊗ 1) on E_{m-1} ⊗ E_1, or its left mirror, without forming the krons."""
    q, dm, dm1 = fm.q, fm.d(m), fm.d(m - 1)
    dl = fm.delta.reshape(q, q).conj()
    if side == "right":
        g = fm.gee(m).reshape(dm, q, dm1)
        return np.einsum("aib,ij->abj", g, dl).reshape(dm, dm1 * q)
    g = fm.gee(m, "left").reshape(q, dm, dm1)
    return np.einsum("iab,ji->ajb", g, dl).reshape(dm, q * dm1)


def _leftfus_inner(fm, m):
    lhs = _delta_pairing(fm, m, "right")
    return _diff(lhs, _s1(fm, m) * fm.d(m - 1) / fm.d(1) * fm.sys.coisometry(m - 1, 1))


def _rightfus_inner(fm, m):
    lhs = _delta_pairing(fm, m, "left")
    return _diff(lhs, _s1(fm, m) * fm.d(m - 1) / fm.d(1) * fm.sys.coisometry(1, m - 1))


def _gram(fm, m, side):
    g = fm.gee(m, side)
    return _diff(dagger(g) @ g, fm.mu(m) * np.eye(g.shape[1]))


def _leftfus_orth(fm, m):
    q = fm.q
    x = kron_apply(dagger(fm.gee(m)), q, kron_apply(fm.sys.inclusion(m, 1), q, fm.gee(m + 1)))
    return _zero(x, math.sqrt(fm.mu(m) * fm.mu(m + 1)))


def _rightfus_orth(fm, m):
    q = fm.q
    x = kron_apply(q, dagger(fm.gee(m, "left")), kron_apply(q, fm.sys.inclusion(1, m), fm.gee(m + 1, "left")))
    return _zero(x, math.sqrt(fm.mu(m) * fm.mu(m + 1)))


def _iotagee(fm, m, side):
    coeff = fm.sign(m) * fm.d(m - 1)
    q, dm, dm1 = fm.q, fm.d(m), fm.d(m - 1)
    dl = fm.delta.reshape(q, q)
    if side == "right":
        c = fm.sys.coisometry(m - 1, 1).reshape(dm, dm1, q)
        rhs = np.einsum("abi,ij->ajb", c, dl).reshape(dm * q, dm1)
    else:
        c = fm.sys.coisometry(1, m - 1).reshape(dm, q, dm1)
        rhs = np.einsum("ajb,ij->iab", c, dl).reshape(q * dm, dm1)
    return _diff(fm.gee(m, side), coeff * rhs)


def _iota_star_factorization(fm, m, side):
    coeff = _s1(fm, m) * fm.d(1) / fm.d(m - 1)
    rhs = _delta_pairing(fm, m, side)
    lhs = fm.sys.coisometry(m - 1, 1) if side == "right" else fm.sys.coisometry(1, m - 1)
    return _diff(lhs, coeff * rhs)


def _pp_star(fm, m, side):
    coeff = _s1(fm, m) * fm.d(1) / fm.d(m - 1)
    q, dm1, dm2 = fm.q, fm.d(m - 1), fm.d(m - 2)
    dl = fm.delta.reshape(q, q).conj()
    if side == "right":
        lhs = fm.sys.projection(m - 1, 1)
        inc = fm.sys.inclusion(m - 2, 1).reshape(dm2, q, dm1)
        corr = fm.gee(m - 1) @ np.einsum("cib,ij->cbj", inc, dl).reshape(dm2, dm1 * q)
    else:
        lhs = fm.sys.projection(1, m - 1)
        inc = fm.sys.inclusion(1, m - 2).reshape(q, dm2, dm1)
        corr = fm.gee(m - 1, "left") @ np.einsum("icb,ji->cjb", inc, dl).reshape(dm2, q * dm1)
    return _diff(lhs, np.eye(lhs.shape[0]) + coeff * corr)


def _recursiota(fm, m, side):
    q = fm.q
    if side == "right":
        lhs = kron_apply(fm.sys.inclusion(m - 1, 1), q, fm.gee(m))
    else:
        lhs = kron_apply(q, fm.sys.inclusion(1, m - 1), fm.gee(m, "left"))
    return _diff(lhs, fm.gee_lifted(m, side))


def _decomp(fm, m, side):
    inc = fm.sys.inclusion(m, 1) if side == "right" else fm.sys.inclusion(1, m)
    return unitarity_defect(np.hstack([inc, fm.vee(m, side)]))


def _leftright_toe(fm, m, side):
    n, q = fm.n, fm.q
    scale = math.sqrt(fm.d(m - 1) / fm.d(m))
    dm, dm1 = fm.d(m), fm.d(m - 1)
    if side == "left":
        rows = [(-1) ** j * fm.left_creation_block(n - j, m - 1) for j in range(q)]
        rhs = scale * np.vstack(rows)
    else:
        cube = np.zeros((dm, q, dm1))
        for j in range(q):
            cube[:, j, :] = (-1) ** (n - j) * fm.right_creation_block(n - j, m - 1)
        rhs = scale * cube.reshape(dm * q, dm1)
    return _diff(fm.vee(m, side), rhs)


def _sigma_star_sigma(fm, k, m):
    d = fm.d
    s = fm.sigma(k, m)
    rhs = d(k) * d(k + m + 1) / (d(1) * d(m)) * np.eye(s.shape[1])
    if k >= 1 and m >= 1:
        p = fm.sigma(k - 1, m - 1)
        rhs = rhs + d(k) * d(m - 1) / (d(k - 1) * d(m)) * p @ dagger(p)
    return _diff(dagger(s) @ s, rhs)


def _sigma_prop_one(fm, k, m, j):
    d = fm.d
    lhs = dagger(fm.sigma(k + j - 1, m + j - 1)) @ fm.sigma_power(k, m, j)
    rhs = fm.mu(k + j) * (1 - d(k) * d(m - 1) / (d(k + j) * d(m + j - 1))) * fm.sigma_power(k, m, j - 1)
    if k >= 1 and m >= 1:
        rhs = rhs + d(m - 1) * d(k + j - 1) / (d(k - 1) * d(m + j - 1)) * fm.sigma_power(k - 1, m - 1, j) @ dagger(fm.sigma(k - 1, m - 1))
    return _diff(lhs, rhs)


def _sigma_kernel(fm, k, m):
    s = fm.sigma(k - 1, m - 1)
    return _zero(dagger(s) @ fm.sys.inclusion(k, m), op_norm(s))


def _sigma_power_norm(fm, k, m, j):
    d = fm.d
    inc = fm.sys.inclusion(k, m)
    s = fm.sigma_power(k, m, j)
    factor = 1.0
    for i in range(1, j + 1):
        factor *= fm.mu(k + i) * (1 - d(k) * d(m - 1) / (d(k + i) * d(m + i - 1)))
    return _diff(dagger(s) @ s @ inc, factor * inc)


def _diffvee(fm, m):
    q, sys = fm.q, fm.sys
    x = kron_apply(sys.inclusion(1, m - 1), q, fm.vee(m))
    x = kron_apply(q, dagger(fm.vee(m - 1)), x)
    lhs = sys.coisometry(1, m - 2) @ x
    return _diff(lhs, math.sqrt(1 - 1 / fm.d(m - 1) ** 2) * np.eye(fm.d(m - 1)))


def _fusion_unitary(fm, k, m):
    return unitarity_defect(fm.fusion_unitary(k, m))


REGISTRY: dict[str, tuple[Callable, Callable[[int], Iterable[dict]]]] = {}


def _register(name: str, fn: Callable, params: Callable[[int], Iterable[dict]]):
    REGISTRY[name] = (fn, params)


def _ms(lo: int, hi_offset: int = 0):
    return lambda M: ({"m": m} for m in range(lo, M + 1 - hi_offset))


def _kms(M: int, need):
    return ({"k": k, "m": m} for k in range(0, M + 1) for m in range(0, M + 1) if need(k, m))


_register("leftfus_inner", _leftfus_inner, _ms(1))
_register("leftfus_gram", lambda fm, m: _gram(fm, m, "right"), _ms(1))
_register("leftfus_orth", _leftfus_orth, _ms(1, 1))
_register("rightfus_inner", _rightfus_inner, _ms(1))
_register("rightfus_gram", lambda fm, m: _gram(fm, m, "left"), _ms(1))
_register("rightfus_orth", _rightfus_orth, _ms(1, 1))
_register("iotagee_right", lambda fm, m: _iotagee(fm, m, "right"), _ms(1))
_register("iotagee_left", lambda fm, m: _iotagee(fm, m, "left"), _ms(1))
_register("iota_star_factorization", lambda fm, m: _iota_star_factorization(fm, m, "right"), _ms(1))
_register("iota_star_factorization_left", lambda fm, m: _iota_star_factorization(fm, m, "left"), _ms(1))
_register("pp_star", lambda fm, m: _pp_star(fm, m, "right"), _ms(2))
_register("pp_star_left", lambda fm, m: _pp_star(fm, m, "left"), _ms(2))
_register("recursiota_right", lambda fm, m: _recursiota(fm, m, "right"), _ms(2))
_register("recursiota_left", lambda fm, m: _recursiota(fm, m, "left"), _ms(2))
_register("decomp_right", lambda fm, m: _decomp(fm, m, "right"), _ms(1, 1))
_register("decomp_left", lambda fm, m: _decomp(fm, m, "left"), _ms(1, 1))
_register("leftright_toe_left", lambda fm, m: _leftright_toe(fm, m, "left"), _ms(1))
_register("leftright_toe_right", lambda fm, m: _leftright_toe(fm, m, "right"), _ms(1))
_register("diffvee", _diffvee, _ms(2))
_register("sigma_star_sigma", _sigma_star_sigma, lambda M: _kms(M, lambda k, m: k + m + 2 <= M))
_register(
    "sigma_prop_I",
    _sigma_prop_one,
    lambda M: (
        {"k": k, "m": m, "j": j}
        for k in range(0, M)
        for m in range(0, M)
        for j in range(1, M + 1)
        if k + m + 2 * j <= M
    ),
)
_register("sigma_prop_II_kernel", _sigma_kernel, lambda M: _kms(M, lambda k, m: k >= 1 and m >= 1 and k + m <= M))
_register(
    "sigma_prop_II_power",
    _sigma_power_norm,
    lambda M: (
        {"k": k, "m": m, "j": j}
        for k in range(0, M + 1)
        for m in range(0, M + 1 - k)
        for j in range(1, M + 1)
        if k + m + 2 * j <= M
    ),
)
_register("fusion_unitary", _fusion_unitary, lambda M: _kms(M, lambda k, m: k + m <= M))


def check_identity(name: str, fm: FusionMaps, params: dict, tol: float = DEFAULT_TOL) -> IdentityReport:
    if name not in REGISTRY:
        raise KeyError(f"unknown identity {name!r}; known: {', '.join(sorted(REGISTRY))}")
    fn, _ = REGISTRY[name]
    residual = fn(fm, **params)
    return IdentityReport(name, {"n": fm.n, **params}, float(residual), tol)


def registry_parameters(name: str, M: int) -> list[dict]:
    return list(REGISTRY[name][1](M))


def verify_registry(fm: FusionMaps, tol: float = DEFAULT_TOL, names: Iterable[str] | None = None) -> list[IdentityReport]:
    """Evaluate every registered identity at every in-range index."""
    out = []
    for name in sorted(REGISTRY if names is None else names):
        for params in registry_parameters(name, fm.sys.M):
            out.append(check_identity(name, fm, params, tol))
    return out


def verify_fusion_dimensions(fm: FusionMaps) -> list[IdentityReport]:
    M = fm.sys.M
    return [
        exact("fusion_block_dimensions", fm.d(k) * fm.d(m), sum(fm.fusion_blocks(k, m)), n=fm.n, k=k, m=m)
        for k in range(M + 1)
        for m in range(M + 1 - k)
    ]


def verify_fusion_equivariance(fm: FusionMaps, samples: int = 5, seed=0, tol: float = 1e-8) -> list[IdentityReport]:
    """W (⊕_j tau_{k+m-2j}(g)) = (tau_k(g) ⊗ tau_m(g)) W for sampled g, and the same for G_m."""
    sys, M = fm.sys, fm.sys.M
    elements = [haar_sample(s) for s in np.random.SeedSequence(seed).spawn(samples)]
    all_taus = [sys.taus(g) for g in elements]
    out = []
    for k in range(M + 1):
        for m in range(M + 1 - k):
            w = fm.fusion_unitary(k, m)
            worst = 0.0
            for taus in all_taus:
                blocks = [taus[k + m - 2 * j] for j in range(min(k, m) + 1)]
                size = sum(b.shape[0] for b in blocks)
                diag = np.zeros((size, size), dtype=complex)
                pos = 0
                for b in blocks:
                    diag[pos : pos + b.shape[0], pos : pos + b.shape[0]] = b
                    pos += b.shape[0]
                worst = max(worst, _frob_diff(w @ diag, kron_apply(taus[k], taus[m], w)))
            out.append(IdentityReport("fusion_equivariance", {"n": fm.n, "k": k, "m": m, "samples": samples}, worst, tol))
    for side in ("right", "left"):
        for m in range(1, M + 1):
            worst = 0.0
            for taus in all_taus:
                g = fm.gee(m, side)
                outer = kron_apply(taus[m], taus[1], g) if side == "right" else kron_apply(taus[1], taus[m], g)
                worst = max(worst, _diff(g @ taus[m - 1], outer))
            out.append(IdentityReport(f"gee_equivariance_{side}", {"n": fm.n, "m": m, "samples": samples}, worst, tol))
    return out
