"""Exact integer sequences d_m and mu_m attached to the irreducible SU(2) representation of dimension n+1.

``d_m`` is the dimension of the degree-m fibre, ``mu_m = d_m d_{m-1} / (n+1)``
is the squared norm factor of the recursive maps, and ``gamma_n`` is the
limit of ``d_{m-1}/d_m``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .report import IdentityReport, exact


def _check_n(n: int) -> None:
    if not isinstance(n, int) or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")


def dim_sequence(n: int, M: int) -> list[int]:
    """d_0, ..., d_M from d_0 = 1, d_1 = n+1, d_m = (n+1) d_{m-1} - d_{m-2}."""
    _check_n(n)
    if M < 0:
        raise ValueError("M must be non-negative")
    d = [1, n + 1]
    while len(d) <= M:
        d.append((n + 1) * d[-1] - d[-2])
    return d[: M + 1]


def mu_sequence(n: int, M: int) -> list[int]:
    """mu_1, ..., mu_M (returned as a list indexed from 0, i.e. ``out[m-1] = mu_m``)."""
    if M < 1:
        raise ValueError("M must be at least 1")
    d = dim_sequence(n, M)
    out = []
    for m in range(1, M + 1):
        q, r = divmod(d[m] * d[m - 1], n + 1)
        if r:
            raise ArithmeticError(f"mu_{m} is not an integer for n={n}")
        out.append(q)
    return out


def gamma_limit(n: int) -> float:
    _check_n(n)
    return (n + 1 - math.sqrt((n + 1) ** 2 - 4)) / 2


@dataclass(frozen=True)
class IntegerSequencePack:
    n: int
    d_values: tuple[int, ...]
    mu_values: tuple[int, ...]
    gamma: float

    @classmethod
    def build(cls, n: int, M: int) -> "IntegerSequencePack":
        M = max(M, 1)
        return cls(n, tuple(dim_sequence(n, M)), tuple(mu_sequence(n, M)), gamma_limit(n))

    @property
    def M(self) -> int:
        return len(self.d_values) - 1

    def d(self, m: int) -> int:
        """d_m with the convention d_{-1} = 0 (and d_m = 0 below that)."""
        if m < 0:
            return 0
        if m > self.M:
            return dim_sequence(self.n, m)[m]
        return self.d_values[m]

    def mu(self, m: int) -> int:
        if m < 1:
            raise ValueError("mu_m is defined for m >= 1")
        return self.d(m) * self.d(m - 1) // (self.n + 1)

    def phi(self, m: int) -> float:
        """Eigenvalue d_m / d_{m+1} of the ratio operator on degree m."""
        return self.d(m) / self.d(m + 1)


def _family(name: str, n: int, M: int, cases) -> IdentityReport:
    """Fold an iterable of (params, lhs, rhs) into one exact report."""
    count = 0
    worst = None
    for params, lhs, rhs in cases:
        count += 1
        if lhs != rhs and worst is None:
            worst = (params, lhs, rhs)
    if worst is None:
        return IdentityReport(name, {"n": n, "M": M, "instances": count}, 0.0, 0.0)
    params, lhs, rhs = worst
    rep = exact(name, lhs, rhs, n=n, M=M, instances=count)
    return IdentityReport(rep.name, rep.params, rep.residual, 0.0, note=f"first failure at {params}")


def verify_sequence_identities(n: int, M: int) -> list[IdentityReport]:
    """Check the integer identities of d and mu for every admissible index up to M."""
    if M < 3:
        raise ValueError("need M >= 3")
    seq = IntegerSequencePack.build(n, M + 1)
    d, mu = seq.d, seq.mu
    reports = [
        _family("d_initial", n, M, [({}, (d(0), d(1)), (1, n + 1))]),
        _family(
            "d_determinant",
            n,
            M,
            (({"m": m}, d(m) ** 2 - d(m - 1) * d(m + 1), 1) for m in range(0, M)),
        ),
        _family(
            "mu_integral",
            n,
            M,
            (({"m": m}, (d(m) * d(m - 1)) % (n + 1), 0) for m in range(1, M + 1)),
        ),
        _family(
            "d_square_mu_sum",
            n,
            M,
            (({"m": m}, d(m) ** 2, mu(m) + mu(m + 1)) for m in range(1, M)),
        ),
        _family(
            "mu_recurrence",
            n,
            M,
            (
                ({"m": m}, mu(m + 1), ((n + 1) ** 2 - 2) * mu(m) - (mu(m - 1) if m > 1 else 0) + 1)
                for m in range(1, M)
            ),
        ),
        _family(
            "d_product",
            n,
            M,
            (
                ({"k": k, "m": m}, d(k + m), d(k) * d(m) - d(k - 1) * d(m - 1))
                for k in range(0, M + 1)
                for m in range(0, M + 1 - k)
            ),
        ),
        _family(
            "d_even_sum",
            n,
            M,
            (
                (
                    {"k": k, "m": m, "l": l},
                    sum(d(k + m + 2 * i) for i in range(l + 1)),
                    d(k + l) * d(m + l) - d(k - 1) * d(m - 1),
                )
                for k in range(0, M + 1)
                for m in range(0, M + 1 - k)
                for l in range(0, (M - k - m) // 2 + 1)
            ),
        ),
        _family(
            "fusion_dimension",
            n,
            M,
            (
                ({"k": k, "m": m}, d(k) * d(m), sum(d(k + m - 2 * j) for j in range(min(k, m) + 1)))
                for k in range(0, M + 1)
                for m in range(0, M + 1 - k)
            ),
        ),
        _family(
            "ratio_telescoping",
            n,
            M,
            (
                ({"m": m}, Fraction(d(m - 1), d(m)), sum(Fraction(1, d(j - 1) * d(j)) for j in range(1, m + 1)))
                for m in range(1, M + 1)
            ),
        ),
        _family(
            "ratio_increasing",
            n,
            M,
            (({"m": m}, d(m - 1) * d(m + 1) < d(m) * d(m), True) for m in range(1, M)),
        ),
        # d_{m-1}/d_m lies below the smaller root of x^2-(n+1)x+1: exactly when the
        # quadratic is positive there, which clears denominators to an integer test.
        _family(
            "ratio_below_gamma",
            n,
            M,
            (
                ({"m": m}, d(m) ** 2 - (n + 1) * d(m) * d(m - 1) + d(m - 1) ** 2 > 0 and 2 * d(m - 1) < (n + 1) * d(m), True)
                for m in range(1, M + 1)
            ),
        ),
        _family("d_gap", n, M, (({"m": m}, d(m + 1) - d(m) >= 1, True) for m in range(0, M))),
    ]
    g = seq.gamma
    reports.append(IdentityReport("gamma_quadratic", {"n": n}, abs(g * g - (n + 1) * g + 1), 1e-12))
    reports.append(
        IdentityReport("gamma_limit", {"n": n, "M": M}, abs(d(M - 1) / d(M) - g), max(1e-12, 2.0 / d(M)))
    )
    return reports
