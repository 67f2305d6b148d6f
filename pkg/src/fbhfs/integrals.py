"""Three-body moment integrals over the triangle domain of r21, r31, r32.

    Gamma(l, m, n; a, b, c) = iiint r21^l r31^m r32^n exp(-a r21 - b r31 - c r32)

with |r31 - r32| <= r21 <= r31 + r32. In perimetric coordinates
r21 = u1 + u2, r31 = u1 + u3, r32 = u2 + u3 (Jacobian 2, each u_k >= 0)
the exponent separates with rates a+b, a+c, b+c, and the polynomial
factor expands into a finite sum of factorial terms.

Functions accept mpfr scalars or numpy object arrays of mpfr; arithmetic
runs at the caller's gmpy2 context precision.
"""

from __future__ import annotations

import math
from functools import lru_cache

import gmpy2
import numpy as np
from scipy.special import roots_laguerre

from .errors import DomainError, NoConvergence

FACTORIAL_CAP = 12


@lru_cache(maxsize=None)
def perimetric_terms(l: int, m: int, n: int) -> tuple[tuple[int, int, int, int], ...]:
    """Integer weights ``w`` so that Gamma = 2 * sum w * p! q! r! / (P^(p+1) Q^(q+1) R^(r+1)).

    Expands (u1+u2)^l (u1+u3)^m (u2+u3)^n; the returned tuples are
    ``(p, q, r, w)`` with the factorials already folded into ``w``.
    """
    if min(l, m, n) < 0:
        raise ValueError(f"powers must be non-negative, got {(l, m, n)}")
    acc: dict[tuple[int, int, int], int] = {}
    for i in range(l + 1):
        for j in range(m + 1):
            for k in range(n + 1):
                key = (i + j, l - i + k, m - j + n - k)
                w = math.comb(l, i) * math.comb(m, j) * math.comb(n, k)
                acc[key] = acc.get(key, 0) + w
    return tuple(
        (p, q, r, 2 * w * _fact(p) * _fact(q) * _fact(r))
        for (p, q, r), w in sorted(acc.items())
    )


def _fact(k: int) -> int:
    return _FACT[k] if k <= FACTORIAL_CAP else math.factorial(k)


_FACT = [math.factorial(k) for k in range(FACTORIAL_CAP + 1)]


def _check_domain(P, Q, R) -> None:
    if isinstance(P, np.ndarray):
        ok = bool(np.all(P > 0) and np.all(Q > 0) and np.all(R > 0))
    else:
        ok = P > 0 and Q > 0 and R > 0
    if not ok:
        raise DomainError("pairwise exponent sums a+b, a+c, b+c must all be positive")


def _mp(x):
    if isinstance(x, np.ndarray):
        return x
    return x if isinstance(x, type(gmpy2.mpfr(0))) else gmpy2.mpfr(x)


def gamma000(a, b, c):
    """2 / ((a+b)(b+c)(c+a))."""
    a, b, c = _mp(a), _mp(b), _mp(c)
    P, Q, R = a + b, a + c, b + c
    _check_domain(P, Q, R)
    return 2 / (P * Q * R)


class PerimetricPowers:
    """Cached inverse powers of the three perimetric rates for one (a, b, c).

    Sharing one instance across several Gamma evaluations with the same
    exponents avoids recomputing 1/P^k; works elementwise on arrays.
    """

    def __init__(self, a, b, c):
        a, b, c = _mp(a), _mp(b), _mp(c)
        P, Q, R = a + b, a + c, b + c
        _check_domain(P, Q, R)
        self._inv = ([1 / P], [1 / Q], [1 / R])

    def inv(self, axis: int, k: int):
        """1 / rate**k for k >= 1."""
        seq = self._inv[axis]
        while len(seq) < k:
            seq.append(seq[-1] * seq[0])
        return seq[k - 1]

    def gamma(self, l: int, m: int, n: int):
        total = None
        for p, q, r, w in perimetric_terms(l, m, n):
            term = self.inv(0, p + 1) * self.inv(1, q + 1) * self.inv(2, r + 1) * w
            total = term if total is None else total + term
        return total


def gamma_lmn(l: int, m: int, n: int, a, b, c):
    """Gamma(l, m, n; a, b, c) by the finite perimetric sum."""
    return PerimetricPowers(a, b, c).gamma(l, m, n)


def quadrature_oracle(l: int, m: int, n: int, a, b, c, rel_tol: float = 1e-10,
                      max_nodes: int = 256) -> float:
    """Numerical Gamma by tensor Gauss-Laguerre quadrature in perimetric coordinates.

    The node count doubles until two successive estimates agree to
    ``rel_tol``. Independent of the factorial expansion; validation only.
    """
    if rel_tol < 1e-12:
        raise ValueError("rel_tol below 1e-12 is not reachable in double precision")
    a, b, c = float(a), float(b), float(c)
    P, Q, R = a + b, a + c, b + c
    if min(P, Q, R) <= 0:
        raise DomainError("pairwise exponent sums a+b, a+c, b+c must all be positive")
    prev = None
    nodes = 4
    while nodes <= max_nodes:
        t, w = roots_laguerre(nodes)
        u1, u2, u3 = t / P, t / Q, t / R
        U1, U2, U3 = np.meshgrid(u1, u2, u3, indexing="ij")
        W = w[:, None, None] * w[None, :, None] * w[None, None, :]
        f = (U1 + U2) ** l * (U1 + U3) ** m * (U2 + U3) ** n
        val = 2.0 * float(np.sum(W * f)) / (P * Q * R)
        if prev is not None and abs(val - prev) <= rel_tol * abs(val):
            return val
        prev = val
        nodes *= 2
    raise NoConvergence(nodes, f"quadrature did not reach rel_tol={rel_tol}")
