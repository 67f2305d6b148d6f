"""Extended-precision arithmetic and the lowest-eigenpair GEVP solver.

All matrices are numpy ``object`` arrays holding :class:`gmpy2.mpfr`
values. Every reduction is a plain left-to-right loop over the input
order, so results do not depend on scheduling or thread count.
"""

from __future__ import annotations

import logging
import math
from contextlib import contextmanager
from dataclasses import dataclass
from typing import NamedTuple

import gmpy2
import numpy as np

from .errors import NoConvergence, NotPositiveDefinite, PrecisionError

log = logging.getLogger(__name__)

MIN_DIGITS = 30
DEFAULT_DIGITS = 64


@dataclass(frozen=True)
class PrecisionContext:
    decimal_digits: int
    bits: int
    epsilon: gmpy2.mpfr

    @contextmanager
    def local(self):
        """Route mpfr arithmetic in the block through this precision."""
        with gmpy2.context(gmpy2.get_context(), precision=self.bits):
            yield self

    def mpf(self, value) -> gmpy2.mpfr:
        return gmpy2.mpfr(value, self.bits)

    def array(self, values) -> np.ndarray:
        """Copy ``values`` into an object array of mpfr at this precision."""
        src = np.asarray(values, dtype=object)
        out = np.empty(src.shape, dtype=object)
        flat_out = out.reshape(-1)
        for k, v in enumerate(src.reshape(-1)):
            flat_out[k] = gmpy2.mpfr(v, self.bits)
        return out

    def default_tol(self) -> gmpy2.mpfr:
        return gmpy2.mpfr(10, self.bits) ** -(self.decimal_digits - 10)


def make_context(decimal_digits: int = DEFAULT_DIGITS) -> PrecisionContext:
    if int(decimal_digits) != decimal_digits or decimal_digits < MIN_DIGITS:
        raise PrecisionError(
            f"decimal_digits must be an integer >= {MIN_DIGITS}, got {decimal_digits!r}"
        )
    digits = int(decimal_digits)
    bits = math.ceil(digits * math.log2(10)) + 1
    # unit roundoff of a correctly rounded binary format with `bits` of mantissa
    eps = gmpy2.mpfr(2, bits) ** (1 - bits)
    return PrecisionContext(digits, bits, eps)


def zeros(n: int, m: int | None = None, ctx: PrecisionContext | None = None) -> np.ndarray:
    bits = ctx.bits if ctx is not None else gmpy2.get_context().precision
    zero = gmpy2.mpfr(0, bits)
    shape = (n,) if m is None else (n, m)
    out = np.empty(shape, dtype=object)
    out.fill(zero)
    return out


def is_symmetric(M: np.ndarray) -> bool:
    n = M.shape[0]
    if M.ndim != 2 or M.shape[1] != n:
        return False
    for i in range(n):
        for j in range(i):
            if M[i, j] != M[j, i]:
                return False
    return True


def symmetrize(M: np.ndarray) -> np.ndarray:
    """(M + M^T)/2, exactly symmetric afterwards."""
    out = M.copy()
    n = M.shape[0]
    for i in range(n):
        for j in range(i):
            v = (M[i, j] + M[j, i]) / 2
            out[i, j] = v
            out[j, i] = v
    return out


def cholesky(S: np.ndarray, ctx: PrecisionContext) -> np.ndarray:
    """Lower-triangular ``L`` with ``L @ L.T == S``.

    Raises :class:`NotPositiveDefinite` carrying the 1-based pivot index
    at the first non-positive pivot.
    """
    S = np.asarray(S, dtype=object)
    n = S.shape[0]
    with ctx.local():
        S = ctx.array(S)
        L = zeros(n, n, ctx)
        for j in range(n):
            row = L[j, :j]
            d = S[j, j] - row.dot(row) if j else S[j, j]
            if not d > 0:
                raise NotPositiveDefinite(j + 1, d)
            ljj = gmpy2.sqrt(d)
            L[j, j] = ljj
            if j + 1 < n:
                col = S[j + 1:, j]
                if j:
                    col = col - L[j + 1:, :j].dot(row)
                L[j + 1:, j] = col / ljj
    return L


def solve_lower(L: np.ndarray, b: np.ndarray) -> np.ndarray:
    n = L.shape[0]
    y = np.empty(n, dtype=object)
    for i in range(n):
        s = b[i] - L[i, :i].dot(y[:i]) if i else b[i]
        y[i] = s / L[i, i]
    return y


def solve_upper_t(L: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Solve ``L.T x = y`` for lower-triangular ``L``."""
    n = L.shape[0]
    x = np.empty(n, dtype=object)
    for i in range(n - 1, -1, -1):
        s = y[i] - L[i + 1:, i].dot(x[i + 1:]) if i + 1 < n else y[i]
        x[i] = s / L[i, i]
    return x


def _norm2(v: np.ndarray):
    return gmpy2.sqrt(v.dot(v))


class GevpSolution(NamedTuple):
    energy: gmpy2.mpfr
    coefficients: np.ndarray
    residual: gmpy2.mpfr
    iterations: int


def _factor_shifted(H, S, sigma, ctx):
    try:
        return cholesky(H - sigma * S, ctx)
    except NotPositiveDefinite:
        return None


def solve_lowest_gevp(
    H: np.ndarray,
    S: np.ndarray,
    ctx: PrecisionContext,
    tol=None,
    max_iter: int = 400,
) -> GevpSolution:
    """Algebraically lowest eigenpair of ``H C = E S C``.

    Shift-and-invert iteration on the pencil with the shift kept strictly
    below the lowest eigenvalue, so every shifted matrix is positive
    definite and factors by Cholesky. The shift is tightened once the
    Rayleigh quotient has settled. ``C`` is S-normalized and its largest
    component is positive.
    """
    H = np.asarray(H, dtype=object)
    S = np.asarray(S, dtype=object)
    if H.shape != S.shape or H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError(f"H and S must be square and equal shape, got {H.shape}, {S.shape}")
    n = H.shape[0]
    with ctx.local():
        H = ctx.array(H)
        S = ctx.array(S)
        tol = ctx.default_tol() if tol is None else ctx.mpf(tol)
        cholesky(S, ctx)  # linear-dependence check; raises NotPositiveDefinite

        diag_rq = [H[i, i] / S[i, i] for i in range(n)]
        k0 = min(range(n), key=lambda i: (diag_rq[i], i))
        x = zeros(n, ctx=ctx)
        x[k0] = 1 / gmpy2.sqrt(S[k0, k0])
        rho = diag_rq[k0]

        scale = max(abs(rho), ctx.mpf(1))
        delta = scale * ctx.mpf("1e-3")
        Lsh = None
        for _ in range(60):
            sigma = rho - delta
            Lsh = _factor_shifted(H, S, sigma, ctx)
            if Lsh is not None:
                break
            delta *= 8
        if Lsh is None:
            raise NoConvergence(0, "could not place a shift below the spectrum")

        eps = ctx.epsilon
        rho_floor = abs(rho) * eps * 1000
        drops: list = []
        best = None
        stall = 0
        rho_prev = None
        for it in range(1, max_iter + 1):
            y = solve_upper_t(Lsh, solve_lower(Lsh, S.dot(x)))
            x = y / gmpy2.sqrt(y.dot(S.dot(y)))
            Hx = H.dot(x)
            Sx = S.dot(x)
            rho = x.dot(Hx)  # x^T S x == 1
            r = Hx - rho * Sx
            nHx = _norm2(Hx)
            res = _norm2(r) / nHx if nHx else _norm2(r)
            log.debug("iter %d rho %s residual %.3e shift %s", it, rho, float(res), sigma)
            if res <= tol:
                break
            if rho_prev is not None:
                drops.append(rho_prev - rho)
            rho_prev = rho
            # settled once the quotient stops decreasing geometrically: roundoff dominates
            settled = bool(drops) and (
                abs(drops[-1]) <= rho_floor
                or (len(drops) >= 2 and not 0 < drops[-1] < drops[-2])
            )
            if not settled and len(drops) >= 2 and 0 < drops[-1] < drops[-2]:
                # Rayleigh-quotient error from the observed contraction q^2 per step
                q2 = drops[-1] / drops[-2]
                err = drops[-1] * q2 / (1 - q2)
                if err < (rho - sigma) / 100:
                    for margin in (4, 64):
                        cand = rho - max(margin * err, rho_floor)
                        if cand <= sigma:
                            break
                        L2 = _factor_shifted(H, S, cand, ctx)
                        if L2 is not None:
                            Lsh, sigma = L2, cand
                            drops = []
                            break
            if not settled:
                continue
            # Rayleigh quotient is at roundoff; only the residual may still improve
            if best is None or res < best[0]:
                best, stall = (res, rho, x), 0
            else:
                stall += 1
            if stall >= 3:
                # the eigenvalue error scales as res^2, so a residual below
                # sqrt(eps) already pins E to working precision
                res, rho, x = best
                if res <= gmpy2.sqrt(eps):
                    break
                raise NoConvergence(it, f"residual stalled at {float(res):.3e}")
        else:
            raise NoConvergence(max_iter, f"residual {float(res):.3e} > tol {float(tol):.3e}")

        imax = max(range(n), key=lambda i: (abs(x[i]), -i))
        if x[imax] < 0:
            x = -x
        return GevpSolution(rho, x, res, it)
