"""Rayleigh-Ritz solution of the three-body Coulomb problem in the exponential basis.

Hamiltonian (atomic units, particles 1, 2, 3 = e, mu, nucleus)::

    H = -1/2 sum_k (1/m_k) nabla_k^2 + q1 q2 / r21 + q1 q3 / r31 + q2 q3 / r32

For S states the six relative coordinates reduce to r21, r31, r32 with
volume element 8 pi^2 r21 r31 r32. The Laplacian of particle k acting on
exp(-a r21 - b r31 - c r32) contributes, for particle 1,

    a^2 + b^2 + 2 a b cos(theta_1) - 2a/r21 - 2b/r31,
    cos(theta_1) = (r21^2 + r31^2 - r32^2) / (2 r21 r31),

and the analogous terms for particles 2 and 3; times the volume element
every term becomes a Gamma moment of the summed exponents.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Callable, Sequence

import gmpy2
import numpy as np

from .basis import BasisSet, ExponentTriple, ParameterBox, generate_basis, validate_basis
from .errors import CannotSatisfy, DomainError, NoConvergence, NotPositiveDefinite
from .integrals import PerimetricPowers
from .precision import PrecisionContext, solve_lowest_gevp, zeros
from .system import ParticleSystem

log = logging.getLogger(__name__)

THREADS_ENV = "FBHFS_THREADS"
# below this order the process pool costs more than it saves
_PARALLEL_MIN_N = 120


def angular_factor():
    return 8 * gmpy2.const_pi() ** 2


def _moments(a, b, c):
    """All Gamma moments used by the matrix elements, keyed by (l, m, n)."""
    pp = PerimetricPowers(a, b, c)
    keys = ((1, 1, 1), (0, 1, 1), (1, 0, 1), (1, 1, 0),
            (2, 0, 1), (0, 2, 1), (0, 0, 3),
            (2, 1, 0), (0, 1, 2), (0, 3, 0),
            (1, 2, 0), (1, 0, 2), (3, 0, 0))
    return {k: pp.gamma(*k) for k in keys}


def _kinetic_right(G, a, b, c, inv_m):
    """<i| -1/2 sum_k nabla_k^2 / m_k |j> / (8 pi^2) with (a, b, c) the exponents of j."""
    g111, g011, g101, g110 = G[1, 1, 1], G[0, 1, 1], G[1, 0, 1], G[1, 1, 0]
    k1 = G[2, 0, 1] + G[0, 2, 1] - G[0, 0, 3]
    k2 = G[2, 1, 0] + G[0, 1, 2] - G[0, 3, 0]
    k3 = G[1, 2, 0] + G[1, 0, 2] - G[3, 0, 0]
    lap1 = (a * a + b * b) * g111 + a * b * k1 - 2 * a * g011 - 2 * b * g101
    lap2 = (a * a + c * c) * g111 + a * c * k2 - 2 * a * g011 - 2 * c * g110
    lap3 = (b * b + c * c) * g111 + b * c * k3 - 2 * b * g101 - 2 * c * g110
    return -(inv_m[0] * lap1 + inv_m[1] * lap2 + inv_m[2] * lap3) / 2


def _potential(G, qq):
    return qq[0] * G[0, 1, 1] + qq[1] * G[1, 0, 1] + qq[2] * G[1, 1, 0]


def _sys_consts(sys: ParticleSystem):
    inv_m = [1 / sys.mass(k) for k in (1, 2, 3)]
    q = [sys.charge(k) for k in (1, 2, 3)]
    return inv_m, (q[0] * q[1], q[0] * q[2], q[1] * q[2])


def _combined(ti: ExponentTriple, tj: ExponentTriple):
    return ti.alpha + tj.alpha, ti.beta + tj.beta, ti.gamma + tj.gamma


def overlap_element(ti: ExponentTriple, tj: ExponentTriple, ctx: PrecisionContext | None = None):
    """8 pi^2 Gamma_111 of the summed exponents."""
    with _maybe(ctx):
        return angular_factor() * PerimetricPowers(*_combined(ti, tj)).gamma(1, 1, 1)


def potential_element(ti, tj, sys: ParticleSystem, ctx: PrecisionContext | None = None):
    with _maybe(ctx):
        _, qq = _sys_consts(sys)
        return angular_factor() * _potential(_moments(*_combined(ti, tj)), qq)


def kinetic_element(ti, tj, sys: ParticleSystem, ctx: PrecisionContext | None = None):
    """Kinetic operator applied to the right-hand function ``tj``."""
    with _maybe(ctx):
        inv_m, _ = _sys_consts(sys)
        G = _moments(*_combined(ti, tj))
        return angular_factor() * _kinetic_right(G, tj.alpha, tj.beta, tj.gamma, inv_m)


def hamiltonian_element(ti, tj, sys: ParticleSystem, ctx: PrecisionContext | None = None):
    with _maybe(ctx):
        inv_m, qq = _sys_consts(sys)
        G = _moments(*_combined(ti, tj))
        return angular_factor() * (_kinetic_right(G, tj.alpha, tj.beta, tj.gamma, inv_m) + _potential(G, qq))


class _maybe:
    """Enter ``ctx.local()`` when a context is given, else keep the ambient precision."""

    def __init__(self, ctx):
        self._cm = ctx.local() if ctx is not None else None

    def __enter__(self):
        if self._cm is not None:
            self._cm.__enter__()

    def __exit__(self, *exc):
        if self._cm is not None:
            return self._cm.__exit__(*exc)
        return False


@dataclass
class Operators:
    """Assembled matrices. ``T_raw`` is the unsymmetrized kinetic matrix.

    ``H`` is formed once at assembly precision; never recompute it as
    ``T + V`` outside a precision context.
    """

    S: np.ndarray
    T: np.ndarray
    V: np.ndarray
    H: np.ndarray
    T_raw: np.ndarray | None = None

    def _take(self, ix) -> "Operators":
        return Operators(self.S[ix], self.T[ix], self.V[ix], self.H[ix],
                         None if self.T_raw is None else self.T_raw[ix])

    def truncate(self, n: int) -> "Operators":
        return self._take((slice(0, n), slice(0, n)))

    def drop(self, k: int) -> "Operators":
        keep = [i for i in range(self.S.shape[0]) if i != k]
        return self._take(np.ix_(keep, keep))


def _assemble_rows(rows, a, b, c, sys, bits, keep_raw):
    """Upper-triangle rows i..N-1 of S, V and both kinetic orientations."""
    out = []
    with gmpy2.context(gmpy2.get_context(), precision=bits):
        inv_m, qq = _sys_consts(sys)
        f = angular_factor()
        for i in rows:
            aj, bj, cj = a[i:], b[i:], c[i:]
            G = _moments(a[i] + aj, b[i] + bj, c[i] + cj)
            s = f * G[1, 1, 1]
            v = f * _potential(G, qq)
            t_ij = f * _kinetic_right(G, aj, bj, cj, inv_m)
            t_ji = f * _kinetic_right(G, a[i], b[i], c[i], inv_m)
            out.append((i, s, v, t_ij, t_ji))
    return out


def thread_count() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
        if n < 1:
            raise ValueError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
        return n
    return os.cpu_count() or 1


def assemble(basis: BasisSet, sys: ParticleSystem, ctx: PrecisionContext,
             threads: int | None = None, keep_raw: bool = False) -> Operators:
    """Overlap, kinetic and potential matrices over ``basis``.

    Rows are computed independently and written to fixed locations, so
    the result is bit-identical for any ``threads``. The kinetic matrix
    is symmetrized as (T + T^T)/2.
    """
    problems = validate_basis(basis)
    if problems:
        raise DomainError("invalid basis: " + "; ".join(problems[:5]))
    n = basis.N
    threads = thread_count() if threads is None else threads
    with ctx.local():
        a, b, c = (ctx.array(x) for x in basis.exponent_arrays())
        S, V, T, Traw = (zeros(n, n, ctx) for _ in range(4))
        if threads > 1 and n >= _PARALLEL_MIN_N:
            # interleaved row sets balance the shrinking upper-triangle rows
            chunks = [list(range(w, n, threads)) for w in range(threads)]
            with ProcessPoolExecutor(max_workers=threads) as pool:
                parts = pool.map(_assemble_rows, chunks, *([x] * threads for x in (a, b, c)),
                                 [sys] * threads, [ctx.bits] * threads, [keep_raw] * threads)
                results = [r for part in parts for r in part]
        else:
            results = _assemble_rows(range(n), a, b, c, sys, ctx.bits, keep_raw)
        for i, s, v, t_ij, t_ji in results:
            S[i, i:] = s
            S[i:, i] = s
            V[i, i:] = v
            V[i:, i] = v
            Traw[i, i:] = t_ij
            Traw[i:, i] = t_ji
        for i in range(n):
            for j in range(i + 1, n):
                t = (Traw[i, j] + Traw[j, i]) / 2
                T[i, j] = t
                T[j, i] = t
            T[i, i] = Traw[i, i]
        H = T + V
    return Operators(S, T, V, H, Traw if keep_raw else None)


@dataclass
class BoundState:
    energy: gmpy2.mpfr
    coefficients: np.ndarray
    basis: BasisSet
    system: ParticleSystem
    precision: int
    residual: gmpy2.mpfr
    t_expect: gmpy2.mpfr
    v_expect: gmpy2.mpfr
    dropped: tuple[int, ...] = ()
    iterations: int = 0

    @property
    def N(self) -> int:
        return self.basis.N


def solve_operators(ops: Operators, basis: BasisSet, sys: ParticleSystem, ctx: PrecisionContext,
                    tol=None, prune: bool = True) -> BoundState:
    """Lowest eigenpair for pre-assembled matrices, pruning dependent functions."""
    dropped: list[int] = []
    original = list(range(basis.N))
    while True:
        try:
            sol = solve_lowest_gevp(ops.H, ops.S, ctx, tol=tol)
            break
        except NotPositiveDefinite as exc:
            if not prune or basis.N <= 1:
                raise
            k = exc.index - 1
            log.warning("overlap not positive definite at function %d; dropping it", original[k])
            dropped.append(original.pop(k))
            basis = basis.drop(k)
            ops = ops.drop(k)
    with ctx.local():
        C = sol.coefficients
        t = C.dot(ops.T.dot(C))
        v = C.dot(ops.V.dot(C))
    return BoundState(sol.energy, C, basis, sys, ctx.decimal_digits, sol.residual, t, v,
                      tuple(dropped), sol.iterations)


def solve_ground(basis: BasisSet, sys: ParticleSystem, ctx: PrecisionContext, tol=None,
                 threads: int | None = None, prune: bool = True) -> BoundState:
    """Variational ground state; the energy is an upper bound to the exact one."""
    ops = assemble(basis, sys, ctx, threads=threads)
    return solve_operators(ops, basis, sys, ctx, tol=tol, prune=prune)


@dataclass
class OptimizationResult:
    boxes: list[ParameterBox]
    state: BoundState
    evaluations: int
    history: list[tuple[int, str]] = field(default_factory=list)


def optimize_boxes(initial: Sequence[ParameterBox], sys: ParticleSystem, ctx: PrecisionContext,
                   budget: int, step_fraction: str = "0.1", min_sweeps: int = 2,
                   evaluate: Callable[[list[ParameterBox]], BoundState] | None = None,
                   threads: int | None = None) -> OptimizationResult:
    """Cyclic coordinate search over all box endpoints at fixed box counts.

    Each endpoint is tried at +step and -step; the step halves when neither
    lowers the energy. Stops when ``budget`` energy evaluations are spent.
    The returned energy never exceeds the initial one.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    evaluate = evaluate or (lambda bx: solve_ground(generate_basis(bx, ctx), sys, ctx, threads=threads))
    boxes = list(initial)
    best = evaluate(boxes)
    used = 1
    history = [(used, str(best.energy))]
    log.info("optimize: start E = %s", best.energy)
    frac = Decimal(step_fraction)
    steps = []
    for bx in boxes:
        for lo, hi in bx.ranges:
            width = hi - lo
            s = frac * (width if width else max(abs(lo), Decimal(1)))
            steps += [s, s]
    sweeps = 0
    while used < budget:
        improved_any = False
        for p in range(len(steps)):
            if used >= budget:
                break
            bi, ei = divmod(p, 6)
            moved = False
            for sign in (1, -1):
                if used >= budget:
                    break
                ends = boxes[bi].endpoints()
                ends[ei] = ends[ei] + sign * steps[p]
                try:
                    cand_box = ParameterBox.from_endpoints(ends, boxes[bi].count)
                except ValueError:
                    continue
                cand = boxes[:bi] + [cand_box] + boxes[bi + 1:]
                used += 1
                try:
                    state = evaluate(cand)
                except (CannotSatisfy, DomainError, NoConvergence, NotPositiveDefinite) as exc:
                    log.info("optimize: candidate rejected (%s)", exc)
                    continue
                if state.energy < best.energy:
                    boxes, best, moved = cand, state, True
                    history.append((used, str(best.energy)))
                    log.info("optimize: eval %d E = %s", used, best.energy)
                    break
            if moved:
                improved_any = True
            else:
                steps[p] = steps[p] / 2
        sweeps += 1
        if not improved_any and sweeps >= min_sweeps and max(steps) < Decimal("1e-6"):
            break
    return OptimizationResult(boxes, best, used, history)


def scale_boxes(boxes: Sequence[ParameterBox], n: int) -> list[ParameterBox]:
    """Same box shapes with counts rescaled to total ``n`` (largest remainder)."""
    total = sum(b.count for b in boxes)
    raw = [Decimal(b.count) * n / total for b in boxes]
    counts = [int(r) for r in raw]
    order = sorted(range(len(boxes)), key=lambda i: (-(raw[i] - counts[i]), i))
    for i in order[: n - sum(counts)]:
        counts[i] += 1
    return [b.with_count(k) for b, k in zip(boxes, counts)]


def convergence_study(sys: ParticleSystem, Ns: Sequence[int], ctx: PrecisionContext,
                      boxes: Sequence[ParameterBox] | None = None, basis: BasisSet | None = None,
                      threads: int | None = None) -> list[BoundState]:
    """Ground states on nested prefixes of one basis, one per requested N."""
    Ns = list(Ns)
    if Ns != sorted(Ns) or len(set(Ns)) != len(Ns):
        raise ValueError("Ns must be strictly ascending")
    if basis is None:
        if boxes is None:
            raise ValueError("either boxes or basis is required")
        basis = generate_basis(scale_boxes(boxes, Ns[-1]), ctx)
    if basis.N < Ns[-1]:
        raise ValueError(f"basis has {basis.N} functions, need {Ns[-1]}")
    ops = assemble(basis.truncate(Ns[-1]), sys, ctx, threads=threads)
    states = []
    for n in Ns:
        st = solve_operators(ops.truncate(n), basis.truncate(n), sys, ctx)
        log.info("N = %d  E = %s", n, st.energy)
        states.append(st)
    return states
