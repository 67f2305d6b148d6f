"""Expectation values over a variational bound state.

Coalescence reductions for the exponential basis: at r21 -> 0 the
triangle domain collapses to r31 = r32 = r, so

    <delta(r21)> = 8 pi sum_ij C_i C_j (B_ij + G_ij)^-3 / <Psi|Psi>

with B_ij = beta_i + beta_j, G_ij = gamma_i + gamma_j; the r31 and r32
pairs follow by permuting slots. d/dr21 of a basis function at fixed
r31, r32 brings down -alpha_j, which gives the cusp ratios.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import gmpy2

from .integrals import PerimetricPowers
from .precision import make_context
from .solver import BoundState
from .system import PAIRS

# slot of the coalescing coordinate and the two exponents that survive
_SLOTS = {"21": (0, 1, 2), "31": (1, 0, 2), "32": (2, 0, 1)}


def _sums(state: BoundState):
    """Row-ordered pair sums used by every coalescence quantity."""
    ctx = make_context(state.precision)
    C = state.coefficients
    a, b, c = (ctx.array(x) for x in state.basis.exponent_arrays())
    return ctx, C, (a, b, c)


def _pair_sums(state: BoundState, pair: str, weighted: bool):
    """(numerator of <delta>, numerator of <delta d/dr>, norm) for one pair."""
    ctx, C, ex = _sums(state)
    k, s1, s2 = _SLOTS[pair]
    n = len(C)
    with ctx.local():
        eight_pi = 8 * gmpy2.const_pi()
        num = ctx.mpf(0)
        dnum = ctx.mpf(0)
        for i in range(n):
            cc = C[i] * C[i:]
            cc[1:] *= 2
            w = cc * (ex[s1][i] + ex[s1][i:] + ex[s2][i] + ex[s2][i:]) ** -3
            num += w.sum()
            if weighted:
                dnum -= (w * (ex[k][i] + ex[k][i:])).sum() / 2
        norm = _norm(state, ctx)
        return eight_pi * num, eight_pi * dnum, norm


def _norm(state: BoundState, ctx):
    C = state.coefficients
    a, b, c = (ctx.array(x) for x in state.basis.exponent_arrays())
    with ctx.local():
        total = ctx.mpf(0)
        for i in range(len(C)):
            cc = C[i] * C[i:]
            cc[1:] *= 2
            g = PerimetricPowers(a[i] + a[i:], b[i] + b[i:], c[i] + c[i:]).gamma(1, 1, 1)
            total += (cc * g).sum()
        return 8 * gmpy2.const_pi() ** 2 * total


def delta_pair(state: BoundState, pair: str) -> gmpy2.mpfr:
    """<delta^3(r_pair)> in atomic units; ``pair`` is '21', '31' or '32'."""
    if pair not in _SLOTS:
        raise ValueError(f"pair must be one of {sorted(_SLOTS)}, got {pair!r}")
    num, _, norm = _pair_sums(state, pair, weighted=False)
    with make_context(state.precision).local():
        return num / norm


def delta_triple(state: BoundState) -> gmpy2.mpfr:
    """|Psi(0, 0, 0)|^2 / <Psi|Psi>."""
    ctx = make_context(state.precision)
    with ctx.local():
        s = ctx.mpf(0)
        for c in state.coefficients:
            s += c
        return s * s / _norm(state, ctx)


def cusp(state: BoundState, pair: str) -> gmpy2.mpfr:
    """<delta(r) d/dr> / <delta(r)> for ``pair``; exact states give q_i q_j mu_ij."""
    if pair not in _SLOTS:
        raise ValueError(f"pair must be one of {sorted(_SLOTS)}, got {pair!r}")
    num, dnum, _ = _pair_sums(state, pair, weighted=True)
    with make_context(state.precision).local():
        return dnum / num


def virial(state: BoundState):
    """(<T>, <V>, <V>/<T>) from the assembled operators."""
    with make_context(state.precision).local():
        return state.t_expect, state.v_expect, state.v_expect / state.t_expect


@dataclass
class ExpectationSet:
    delta21: gmpy2.mpfr
    delta31: gmpy2.mpfr
    delta32: gmpy2.mpfr
    delta321: gmpy2.mpfr
    t_expect: gmpy2.mpfr
    v_expect: gmpy2.mpfr
    cusp21: gmpy2.mpfr
    cusp31: gmpy2.mpfr
    cusp32: gmpy2.mpfr
    norm: gmpy2.mpfr
    virial_ratio: gmpy2.mpfr
    uncertainties: dict = field(default_factory=dict)

    def deltas(self) -> dict:
        return {"21": self.delta21, "31": self.delta31, "32": self.delta32}


def _spread(values: Sequence) -> gmpy2.mpfr:
    tail = list(values)[-3:]
    return max(tail) - min(tail)


def expectation_report(state: BoundState, series: Sequence[BoundState] | None = None) -> ExpectationSet:
    """All expectation values of ``state``.

    With ``series`` (nested truncations ending at ``state``), each delta and
    cusp gets an uncertainty equal to its max spread over the last three.
    """
    ctx = make_context(state.precision)
    out = {}
    for pair in PAIRS:
        num, dnum, norm = _pair_sums(state, pair, weighted=True)
        with ctx.local():
            out[f"delta{pair}"] = num / norm
            out[f"cusp{pair}"] = dnum / num
    t, v, ratio = virial(state)
    rep = ExpectationSet(
        delta21=out["delta21"], delta31=out["delta31"], delta32=out["delta32"],
        delta321=delta_triple(state), t_expect=t, v_expect=v,
        cusp21=out["cusp21"], cusp31=out["cusp31"], cusp32=out["cusp32"],
        norm=norm, virial_ratio=ratio,
    )
    if series:
        reports = [expectation_report(s) for s in series[-3:-1]] + [rep]
        with ctx.local():
            for name in ("delta21", "delta31", "delta32", "delta321", "cusp21", "cusp31", "cusp32"):
                rep.uncertainties[name] = _spread([getattr(r, name) for r in reports])
    return rep
