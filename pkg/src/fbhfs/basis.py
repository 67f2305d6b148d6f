"""Exponential basis exp(-alpha r21 - beta r31 - gamma r32): generation and persistence.

Nonlinear parameters are placed by a deterministic quasi-random rule
inside rectangular boxes. Functions from different boxes are interleaved
so that every prefix of a generated basis is itself a balanced basis.
"""

from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction
from typing import Sequence

import gmpy2
import numpy as np

from .errors import CannotSatisfy, FormatError
from .precision import DEFAULT_DIGITS, PrecisionContext, make_context
from .system import ParticleSystem

log = logging.getLogger(__name__)

FORMAT_TAG = "FBVS"
FORMAT_VERSION = "v1"
_QR_PRIMES = (2, 3, 5)
_MAX_ADVANCE = 100_000


@dataclass(frozen=True)
class ExponentTriple:
    alpha: gmpy2.mpfr  # r21, electron-muon
    beta: gmpy2.mpfr  # r31, electron-nucleus
    gamma: gmpy2.mpfr  # r32, muon-nucleus

    def is_integrable(self) -> bool:
        return self.alpha + self.beta > 0 and self.alpha + self.gamma > 0 and self.beta + self.gamma > 0

    def key(self) -> tuple:
        return (self.alpha, self.beta, self.gamma)


@dataclass(frozen=True)
class ParameterBox:
    """Closed intervals for alpha, beta, gamma and the number of functions drawn."""

    alpha: tuple[Decimal, Decimal]
    beta: tuple[Decimal, Decimal]
    gamma: tuple[Decimal, Decimal]
    count: int

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma"):
            lo, hi = (Decimal(str(v)) for v in getattr(self, name))
            if not (lo.is_finite() and hi.is_finite()):
                raise ValueError(f"{name} bounds must be finite")
            if lo > hi:
                raise ValueError(f"{name} interval is reversed: [{lo}, {hi}]")
            object.__setattr__(self, name, (lo, hi))
        if self.count < 0:
            raise ValueError("count must be non-negative")

    @property
    def ranges(self):
        return (self.alpha, self.beta, self.gamma)

    def with_count(self, count: int) -> "ParameterBox":
        return ParameterBox(self.alpha, self.beta, self.gamma, count)

    def endpoints(self) -> list[Decimal]:
        return [*self.alpha, *self.beta, *self.gamma]

    @classmethod
    def from_endpoints(cls, values: Sequence, count: int) -> "ParameterBox":
        a1, a2, b1, b2, c1, c2 = values
        return cls((a1, a2), (b1, b2), (c1, c2), count)

    def satisfiable(self) -> bool:
        (_, a2), (_, b2), (_, c2) = self.ranges
        return a2 + b2 > 0 and a2 + c2 > 0 and b2 + c2 > 0


@dataclass(frozen=True)
class BasisSet:
    triples: tuple[ExponentTriple, ...]
    boxes: tuple[ParameterBox, ...] = ()
    digits: int = DEFAULT_DIGITS

    @property
    def N(self) -> int:
        return len(self.triples)

    def __len__(self) -> int:
        return len(self.triples)

    def truncate(self, n: int) -> "BasisSet":
        if not 1 <= n <= self.N:
            raise ValueError(f"cannot truncate a {self.N}-function basis to {n}")
        return BasisSet(self.triples[:n], self.boxes, self.digits)

    def drop(self, index: int) -> "BasisSet":
        """Copy without the function at 0-based ``index``."""
        return BasisSet(self.triples[:index] + self.triples[index + 1:], self.boxes, self.digits)

    def exponent_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        a = np.empty(self.N, dtype=object)
        b = np.empty(self.N, dtype=object)
        c = np.empty(self.N, dtype=object)
        for k, t in enumerate(self.triples):
            a[k], b[k], c[k] = t.alpha, t.beta, t.gamma
        return a, b, c


def default_boxes(n: int) -> list[ParameterBox]:
    """Starting boxes for e^- mu^- He^{2+}: electron scale plus correlation box, equal split."""
    n1 = (n + 1) // 2
    return [
        ParameterBox(("0.3", "2.5"), ("0.3", "2.5"), ("350", "450"), n1),
        ParameterBox(("0.3", "6"), ("0.3", "6"), ("300", "550"), n - n1),
    ]


# Tuned boxes as (alpha, beta, gamma ranges, share of N), chosen with
# scripts/tune_boxes.py. Boxes 4 and 5 resolve the electron inside the
# muonic core (alpha, beta up to ~60); box 5 and box 3 carry alpha < 0,
# which the positive electron-muon cusp needs.
OPTIMIZED_BOXES: dict[str, tuple] = {
    "he4": (
        (("0.3", "2.5"), ("0.3", "2.5"), ("350", "450"), 1),
        (("0.3", "6"), ("0.3", "6"), ("300", "550"), 1),
        (("-1.5", "-0.5"), ("1.5", "3"), ("350", "450"), 1),
        (("2", "60"), ("2", "60"), ("350", "450"), 2),
        (("-60", "-2"), ("3", "61"), ("350", "450"), 2),
    ),
}
OPTIMIZED_BOXES["he3"] = OPTIMIZED_BOXES["he4"]


def preset_boxes(name: str, system: str, n: int) -> list[ParameterBox]:
    """``default`` or ``optimized`` boxes for ``system`` ('he3'/'he4') with counts summing to ``n``."""
    if name == "default":
        return default_boxes(n)
    if name != "optimized":
        raise ValueError(f"unknown box preset {name!r}")
    if system not in OPTIMIZED_BOXES:
        raise ValueError(f"no optimized boxes for system {system!r}")
    spec = OPTIMIZED_BOXES[system]
    total = sum(Fraction(share) for *_, share in spec)
    raw = [Fraction(share) * n / total for *_, share in spec]
    counts = [int(r) for r in raw]
    for i in sorted(range(len(spec)), key=lambda i: (counts[i] - raw[i], i))[: n - sum(counts)]:
        counts[i] += 1
    return [ParameterBox(a, b, c, k) for (a, b, c, _), k in zip(spec, counts)]


def _quasi_random(k: int, lo: gmpy2.mpfr, hi: gmpy2.mpfr, root: gmpy2.mpfr) -> gmpy2.mpfr:
    v = (k * (k + 1) // 2) * root
    return lo + (hi - lo) * (v - gmpy2.floor(v))


def _box_stream(box: ParameterBox, ctx: PrecisionContext):
    """Endless stream of (k, triple) for one box, k = 1, 2, ..."""
    roots = [gmpy2.sqrt(ctx.mpf(p)) for p in _QR_PRIMES]
    bounds = [(ctx.mpf(str(lo)), ctx.mpf(str(hi))) for lo, hi in box.ranges]
    k = 0
    while True:
        k += 1
        vals = [_quasi_random(k, lo, hi, r) for (lo, hi), r in zip(bounds, roots)]
        yield k, ExponentTriple(*vals)


def generate_basis(boxes: Sequence[ParameterBox], ctx: PrecisionContext | None = None) -> BasisSet:
    """Fill each box with ``count`` quasi-random triples, interleaved across boxes.

    The k-th candidate of a box sits at frac(k(k+1)/2 * sqrt(p)) of each
    interval for p = 2, 3, 5. Candidates that are not integrable or that
    duplicate an earlier triple are skipped by advancing k.
    """
    ctx = ctx or make_context()
    boxes = list(boxes)
    total = sum(b.count for b in boxes)
    if total < 1:
        raise ValueError("box counts must sum to at least 1")
    for i, b in enumerate(boxes):
        if b.count and not b.satisfiable():
            raise CannotSatisfy(f"box {i + 1} cannot satisfy pairwise positive exponent sums")

    seen: set = set()
    triples: list[ExponentTriple] = []
    with ctx.local():
        streams = [_box_stream(b, ctx) for b in boxes]
        # slot s of box b is ordered by s / count_b, ties by box index
        heap = [(Fraction(1, b.count), i, 1) for i, b in enumerate(boxes) if b.count]
        heapq.heapify(heap)
        while heap:
            _, i, slot = heapq.heappop(heap)
            for _ in range(_MAX_ADVANCE):
                k, t = next(streams[i])
                if t.is_integrable() and t.key() not in seen:
                    break
                log.debug("box %d: skipping quasi-random index %d", i + 1, k)
            else:
                raise CannotSatisfy(f"box {i + 1}: no admissible triple within {_MAX_ADVANCE} candidates")
            seen.add(t.key())
            triples.append(t)
            if slot < boxes[i].count:
                heapq.heappush(heap, (Fraction(slot + 1, boxes[i].count), i, slot + 1))
    return BasisSet(tuple(triples), tuple(boxes), ctx.decimal_digits)


def validate_basis(basis: BasisSet) -> list[str]:
    problems = []
    first_seen: dict = {}
    for i, t in enumerate(basis.triples):
        for name, s in (("alpha+beta", t.alpha + t.beta), ("alpha+gamma", t.alpha + t.gamma),
                        ("beta+gamma", t.beta + t.gamma)):
            if not s > 0:
                problems.append(f"triple {i}: {name} = {s} is not positive")
        key = t.key()
        if key in first_seen:
            problems.append(f"duplicate triple at indices {first_seen[key]},{i}")
        else:
            first_seen[key] = i
    return problems


# ---------------------------------------------------------------------------
# FBVS v1 text format


def to_decimal(x: gmpy2.mpfr) -> str:
    """Shortest-safe decimal string that re-parses to the same mpfr at its precision."""
    if not gmpy2.is_finite(x):
        raise ValueError(f"cannot serialize non-finite value {x}")
    if x == 0:
        return "0"
    mant, exp, _ = x.digits(10, 0)
    sign = ""
    if mant.startswith("-"):
        sign, mant = "-", mant[1:]
    mant = mant.rstrip("0") or "0"
    head, tail = mant[0], mant[1:]
    return f"{sign}{head}.{tail}e{exp - 1}" if tail else f"{sign}{head}e{exp - 1}"


def mantissa_checksum(fields: Sequence[str]) -> int:
    """Sum of all mantissa digits of ``fields``, mod 2^32.

    Reading the concatenated digits as one integer mod 2^32 would ignore
    everything but the last 32 digits (10^32 is divisible by 2^32).
    """
    h = 0
    for f in fields:
        mant = f.lstrip("+-").split("e")[0].split("E")[0]
        h += sum(ord(ch) - 48 for ch in mant if ch.isdigit())
    return h % (1 << 32)


@dataclass
class BasisDocument:
    basis: BasisSet
    system: ParticleSystem | None
    digits: int
    coefficients: np.ndarray | None = None
    energy: gmpy2.mpfr | None = None
    extra: dict = field(default_factory=dict)


def save_basis(basis: BasisSet, system: ParticleSystem, coefficients=None, energy=None,
               path=None) -> str:
    """Serialize to FBVS v1 text; also write it to ``path`` when given."""
    if coefficients is not None and len(coefficients) != basis.N:
        raise ValueError("coefficient count does not match basis size")
    lines = [f"{FORMAT_TAG} {FORMAT_VERSION}", f"system {system.descriptor()}",
             f"N {basis.N} digits {basis.digits}"]
    numeric: list[str] = []
    for k, t in enumerate(basis.triples):
        row = [to_decimal(t.alpha), to_decimal(t.beta), to_decimal(t.gamma)]
        if coefficients is not None:
            row.append(to_decimal(coefficients[k]))
        numeric.extend(row)
        lines.append(" ".join(row))
    for b in basis.boxes:
        lines.append("box " + " ".join(str(v) for v in b.endpoints()) + f" {b.count}")
    if energy is not None:
        e = to_decimal(energy)
        numeric.append(e)
        lines.append(f"energy {e}")
    lines.append(f"checksum {mantissa_checksum(numeric)}")
    text = "\n".join(lines) + "\n"
    if path is not None:
        with open(path, "w", encoding="ascii") as fh:
            fh.write(text)
    return text


def load_basis(document: str) -> BasisDocument:
    """Parse FBVS v1 text; raises :class:`FormatError` with line diagnostics."""
    lines = document.splitlines()
    if not lines:
        raise FormatError("empty document", line=1)
    head = lines[0].split()
    if len(head) != 2 or head[0] != FORMAT_TAG:
        raise FormatError(f"missing '{FORMAT_TAG} {FORMAT_VERSION}' header", line=1)
    if head[1] != FORMAT_VERSION:
        raise FormatError(f"unsupported version {head[1]!r}", line=1, field="version")
    if len(lines) < 3:
        raise FormatError("truncated header", line=len(lines) + 1)
    sysline = lines[1].split(maxsplit=1)
    if not sysline or sysline[0] != "system":
        raise FormatError("expected system descriptor", line=2)
    try:
        system = ParticleSystem.from_descriptor(sysline[1]) if len(sysline) > 1 else None
    except (ValueError, ArithmeticError) as exc:
        raise FormatError(f"bad system descriptor: {exc}", line=2) from exc
    nline = lines[2].split()
    if len(nline) != 4 or nline[0] != "N" or nline[2] != "digits":
        raise FormatError("expected 'N <count> digits <precision>'", line=3)
    try:
        n, digits = int(nline[1]), int(nline[3])
    except ValueError as exc:
        raise FormatError("non-integer count or digits", line=3) from exc
    if n < 1:
        raise FormatError("basis size must be positive", line=3, field="N")
    try:
        ctx = make_context(digits)
    except ValueError as exc:
        raise FormatError(str(exc), line=3, field="digits") from exc
    if len(lines) < 3 + n:
        raise FormatError(f"truncated: expected {n} basis lines, found {len(lines) - 3}",
                          line=len(lines) + 1)

    def parse(tok: str, lineno: int, name: str):
        try:
            return gmpy2.mpfr(tok, ctx.bits)
        except ValueError as exc:
            raise FormatError(f"not a decimal number: {tok!r}", line=lineno, field=name) from exc

    triples = []
    coeffs = []
    numeric: list[str] = []
    width = None
    for k in range(n):
        lineno = 4 + k
        toks = lines[3 + k].split()
        if len(toks) not in (3, 4):
            raise FormatError("expected 'alpha beta gamma [coefficient]'", line=lineno)
        if width is None:
            width = len(toks)
        elif len(toks) != width:
            raise FormatError("inconsistent coefficient column", line=lineno)
        vals = [parse(t, lineno, nm) for t, nm in zip(toks, ("alpha", "beta", "gamma", "coefficient"))]
        numeric.extend(toks)
        triples.append(ExponentTriple(*vals[:3]))
        if width == 4:
            coeffs.append(vals[3])

    boxes = []
    energy = None
    checksum = None
    for k in range(3 + n, len(lines)):
        lineno = k + 1
        toks = lines[k].split()
        if not toks:
            continue
        tag = toks[0]
        if checksum is not None:
            raise FormatError("content after checksum", line=lineno)
        if tag == "box" and energy is None:
            if len(toks) != 8:
                raise FormatError("box record needs 6 endpoints and a count", line=lineno)
            try:
                boxes.append(ParameterBox.from_endpoints([Decimal(t) for t in toks[1:7]], int(toks[7])))
            except (ValueError, ArithmeticError) as exc:
                raise FormatError(f"bad box record: {exc}", line=lineno) from exc
        elif tag == "energy" and energy is None and len(toks) == 2:
            energy = parse(toks[1], lineno, "energy")
            numeric.append(toks[1])
        elif tag == "checksum" and len(toks) == 2:
            try:
                checksum = int(toks[1])
            except ValueError as exc:
                raise FormatError("checksum is not an integer", line=lineno, field="checksum") from exc
            if checksum != mantissa_checksum(numeric):
                raise FormatError("checksum mismatch", line=lineno, field="checksum")
        else:
            raise FormatError(f"unexpected record {tag!r}", line=lineno)

    basis = BasisSet(tuple(triples), tuple(boxes), digits)
    arr = None
    if coeffs:
        arr = np.empty(n, dtype=object)
        arr[:] = coeffs
    return BasisDocument(basis, system, digits, arr, energy)


def read_basis(path) -> BasisDocument:
    with open(path, encoding="ascii") as fh:
        return load_basis(fh.read())
