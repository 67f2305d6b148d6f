"""Hyperfine structure from contact spin-spin interactions.

Each particle pair (a, b) contributes

    (2 pi / 3) alpha^2 (g_a g_b / (m_a m_b)) <delta(r_ab)> (s_a . s_b)

in Hartree, with nuclear g-factors referred to the proton mass. The
8-state (3He) or 4-state (4He) spin space is small, so everything here
runs in double precision.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction
from typing import Callable, Mapping

import numpy as np

from .errors import DimensionMismatch, UnexpectedDegeneracy

GROUP_GAP_REL = 1e-9


@dataclass(frozen=True)
class ConstantsTable:
    alpha_fs: float = 7.2973525698e-3
    m_p: float = 1836.152701
    m_mu: float = 206.768262
    m_e: float = 1.0
    g_mu: float = -2.0023318414
    g_e: float = -2.0023193043622
    moment_N3: float = -2.1277508  # nuclear magnetons
    I_N3: float = 0.5
    au_to_MHz: float = 6.579683920729e9
    coefficient_4He: float = 14229.178083766834

    @property
    def g_N3(self) -> float:
        return self.moment_N3 / self.I_N3

    def with_overrides(self, **kw) -> "ConstantsTable":
        unknown = set(kw) - set(asdict(self))
        if unknown:
            raise KeyError(f"unknown constants: {sorted(unknown)}")
        return replace(self, **{k: float(v) for k, v in kw.items()})

    def as_dict(self) -> dict:
        d = asdict(self)
        d["g_N3"] = self.g_N3
        return d

    def contact_prefactor(self) -> float:
        """(2 pi / 3) alpha^2."""
        return 2 * math.pi / 3 * self.alpha_fs ** 2

    def derived_4he_coefficient(self) -> float:
        """MHz per atomic unit of <delta(r_e mu)> recomputed from the table."""
        return self.contact_prefactor() * self.g_e * self.g_mu / (self.m_e * self.m_mu) * self.au_to_MHz


@dataclass(frozen=True)
class SpinSystem:
    spins: tuple[Fraction, ...]

    def __post_init__(self):
        spins = tuple(Fraction(s) for s in self.spins)
        if any(s < 0 or (2 * s).denominator != 1 for s in spins):
            raise ValueError(f"spins must be non-negative half-integers, got {self.spins}")
        object.__setattr__(self, "spins", spins)

    @property
    def dimension(self) -> int:
        return math.prod(int(2 * s + 1) for s in self.spins)


HE3_SPINS = SpinSystem((Fraction(1, 2), Fraction(1, 2), Fraction(1, 2)))  # e, mu, 3He
HE4_SPINS = SpinSystem((Fraction(1, 2), Fraction(1, 2)))  # e, mu


def spin_matrices(s: Fraction) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(Sx, Sy, Sz) for spin ``s`` in the |s, m> basis, m descending."""
    dim = int(2 * s + 1)
    m = np.array([float(s) - k for k in range(dim)])
    sp = np.zeros((dim, dim))
    for k in range(1, dim):
        sp[k - 1, k] = math.sqrt(float(s) * (float(s) + 1) - m[k] * (m[k] + 1))
    sx = (sp + sp.T) / 2
    sy = (sp - sp.T) / 2j
    return sx, sy, np.diag(m)


def _embed(op: np.ndarray, k: int, dims: list[int]) -> np.ndarray:
    out = np.array([[1.0]])
    for i, d in enumerate(dims):
        out = np.kron(out, op if i == k else np.eye(d))
    return out


def spin_dot_matrix(sys: SpinSystem, a: int, b: int) -> np.ndarray:
    """s_a . s_b on the product space (0-based particle indices)."""
    n = len(sys.spins)
    if a == b or not (0 <= a < n and 0 <= b < n):
        raise IndexError(f"need two distinct particle indices in [0, {n}), got {a}, {b}")
    dims = [int(2 * s + 1) for s in sys.spins]
    ops_a = spin_matrices(sys.spins[a])
    ops_b = spin_matrices(sys.spins[b])
    total = sum(_embed(oa, a, dims) @ _embed(ob, b, dims) for oa, ob in zip(ops_a, ops_b))
    return np.real_if_close(total).real


def build_hfs_hamiltonian(sys: SpinSystem, deltas: Mapping[str, float], consts: ConstantsTable,
                          species: str) -> np.ndarray:
    """Contact Hamiltonian in Hartree; particle order is (e, mu[, nucleus]).

    ``deltas`` maps '21', '31', '32' to <delta(r_ij)> in atomic units.
    For 4He only the electron-muon term exists.
    """
    species = species.lower()
    pre = consts.contact_prefactor()
    g_e, g_mu = consts.g_e, consts.g_mu
    if species == "he4":
        if sys.dimension != 4 or len(sys.spins) != 2:
            raise DimensionMismatch(f"4He needs an (e, mu) spin space of dimension 4, got {sys.dimension}")
        return pre * g_e * g_mu / (consts.m_e * consts.m_mu) * float(deltas["21"]) * spin_dot_matrix(sys, 0, 1)
    if species == "he3":
        if sys.dimension != 8 or len(sys.spins) != 3:
            raise DimensionMismatch(f"3He needs an (e, mu, N) spin space of dimension 8, got {sys.dimension}")
        g_n, m_p = consts.g_N3, consts.m_p
        return (
            pre * g_n * g_mu / (m_p * consts.m_mu) * float(deltas["32"]) * spin_dot_matrix(sys, 2, 1)
            + pre * g_n * g_e / (m_p * consts.m_e) * float(deltas["31"]) * spin_dot_matrix(sys, 2, 0)
            + pre * g_e * g_mu / (consts.m_e * consts.m_mu) * float(deltas["21"]) * spin_dot_matrix(sys, 0, 1)
        )
    raise ValueError(f"species must be 'he3' or 'he4', got {species!r}")


def au_to_mhz(energy: float, consts: ConstantsTable | None = None) -> float:
    return energy * (consts or ConstantsTable()).au_to_MHz


def mhz_to_au(freq: float, consts: ConstantsTable | None = None) -> float:
    return freq / (consts or ConstantsTable()).au_to_MHz


@dataclass
class HfsLevel:
    energy_MHz: float
    degeneracy: int
    label: str


@dataclass
class HfsResult:
    levels: list[HfsLevel]
    splitting_MHz: float
    uncertainty_MHz: float = 0.0
    constants: dict = field(default_factory=dict)

    @property
    def dimension(self) -> int:
        return sum(lv.degeneracy for lv in self.levels)


def _cluster(values: np.ndarray) -> list[tuple[float, int]]:
    """Group descending eigenvalues whose gap is below GROUP_GAP_REL of the spread scale."""
    vals = np.sort(values)[::-1]
    scale = max(float(np.max(np.abs(vals))), np.finfo(float).tiny)
    groups: list[list[float]] = [[vals[0]]]
    for v in vals[1:]:
        if abs(groups[-1][-1] - v) <= GROUP_GAP_REL * scale:
            groups[-1].append(v)
        else:
            groups.append([v])
    return [(float(np.mean(g)), len(g)) for g in groups]


def hfs_levels(matrix: np.ndarray, consts: ConstantsTable | None = None) -> HfsResult:
    """Diagonalize, convert to MHz and group the spin levels.

    Dimension 8 expects degeneracies 4 (J=3/2) and 2+2 (upper/lower J=1/2);
    dimension 4 expects 3 (J=1) and 1 (J=0).
    """
    consts = consts or ConstantsTable()
    matrix = np.asarray(matrix, dtype=float)
    if not np.allclose(matrix, matrix.T, rtol=0, atol=1e-14 * max(1.0, np.abs(matrix).max())):
        raise ValueError("hyperfine matrix must be symmetric")
    eig = np.linalg.eigvalsh(matrix) * consts.au_to_MHz
    if not np.any(eig):
        raise UnexpectedDegeneracy("all levels coincide; no hyperfine structure")
    groups = _cluster(eig)
    degs = [d for _, d in groups]
    dim = matrix.shape[0]
    if dim == 8:
        if sorted(degs) != [2, 2, 4]:
            raise UnexpectedDegeneracy(f"expected 4/2/2 degeneracies, got {degs}")
        doublets = [e for e, d in groups if d == 2]
        levels = []
        for e, d in groups:
            if d == 4:
                levels.append(HfsLevel(e, d, "J=3/2"))
            else:
                levels.append(HfsLevel(e, d, "J=1/2 upper" if e == max(doublets) else "J=1/2 lower"))
        quartet = next(lv.energy_MHz for lv in levels if lv.degeneracy == 4)
        splitting = quartet - max(doublets)
    elif dim == 4:
        if sorted(degs) != [1, 3]:
            raise UnexpectedDegeneracy(f"expected 3/1 degeneracies, got {degs}")
        levels = [HfsLevel(e, d, "J=1" if d == 3 else "J=0") for e, d in groups]
        splitting = next(e for e, d in groups if d == 3) - next(e for e, d in groups if d == 1)
    else:
        raise UnexpectedDegeneracy(f"no level pattern known for dimension {dim}")
    return HfsResult(levels, splitting, 0.0, consts.as_dict())


def splitting_4he_direct(delta21: float, consts: ConstantsTable | None = None) -> float:
    """Electron-muon splitting in MHz from the tabulated 4He coefficient."""
    return (consts or ConstantsTable()).coefficient_4He * float(delta21)


def propagate_uncertainty(delta_central: float, delta_spread: float,
                          evaluator: Callable[[float], float]) -> tuple[float, float]:
    """Evaluate at central and central +/- spread; sigma is half the range."""
    if delta_spread < 0:
        raise ValueError("spread must be non-negative")
    vals = [evaluator(delta_central + k * delta_spread) for k in (-1, 0, 1)]
    return vals[1], (max(vals) - min(vals)) / 2


def hfs_report(deltas: Mapping[str, float], species: str, consts: ConstantsTable | None = None,
               spreads: Mapping[str, float] | None = None) -> HfsResult:
    """Levels and splitting; uncertainty combines the per-delta three-point spreads in quadrature."""
    consts = consts or ConstantsTable()
    species = species.lower()
    spins = HE3_SPINS if species == "he3" else HE4_SPINS
    result = hfs_levels(build_hfs_hamiltonian(spins, deltas, consts, species), consts)
    var = 0.0
    for pair, spread in (spreads or {}).items():
        if not spread:
            continue
        if species == "he4" and pair != "21":
            continue

        def split_at(v, pair=pair):
            d = dict(deltas)
            d[pair] = v
            return hfs_levels(build_hfs_hamiltonian(spins, d, consts, species), consts).splitting_MHz

        _, sigma = propagate_uncertainty(float(deltas[pair]), float(spread), split_at)
        var += sigma ** 2
    result.uncertainty_MHz = math.sqrt(var)
    return result
