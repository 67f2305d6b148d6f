"""Three-particle Coulomb systems in atomic units (m_e = 1)."""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal

import gmpy2

MUON_MASS = Decimal("206.768262")
HE3_MASS = Decimal("5495.8852")
HE4_MASS = Decimal("7294.2996")

# pair label -> (first particle, second particle), 1-based, electron=1 muon=2 nucleus=3
PAIRS = {"21": (2, 1), "31": (3, 1), "32": (3, 2)}


def _dec(x) -> Decimal:
    return x if isinstance(x, Decimal) else Decimal(str(x))


@dataclass(frozen=True)
class ParticleSystem:
    masses: tuple[Decimal, Decimal, Decimal]
    charges: tuple[Decimal, Decimal, Decimal]
    labels: tuple[str, str, str] = ("e", "mu", "N")
    name: str = "custom"

    def __post_init__(self):
        masses = tuple(_dec(m) for m in self.masses)
        charges = tuple(_dec(q) for q in self.charges)
        if len(masses) != 3 or len(charges) != 3 or len(self.labels) != 3:
            raise ValueError("a three-body system needs exactly three masses, charges and labels")
        if any(m <= 0 for m in masses):
            raise ValueError(f"masses must be positive, got {masses}")
        object.__setattr__(self, "masses", masses)
        object.__setattr__(self, "charges", charges)
        object.__setattr__(self, "labels", tuple(self.labels))

    def mass(self, k: int) -> gmpy2.mpfr:
        """Mass of particle ``k`` (1-based) at the current gmpy2 precision."""
        return gmpy2.mpfr(str(self.masses[k - 1]))

    def charge(self, k: int) -> gmpy2.mpfr:
        return gmpy2.mpfr(str(self.charges[k - 1]))

    def reduced_mass(self, pair: str) -> gmpy2.mpfr:
        i, j = PAIRS[pair]
        mi, mj = self.mass(i), self.mass(j)
        return mi * mj / (mi + mj)

    def kato_cusp(self, pair: str) -> gmpy2.mpfr:
        """Exact coalescence cusp q_i q_j mu_ij for ``pair``."""
        i, j = PAIRS[pair]
        return self.charge(i) * self.charge(j) * self.reduced_mass(pair)

    def descriptor(self) -> str:
        return " ".join(
            [self.name, *self.labels, *(str(m) for m in self.masses), *(str(q) for q in self.charges)]
        )

    @classmethod
    def from_descriptor(cls, text: str) -> "ParticleSystem":
        parts = text.split()
        if len(parts) != 10:
            raise ValueError(f"system descriptor needs 10 fields, got {len(parts)}")
        name, l1, l2, l3 = parts[:4]
        masses = tuple(Decimal(p) for p in parts[4:7])
        charges = tuple(Decimal(p) for p in parts[7:10])
        return cls(masses, charges, (l1, l2, l3), name)


def helium_muonic(isotope: int) -> ParticleSystem:
    """e^- mu^- He^{2+} with the nuclear mass of helium-3 or helium-4."""
    if isotope == 3:
        m3, name = HE3_MASS, "he3"
    elif isotope == 4:
        m3, name = HE4_MASS, "he4"
    else:
        raise ValueError(f"isotope must be 3 or 4, got {isotope}")
    return ParticleSystem(
        (Decimal(1), MUON_MASS, m3),
        (Decimal(-1), Decimal(-1), Decimal(2)),
        ("e", "mu", f"He{isotope}"),
        name,
    )


HE3 = helium_muonic(3)
HE4 = helium_muonic(4)


def system_by_name(name: str) -> ParticleSystem:
    key = name.lower()
    if key in ("he3", "3he"):
        return HE3
    if key in ("he4", "4he"):
        return HE4
    raise ValueError(f"unknown system {name!r}; expected he3 or he4")
