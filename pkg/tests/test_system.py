from decimal import Decimal

import gmpy2
import pytest

from fbhfs.system import HE3, HE4, ParticleSystem, helium_muonic, system_by_name


def test_muonic_helium_constants():
    assert HE4.masses == (Decimal(1), Decimal("206.768262"), Decimal("7294.2996"))
    assert HE3.masses[2] == Decimal("5495.8852")
    assert HE4.charges == (Decimal(-1), Decimal(-1), Decimal(2))


def test_kato_cusps(ctx):
    with ctx.local():
        mu = gmpy2.mpfr("206.768262")
        assert HE4.kato_cusp("21") == mu / (mu + 1)  # (-1)(-1) mu_e,mu
        assert HE4.kato_cusp("31") == -2 * gmpy2.mpfr("7294.2996") / gmpy2.mpfr("7295.2996")
        assert HE4.kato_cusp("32") < -400


def test_descriptor_roundtrip():
    for s in (HE3, HE4, ParticleSystem((1, 2, 3), (-1, 1, 0), ("a", "b", "c"), "toy")):
        assert ParticleSystem.from_descriptor(s.descriptor()) == s


@pytest.mark.parametrize("bad", [(0, 1, 1), (1, -2, 1)])
def test_rejects_nonpositive_mass(bad):
    with pytest.raises(ValueError):
        ParticleSystem(bad, (-1, -1, 2))


def test_lookup():
    assert system_by_name("4He") is HE4
    assert system_by_name("he3") is HE3
    with pytest.raises(ValueError):
        system_by_name("li7")
    with pytest.raises(ValueError):
        helium_muonic(5)
