from decimal import Decimal

import gmpy2
import pytest
from hypothesis import given, settings, strategies as st

from fbhfs.basis import (
    BasisSet, ExponentTriple, ParameterBox, default_boxes, generate_basis, load_basis, mantissa_checksum,
    preset_boxes, read_basis, save_basis, to_decimal, validate_basis,
)
from fbhfs.errors import CannotSatisfy, FormatError
from fbhfs.system import HE4


def test_generation_is_deterministic(ctx):
    a = generate_basis(default_boxes(30), ctx)
    b = generate_basis(default_boxes(30), ctx)
    assert a == b and a.N == 30
    assert validate_basis(a) == []


def test_scale_coverage_of_defaults(ctx):
    basis = generate_basis(default_boxes(40), ctx)
    gammas = [float(t.gamma) for t in basis.triples]
    betas = [float(t.beta) for t in basis.triples]
    assert min(gammas) >= 300 and max(gammas) <= 550
    assert min(betas) < 2


@settings(max_examples=15, deadline=None)
@given(st.lists(st.integers(1, 4), min_size=1, max_size=3), st.integers(1, 3), st.integers(1, 3))
def test_nested_under_proportional_counts(shares, k, extra):
    # counts c*k generate exactly the first k*sum(c) functions of counts c*(k+extra)
    from fbhfs.precision import make_context
    ctx = make_context(30)
    shapes = [(("0.3", "2.5"), ("0.3", "2.5"), ("350", "450")),
              (("0.3", "6"), ("0.3", "6"), ("300", "550")),
              (("-1.5", "-0.5"), ("1.5", "3"), ("350", "450"))]
    small = [ParameterBox(*shapes[i], c * k) for i, c in enumerate(shares)]
    big = [ParameterBox(*shapes[i], c * (k + extra)) for i, c in enumerate(shares)]
    a = generate_basis(small, ctx)
    b = generate_basis(big, ctx)
    assert a.triples == b.triples[:a.N]
    assert b.truncate(a.N).triples == a.triples


def test_interleaving_prefix_is_balanced(ctx):
    boxes = [ParameterBox(("1", "2"), ("1", "2"), ("400", "401"), 3),
             ParameterBox(("5", "6"), ("5", "6"), ("300", "301"), 6)]
    basis = generate_basis(boxes, ctx)
    which = [0 if t.alpha < 3 else 1 for t in basis.triples]
    assert which == [1, 0, 1, 1, 0, 1, 1, 0, 1]


def test_degenerate_interval(ctx):
    box = ParameterBox(("1.5", "1.5"), ("0.5", "2"), ("400", "450"), 5)
    basis = generate_basis([box], ctx)
    assert all(t.alpha == gmpy2.mpfr("1.5", ctx.bits) for t in basis.triples)


def test_degenerate_box_cannot_fill_distinct_triples(ctx):
    box = ParameterBox(("1", "1"), ("1", "1"), ("1", "1"), 2)
    with pytest.raises(CannotSatisfy):
        generate_basis([box], ctx)


def test_unsatisfiable_box(ctx):
    box = ParameterBox(("-5", "-3"), ("0.1", "1"), ("400", "450"), 4)
    with pytest.raises(CannotSatisfy):
        generate_basis([box], ctx)


def test_negative_alpha_box_skips_non_integrable(ctx):
    box = ParameterBox(("-1.5", "-0.5"), ("1", "3"), ("350", "450"), 50)
    basis = generate_basis([box], ctx)
    assert basis.N == 50 and validate_basis(basis) == []


def test_validate_reports_violations(ctx):
    with ctx.local():
        bad = ExponentTriple(ctx.mpf(1), ctx.mpf(-2), ctx.mpf("0.5"))
        ok = ExponentTriple(ctx.mpf(1), ctx.mpf(1), ctx.mpf(400))
    problems = validate_basis(BasisSet((bad, ok, ok)))
    assert any("alpha+beta" in p for p in problems)
    assert any("duplicate triple at indices 1,2" in p for p in problems)


def test_save_load_roundtrip(ctx):
    basis = generate_basis(default_boxes(10), ctx)
    with ctx.local():
        coeffs = ctx.array([gmpy2.mpfr(k) / 7 - 1 for k in range(10)])
        energy = gmpy2.mpfr(-402) - gmpy2.mpfr(1) / 3
    text = save_basis(basis, HE4, coeffs, energy)
    doc = load_basis(text)
    assert doc.basis == basis
    assert doc.system == HE4
    assert list(doc.coefficients) == list(coeffs)
    assert doc.energy == energy
    assert save_basis(doc.basis, doc.system, doc.coefficients, doc.energy) == text


@settings(max_examples=50, deadline=None)
@given(st.floats(-1e30, 1e30, allow_nan=False).filter(lambda v: v != 0), st.integers(30, 120))
def test_decimal_strings_reparse_exactly(v, digits):
    bits = int(digits * 3.3219280948873626) + 2
    with gmpy2.context(precision=bits):
        x = gmpy2.mpfr(v) / 3
        assert gmpy2.mpfr(to_decimal(x), bits) == x


def test_file_roundtrip(tmp_path, ctx):
    basis = generate_basis(default_boxes(6), ctx)
    path = tmp_path / "b.fbvs"
    save_basis(basis, HE4, path=path)
    assert read_basis(path).basis == basis


def test_checksum_definition():
    assert mantissa_checksum(["1.25e3", "-4.5e-1"]) == 17
    assert mantissa_checksum(["9" * 12, "0"]) == 108


def test_format_errors(ctx):
    text = save_basis(generate_basis(default_boxes(4), ctx), HE4)
    lines = text.splitlines()
    with pytest.raises(FormatError, match="unsupported version"):
        load_basis(text.replace("FBVS v1", "FBVS v99"))
    with pytest.raises(FormatError, match="truncated"):
        load_basis("\n".join(lines[:5]))
    bad = lines[:]
    bad[3] = bad[3].replace("e", "x", 1)
    with pytest.raises(FormatError) as info:
        load_basis("\n".join(bad))
    assert info.value.line == 4
    tampered = lines[:]
    row = tampered[4]
    tampered[4] = row[:2] + ("5" if row[2] != "5" else "6") + row[3:]  # first digit after the point
    with pytest.raises(FormatError, match="checksum"):
        load_basis("\n".join(tampered))


def test_box_validation():
    with pytest.raises(ValueError):
        ParameterBox(("2", "1"), ("0", "1"), ("0", "1"), 1)
    box = ParameterBox.from_endpoints([Decimal(v) for v in ("0", "1", "2", "3", "4", "5")], 7)
    assert box.endpoints() == [Decimal(v) for v in ("0", "1", "2", "3", "4", "5")]
