from __future__ import annotations

import pytest
from hypothesis import given, settings

from parlens.format import (
    Array,
    Case,
    Constraint,
    FieldDecl,
    FormatError,
    FormatSpec,
    Num,
    Prim,
    Ref,
    StructDef,
    StructRef,
    check_syntax,
    parse_format,
    print_format,
    validate,
)
from parlens.format.checker import has_errors
from parlens.format.evaluator import evaluate_packet
from parlens.format.naming import base_property, constraint_ids, constraint_slug
from parlens.format.parser import parse_constraint_text

from specgen import specs


def codes(text: str) -> list[str]:
    ok, diags = check_syntax(text)
    return [d.code for d in diags if d.severity == "error"]


# -- parsing and printing ------------------------------------------------------


def test_babel_parses_to_expected_ast(babel):
    tlv = babel.struct("TLV")
    assert babel.entry == "TLV"
    assert tlv.fields[0] == FieldDecl("Type", Prim.named("UINT8"))
    payload = tlv.fields[1].type
    assert isinstance(payload, Case)
    assert payload.control == "Type"
    assert payload.arms == ((0, StructRef("Pad1")), (6, StructRef("RouterIdTLV")))
    rid = babel.struct("RouterIdTLV")
    assert [f.name for f in rid.fields] == ["Length", "Reserved", "RouterId"]
    assert rid.constraints[-1] == Constraint(Ref("RouterId"), "!=", Num(0xFFFFFFFFFFFFFFFF, hex=True))


def test_printer_is_canonical(babel):
    text = print_format(babel)
    assert parse_format(text) == babel
    assert print_format(parse_format(text)) == text
    assert "entry" not in text  # the first struct is the default entry


def test_entry_declaration_printed_when_not_first():
    spec = FormatSpec((StructDef("A", (FieldDecl("x", Prim.named("UINT8")),)), StructDef("B")), "B")
    text = print_format(spec)
    assert "entry B;" in text
    assert parse_format(text) == spec


def test_arrays_and_bit_fields_round_trip():
    text = """
    struct Elem { UINT16 v; }
    struct P {
        BIT(4) version;
        BIT(4) flags;
        UINT8 n;
        UINT8 len;
        UINT8 data[n];
        Elem items[len bytes];
        UINT8 pad[2];
        (n + len) * 2 <= 40;
    }
    entry P;
    """
    spec = parse_format(text)
    p = spec.struct("P")
    assert p.field("data").type == Array(Prim.named("UINT8"), Ref("n"), "elements")
    assert p.field("items").type == Array(StructRef("Elem"), Ref("len"), "bytes")
    assert p.field("pad").type.is_fixed
    assert parse_format(print_format(spec)) == spec


def test_comparison_aliases_normalize():
    spec = parse_format("struct A { UINT8 x; x = 3; x ≥ 1; }")
    ops = [c.op for c in spec.struct("A").constraints]
    assert ops == ["==", ">="]


def test_parse_constraint_text():
    assert parse_constraint_text("Length >= 12") == Constraint(Ref("Length"), ">=", Num(12))
    assert parse_constraint_text("Length >= 12;") == Constraint(Ref("Length"), ">=", Num(12))
    with pytest.raises(FormatError):
        parse_constraint_text("Length >=")


@pytest.mark.parametrize(
    "text, code",
    [
        ("struct A { UINT8 x }", "syntax"),
        ("struct A { UINT8 x; y > 1; }", "unresolved-identifier"),
        ("struct A { BIT(3) x; }", "bit-alignment"),
        ("struct A { UINT8 x; } struct A { }", "duplicate-struct"),
        ("struct A { B b; }", "unknown-type"),
        ("struct A { UINT8 x; UINT8 x; }", "duplicate-field"),
    ],
)
def test_checker_rejects(text, code):
    assert code in codes(text)


def test_diagnostics_carry_positions():
    ok, diags = check_syntax("struct A {\n    UINT8 x\n}")
    assert not ok
    assert (diags[0].line, diags[0].col) == (3, 1)


def test_parse_format_raises_with_diagnostics():
    with pytest.raises(FormatError) as err:
        parse_format("struct A { B b; }")
    assert err.value.diagnostics[0].code == "unknown-type"


def test_struct_cycle_rejected():
    assert codes("struct A { B b; } struct B { A a; }")


def test_switch_control_must_resolve():
    assert "unresolved-identifier" in codes("struct A { switch (t) { case 1: UINT8; } body; }")


def test_constraints_ordered_by_check_point():
    s = StructDef(
        "A",
        (FieldDecl("x", Prim.named("UINT8")), FieldDecl("y", Prim.named("UINT8"))),
        (Constraint(Ref("y"), ">", Num(1)), Constraint(Ref("x"), ">", Num(1))),
    )
    assert [c.lhs.name for c in s.constraints] == ["x", "y"]


# -- naming ----------------------------------------------------------------------


def test_property_ids(babel):
    ids = constraint_ids(babel.struct("RouterIdTLV"))
    assert ids == [
        "RouterIdTLV.Length_ge_10",
        "RouterIdTLV.Reserved_eq_0",
        "RouterIdTLV.RouterId_ne_0",
        "RouterIdTLV.RouterId_ne_0xFFFFFFFFFFFFFFFF",
    ]
    assert base_property("RouterIdTLV.RouterId_ne_0@Payload") == "RouterIdTLV.RouterId_ne_0"


def test_duplicate_constraints_get_suffixes():
    s = parse_format("struct A { UINT8 x; x > 1; x > 1; }").struct("A")
    assert constraint_ids(s) == ["A.x_gt_1", "A.x_gt_1.2"]


def test_slug_spells_operators():
    assert constraint_slug(parse_constraint_text("(a + b) / 2 != c")) == "lp_a_plus_b_rp_div_2_ne_c"


# -- evaluator -------------------------------------------------------------------


@pytest.mark.parametrize(
    "hexdata, verdict, prop",
    [
        ("00", "pass", None),
        ("060a00000000000000000001", "pass", None),
        ("0600", "fail", "RouterIdTLV.Length_ge_10@Payload"),
        ("060a00000000000000000000", "fail", "RouterIdTLV.RouterId_ne_0@Payload"),
        ("060a0000ffffffffffffffff", "fail", "RouterIdTLV.RouterId_ne_0xFFFFFFFFFFFFFFFF@Payload"),
        ("060a0001000000000000000100", "fail", "RouterIdTLV.Reserved_eq_0@Payload"),
        ("07", "fail", "unmatched-case@Payload"),
        ("0000", "fail", "trailing-bytes"),
    ],
)
def test_evaluate_babel(babel, hexdata, verdict, prop):
    ev = evaluate_packet(babel, bytes.fromhex(hexdata))
    assert ev.verdict == verdict
    assert (ev.violation.property if ev.violation else None) == prop


def test_evaluate_truncated_packet(babel):
    ev = evaluate_packet(babel, bytes.fromhex("060a0000"))
    assert not ev.passed
    assert ev.violation.kind == "structural"


def test_full_scan_lists_every_violation(babel):
    ev = evaluate_packet(babel, bytes.fromhex("060001000000000000000000"), full_scan=True)
    bases = [v.base for v in ev.violations]
    assert bases == ["RouterIdTLV.Length_ge_10", "RouterIdTLV.Reserved_eq_0", "RouterIdTLV.RouterId_ne_0"]


def test_evaluate_bit_fields_and_arrays():
    spec = parse_format(
        """
        struct P {
            BIT(4) version;
            BIT(4) n;
            version == 4;
            UINT8 data[n];
        }
        """
    )
    assert evaluate_packet(spec, bytes([0x42, 1, 2])).passed
    assert not evaluate_packet(spec, bytes([0x42, 1])).passed
    assert evaluate_packet(spec, bytes([0x52, 1, 2])).violation.property == "P.version_eq_4"


def test_byte_sized_array_of_structs():
    spec = parse_format("struct E { UINT16 v; } struct P { UINT8 len; E items[len bytes]; } entry P;")
    assert evaluate_packet(spec, bytes([4, 0, 1, 0, 2])).passed
    assert not evaluate_packet(spec, bytes([3, 0, 1, 0])).passed


# -- properties --------------------------------------------------------------------


@settings(max_examples=60, deadline=None)
@given(specs())
def test_generated_specs_are_valid(spec):
    assert not has_errors(validate(spec))


@settings(max_examples=60, deadline=None)
@given(specs())
def test_printing_is_idempotent(spec):
    text = print_format(spec)
    assert print_format(parse_format(text)) == text
