from __future__ import annotations

import json

import pytest
from hypothesis import given, settings

from parlens.format import parse_format
from parlens.format.evaluator import evaluate_packet
from parlens.graph import build_graph, enumerate_paths
from parlens.testgen import (
    decode_path,
    generate_corpus,
    generate_positive,
    load_corpus,
    mutate_field_level,
    path_to_formula,
    serialize_packet,
    solve,
    to_smtlib,
    write_corpus,
)

from specgen import specs


def router_id_formula(babel):
    return path_to_formula(enumerate_paths(build_graph(babel))[1])


def test_solver_finds_smallest_model(babel):
    result = solve(router_id_formula(babel))
    assert result.sat
    assert result.assignment == {"Type": 6, "Payload.Length": 10, "Payload.Reserved": 0, "Payload.RouterId": 1}


def test_solver_respects_pins(babel):
    f = router_id_formula(babel)
    assert solve(f, {"Payload.Length": 200}).assignment["Payload.Length"] == 200
    assert solve(f, {"Payload.Length": 3}).status == "unsat"
    assert solve(f, {"Payload.Length": 256}).status == "unsat"


def test_solver_detects_unary_contradiction():
    spec = parse_format("struct P { UINT32 a; UINT16 b; b <= 3; b > 3042; }")
    f = path_to_formula(enumerate_paths(build_graph(spec))[0])
    assert solve(f, timeout=2).status == "unsat"


def test_solver_division_truncates():
    spec = parse_format("struct P { UINT8 a; a / 3 == 5; a > 16; }")
    f = path_to_formula(enumerate_paths(build_graph(spec))[0])
    assert solve(f).assignment == {"a": 17}


def test_serialize_and_decode_round_trip(babel):
    path = enumerate_paths(build_graph(babel))[1]
    a = {"Type": 6, "Payload.Length": 10, "Payload.Reserved": 0, "Payload.RouterId": 1}
    data = serialize_packet(path, a)
    assert data.hex() == "060a00000000000000000001"
    assert decode_path(path, data) == a


def test_bit_fields_pack_msb_first():
    spec = parse_format("struct P { BIT(4) v; BIT(4) f; UINT8 x; }")
    path = enumerate_paths(build_graph(spec))[0]
    assert serialize_packet(path, {"v": 4, "f": 2, "x": 255}) == bytes([0x42, 0xFF])


def test_length_negation_pins_other_fields(babel):
    f = router_id_formula(babel)
    positive, base, _ = generate_positive(f)
    neg, skip = mutate_field_level(f, base, "RouterIdTLV.Length_ge_10@Payload")
    assert skip is None
    assert neg.data.hex() == "060000000000000000000001"
    assert neg.notes["witness"] == "Length = 0"
    assert neg.notes["unpinned"] == ["Payload.Length"]


def test_unsat_negation_is_skipped():
    spec = parse_format("struct P { UINT8 a; a <= 255; }")
    f = path_to_formula(enumerate_paths(build_graph(spec))[0])
    _, base, _ = generate_positive(f)
    neg, skip = mutate_field_level(f, base, "P.a_le_255")
    assert neg is None
    assert skip.reason == "unsat"


def test_only_node_conjuncts_are_mutated(babel):
    f = router_id_formula(babel)
    with pytest.raises(ValueError):
        mutate_field_level(f, {}, "case@Payload")


def test_babel_corpus(babel):
    corpus = generate_corpus(babel)
    assert corpus.summary() == {
        "paths": 2,
        "positives": 2,
        "negatives": 9,
        "field_negatives": 4,
        "structural_negatives": 5,
        "skipped_unsat": 0,
        "skipped_timeout": 0,
    }
    ids = [c.id for c in corpus.cases]
    assert ids[:3] == ["p0000__pos__positive", "p0000__neg__trailing", "p0001__pos__positive"]
    assert "p0001__neg__trunc@Payload.Reserved" in ids


def test_contradictory_format_reports_unsat():
    corpus = generate_corpus(parse_format("struct P { UINT8 a; a > 5; a < 3; }"))
    assert corpus.cases == []
    assert corpus.summary()["skipped_unsat"] == 1
    assert "1 skipped unsat" in corpus.summary_line()


def test_empty_entry_struct():
    corpus = generate_corpus(parse_format("struct P { }"))
    assert [c.id for c in corpus.cases] == ["p0000__pos__positive", "p0000__neg__trailing"]
    assert corpus.cases[0].data == b""


def test_corpus_round_trip(tmp_path, babel):
    corpus = generate_corpus(babel, section_of=lambda s, p: "4.4.7" if s == "RouterIdTLV" else "4.4")
    write_corpus(tmp_path, corpus)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["summary"]["paths"] == 2
    loaded = load_corpus(tmp_path)
    assert loaded == sorted(corpus.cases, key=lambda c: c.id)
    rid = next(c for c in loaded if c.property_id == "RouterIdTLV.RouterId_ne_0@Payload")
    assert rid.section == "4.4.7"
    assert (tmp_path / f"{rid.id}.bin").read_bytes() == rid.data


def test_smtlib_export(babel):
    text = to_smtlib(router_id_formula(babel))
    assert "(declare-fun Payload.RouterId () Int)" in text
    assert "(assert (not (= Payload.RouterId 0)))" in text
    assert text.rstrip().endswith("(get-model)")


@settings(max_examples=30, deadline=None)
@given(specs())
def test_solver_agrees_with_z3(spec):
    z3 = pytest.importorskip("z3")
    for path in enumerate_paths(build_graph(spec, (0, 1, 2)))[:8]:
        formula = path_to_formula(path)
        ours = solve(formula, timeout=1)
        if ours.status == "timeout":
            continue
        s = z3.Solver()
        s.from_string(to_smtlib(formula).replace("(check-sat)", "").replace("(get-model)", ""))
        assert (s.check() == z3.sat) == ours.sat, path.describe()


@settings(max_examples=30, deadline=None)
@given(specs())
def test_positives_satisfy_their_formula(spec):
    for path in enumerate_paths(build_graph(spec, (0, 1)))[:8]:
        formula = path_to_formula(path)
        case, assignment, skip = generate_positive(formula, timeout=1)
        if case is None:
            continue
        assert formula.holds(decode_path(path, case.data))
        assert evaluate_packet(spec, case.data).passed
