from __future__ import annotations

import pytest

from parlens.doctree import (
    EMPTY_SUMMARY,
    SYNTHETIC_ROOT,
    DocTree,
    DocTreeError,
    ExtractionError,
    IngestError,
    TraceIndex,
    build_initial_tree,
    extract_node_format,
    load_rfc,
    merge_formats,
    parse_hierarchy,
    parse_merge_answer,
    parse_rfc,
    refine_hierarchy,
    run_extraction,
    summarize_all,
    trace,
)
from parlens.doctree.extract import clean_format_answer, is_no_format
from parlens.llm import Gateway

from conftest import BUNDLE

RFC = BUNDLE / "rfc-babel-mini.txt"

MINI = """\
Title line

Table of Contents

   1.  Intro  . . . . . . 2
   2.  Body   . . . . . . 3
     2.1.  Detail  . . . . 3

1.  Intro

   Some words.

Author                    Standards Track                     [Page 2]

RFC 9999                  Example Protocol                  March 2024

2.  Body

   The body.

2.1.  Detail

   struct detail here
"""


class Scripted:
    """Minimal gateway stand-in answering from a function."""

    def __init__(self, answer):
        self.answer = answer
        self.calls: list[tuple[str, dict]] = []

    def complete(self, template: str, bindings: dict) -> str:
        self.calls.append((template, bindings))
        return self.answer(template, bindings, len(self.calls))


def mini_tree() -> DocTree:
    doc = parse_rfc(MINI)
    return build_initial_tree(doc.toc, doc.sections)


# -- ingest ----------------------------------------------------------------------


def test_parse_rfc_reads_toc_and_bodies():
    doc = parse_rfc(MINI)
    assert doc.toc == [("1", "Intro"), ("2", "Body"), ("2.1", "Detail")]
    assert doc.sections["1"] == "Some words."
    assert doc.sections["2"] == "The body."


def test_page_furniture_is_stripped():
    doc = load_rfc([RFC])
    text = "\n".join(doc.sections.values())
    assert "[Page" not in text
    assert "RFC 8966" not in text
    assert "MUST NOT consist of all zeroes or all ones" in doc.sections["4.4.7"]


def test_missing_toc():
    with pytest.raises(IngestError, match="table of contents"):
        parse_rfc("1. Intro\n\n   text\n")


def test_toc_section_missing_from_body():
    with pytest.raises(IngestError, match="2.1"):
        parse_rfc(MINI.replace("2.1.  Detail\n", ""))


def test_two_documents_share_a_namespace(tmp_path):
    a = tmp_path / "a.txt"
    a.write_text(MINI)
    with pytest.raises(IngestError, match="more than one document"):
        load_rfc([a, a])


# -- tree ------------------------------------------------------------------------


def test_initial_tree_follows_dotted_ids():
    tree = mini_tree()
    assert tree.root == SYNTHETIC_ROOT
    assert tree.nodes[SYNTHETIC_ROOT].children == ["1", "2"]
    assert tree.parent_of("2.1") == "2"
    assert tree.preorder() == ["0", "1", "2", "2.1"]
    assert tree.postorder()[-1] == "0"
    assert tree.render_toc() == "1 Intro\n2 Body\n  2.1 Detail"


def test_tree_save_load(tmp_path):
    tree = mini_tree()
    tree.save(tmp_path / "t.json")
    assert DocTree.load(tmp_path / "t.json").to_json() == tree.to_json()


def test_validate_rejects_unreachable_sections():
    tree = mini_tree()
    tree.nodes["2"].children.remove("2.1")
    with pytest.raises(DocTreeError, match="unreachable"):
        tree.validate()


def test_trace_index_round_trip(tmp_path):
    idx = TraceIndex()
    idx.add("S", "", "4.4")
    idx.add("S", "S.x_gt_1", "4.4.7")
    idx.save(tmp_path / "t.json")
    loaded = TraceIndex.load(tmp_path / "t.json")
    assert loaded == idx
    assert loaded.section_for("S", "S.unknown") == "4.4"
    with pytest.raises(KeyError):
        loaded.lookup("T")


# -- model answers ---------------------------------------------------------------


@pytest.mark.parametrize(
    "text, pairs",
    [
        ("4.2 parent of 4.4", [("4.2", "4.4")]),
        ("Section 4.2 is the parent of Section 4.4: it lists the TLVs.", [("4.2", "4.4")]),
        ("- `2` is parent of `2.1`\n- 3 parent of 3.1.", [("2", "2.1"), ("3", "3.1")]),
        ("NONE", []),
        ("none.", []),
        ("I am not sure.", None),
    ],
)
def test_parse_hierarchy(text, pairs):
    assert parse_hierarchy(text) == pairs


def test_parse_merge_answer():
    m = parse_merge_answer("FORMAT:\n```\nstruct A { }\n```\nSUMMARY:\nmerged\nTRACE:\n- A <- section 4.4.\n")
    assert m.format.strip("`\n ") == "struct A { }"
    assert m.summary == "merged"
    assert m.trace == {"A": "4.4"}


def test_clean_format_answer():
    assert clean_format_answer("```pform\nstruct A { }\n```") == "struct A { }"
    assert is_no_format("NO_FORMAT")
    assert not is_no_format("struct A { }")


# -- extraction steps ------------------------------------------------------------


def test_blank_summary_is_retried_once():
    gw = Scripted(lambda t, b, n: "" if n == 1 else "fine")
    tree = mini_tree()
    tree.nodes["2"].content = ""
    tree = summarize_all(tree, gw)
    assert tree.nodes["1"].summary == "fine"
    assert tree.nodes["2"].summary == EMPTY_SUMMARY


def test_blank_summary_twice_is_fatal():
    with pytest.raises(ExtractionError):
        summarize_all(mini_tree(), Scripted(lambda t, b, n: " "))


def test_hierarchy_moves_stay_within_sibling_group():
    tree = summarize_all(mini_tree(), Scripted(lambda t, b, n: "s"))
    out = refine_hierarchy(tree, Scripted(lambda t, b, n: "1 parent of 2\n2.1 parent of 1"))
    assert out.parent_of("2") == "1"
    assert out.parent_of("2.1") == "2"
    assert any("not within sibling group" in w for w in out.warnings)


def test_repair_loop_recovers():
    answers = {1: "struct A { UINT8 x }", 2: "struct A { UINT8 x; }"}
    gw = Scripted(lambda t, b, n: answers[n])
    result = extract_node_format(mini_tree(), "2.1", gw)
    assert result.status == "ok"
    assert result.attempts == 2
    assert [t for t, _ in gw.calls] == ["generate_format", "refine_syntax"]
    assert "expected ';'" in gw.calls[1][1]["Diagnostics"]


def test_repair_loop_gives_up():
    gw = Scripted(lambda t, b, n: "struct A {")
    result = extract_node_format(mini_tree(), "2.1", gw, max_retries=2)
    assert result.status == "retry-exhausted"
    assert result.attempts == 3
    assert len(gw.calls) == 3


def test_root_merge_failure_is_fatal():
    tree = mini_tree()
    tree.nodes["2.1"].format_text = "struct A {\n    UINT8 x;\n}\n"
    with pytest.raises(ExtractionError):
        merge_formats(tree, Scripted(lambda t, b, n: "FORMAT:\nstruct {\nSUMMARY:\nx\n"), max_retries=1)


def test_replayed_extraction_of_bundle():
    doc = load_rfc([RFC])
    gw = Gateway("replay", BUNDLE / "fixtures.jsonl")
    tree, spec, index = run_extraction(build_initial_tree(doc.toc, doc.sections), gw)
    assert spec.entry == "TLV"
    assert [s.name for s in spec.structs] == ["TLV", "Pad1", "RouterIdTLV"]
    assert tree.parent_of("4.4") == "4.2"  # moved by the hierarchy step
    assert tree.nodes["4.1"].summary  # blank first answer was retried
    assert tree.nodes["4.4.7"].extraction["attempts"] == 2  # missing semicolon repaired
    assert trace(index, tree, "RouterIdTLV", "RouterIdTLV.RouterId_ne_0")[0] == "4.4.7"
    assert index.lookup("Pad1") == "4.4.1"
    assert index.lookup("TLV") == "4.4"
