"""End-to-end acceptance checks.

Each test carries a ``criterion`` marker; the terminal summary prints one
PASS/FAIL line per criterion.
"""

from __future__ import annotations

import filecmp
import itertools
import json
import random
import sys
import time
from pathlib import Path

import pytest
from hypothesis import HealthCheck, given, settings

from parlens import pipeline
from parlens.doctree import DocTree, TraceIndex, build_initial_tree, load_rfc, run_extraction
from parlens.format import parse_format, print_format
from parlens.format.evaluator import evaluate_packet
from parlens.format.naming import constraint_ids
from parlens.graph import build_graph, choice_points, enumerate_paths
from parlens.harness import CRASH, PARSER_ACCEPTS_INVALID, ParserTarget, run_suite
from parlens.llm import Gateway
from parlens.testgen import generate_corpus, generate_positive, load_corpus, mutate_field_level, path_to_formula, serialize_packet
from parlens.triage import IMPLEMENTATION_ERROR, diagnose

from conftest import BABEL, BUNDLE, bundle_config
from specgen import random_spec, specs

ROUTER_ID_ZERO = "p0001__neg__RouterIdTLV.RouterId_ne_0@Payload"
ROUTER_ID_ONES = "p0001__neg__RouterIdTLV.RouterId_ne_0xFFFFFFFFFFFFFFFF@Payload"
RESERVED = "RouterIdTLV.Reserved_eq_0"

# The formula for the RouterIdTLV path, conjunct by conjunct.
GOLDEN_FORMULA = (
    "0 <= Type <= 2^8-1",
    "Type == 6",
    "0 <= Payload.Length <= 2^8-1",
    "Payload.Length >= 10",
    "0 <= Payload.Reserved <= 2^16-1",
    "Payload.Reserved == 0",
    "0 <= Payload.RouterId <= 2^64-1",
    "Payload.RouterId != 0",
    "Payload.RouterId != 0xFFFFFFFFFFFFFFFF",
)


def ref(variant: str) -> ParserTarget:
    return ParserTarget((sys.executable, "-m", "parlens.refparsers", variant))


def replay_gateway() -> Gateway:
    return Gateway("replay", BUNDLE / "fixtures.jsonl")


@pytest.fixture(scope="module")
def extracted():
    doc = load_rfc([BUNDLE / "rfc-babel-mini.txt"])
    return run_extraction(build_initial_tree(doc.toc, doc.sections), replay_gateway())


# -- 1 ------------------------------------------------------------------------


@pytest.mark.criterion(1, "golden worked example")
def test_golden_worked_example(extracted):
    start = time.perf_counter()
    tree, spec, index = extracted
    assert print_format(spec) == print_format(parse_format(BABEL))

    path = enumerate_paths(build_graph(spec))[1]
    formula = path_to_formula(path)
    assert formula.render() == " && ".join(GOLDEN_FORMULA)

    positive, base, _ = generate_positive(formula)
    assert base == {"Type": 6, "Payload.Length": 10, "Payload.Reserved": 0, "Payload.RouterId": 1}
    assert formula.holds(base)

    length_neg, _ = mutate_field_level(formula, base, "RouterIdTLV.Length_ge_10@Payload")
    assert length_neg.data == serialize_packet(path, dict(base, **{"Payload.Length": 0}))
    zero_neg, _ = mutate_field_level(formula, base, "RouterIdTLV.RouterId_ne_0@Payload")
    assert zero_neg.data == serialize_packet(path, dict(base, **{"Payload.RouterId": 0}))

    corpus = generate_corpus(spec, section_of=index.section_for)
    result = run_suite(ref("omitting"), corpus.cases)
    incs = sorted(result.inconsistencies, key=lambda i: i.case_id)
    assert [i.case_id for i in incs] == [ROUTER_ID_ZERO, ROUTER_ID_ONES]
    assert all(i.direction == PARSER_ACCEPTS_INVALID for i in incs)

    gw = replay_gateway()
    diags = [diagnose(inc, tree, index, gw, spec) for inc in incs]
    assert [d.classification for d in diags] == [IMPLEMENTATION_ERROR, IMPLEMENTATION_ERROR]
    assert {d.section_id for d in diags} == {"4.4.7"}
    assert time.perf_counter() - start < 10


# -- 2 ------------------------------------------------------------------------

BRUTE_FORCE_SEEDS = range(20)


def _path_solutions(path) -> set[bytes]:
    formula = path_to_formula(path)
    names = [name for name, _ in formula.variables]
    out = set()
    for values in itertools.product(*(range(1 << bits) for _, bits in formula.variables)):
        assignment = dict(zip(names, values))
        if formula.holds(assignment):
            out.add(serialize_packet(path, assignment))
    return out


@pytest.mark.criterion(2, "brute-force oracle equivalence")
def test_brute_force_oracle_equivalence():
    start = time.perf_counter()
    rng = random.Random(0)
    for seed in BRUTE_FORCE_SEEDS:
        spec = random_spec(random.Random(seed), small=True)
        graph = build_graph(spec, (0, 1))
        paths = enumerate_paths(graph)
        max_bits = max(p.bit_length for p in paths)
        assert len(choice_points(graph)) <= 3
        assert max_bits <= 16

        from_paths: set[bytes] = set()
        for p in paths:
            from_paths |= _path_solutions(p)
        accepted = {
            bytes(bs)
            for n in range(max_bits // 8 + 1)
            for bs in itertools.product(range(256), repeat=n)
            if evaluate_packet(spec, bytes(bs)).passed
        }
        assert accepted == from_paths, f"seed {seed}"
        # Nothing longer than the longest path can be accepted.
        longer = max_bits // 8 + 1
        for _ in range(200):
            assert not evaluate_packet(spec, rng.randbytes(longer + rng.randrange(2))).passed
    assert time.perf_counter() - start < 60


# -- 3 ------------------------------------------------------------------------


@pytest.mark.criterion(3, "generator soundness")
def test_generator_soundness():
    start = time.perf_counter()
    checked = {"none": 0, "field": 0, "structural": 0}
    seed = 0
    while sum(checked.values()) < 1000:
        spec = random_spec(random.Random(seed))
        seed += 1
        for case in generate_corpus(spec, array_counts=(0, 1, 2), timeout=1).cases:
            verdict = evaluate_packet(spec, case.data)
            if case.mutation == "none":
                assert verdict.passed, case.id
            elif case.mutation == "field":
                assert not verdict.passed, case.id
                assert verdict.violation.property == case.property_id, case.id
            else:
                assert not verdict.passed, case.id
            checked[case.mutation] += 1
    assert all(checked.values()), checked
    assert time.perf_counter() - start < 60


# -- 4 ------------------------------------------------------------------------


def _tree_equal(a: Path, b: Path) -> bool:
    cmp = filecmp.dircmp(a, b)
    if cmp.left_only or cmp.right_only or cmp.funny_files:
        return False
    _, mismatch, errors = filecmp.cmpfiles(a, b, cmp.common_files, shallow=False)
    return not mismatch and not errors and all(_tree_equal(a / d, b / d) for d in cmp.common_dirs)


@pytest.mark.criterion(4, "replay determinism")
def test_replay_runs_are_byte_identical(tmp_path):
    outs = []
    for run in ("first", "second"):
        cfg = bundle_config(tmp_path / run)
        pipeline.stage_extract(cfg, replay_gateway())
        pipeline.stage_graph(cfg)
        pipeline.stage_gen(cfg)
        pipeline.stage_run(cfg)
        pipeline.stage_triage(cfg, replay_gateway())
        assert pipeline.stage_report(cfg)
        outs.append(cfg.workdir)
    a, b = outs
    for name in ("doctree.json", "format.pform", "trace.json", "runrecords.jsonl", "diagnoses.jsonl"):
        assert (a / name).read_bytes() == (b / name).read_bytes(), name
    for name in ("corpus", "reports"):
        assert _tree_equal(a / name, b / name), name


# -- 5 ------------------------------------------------------------------------


@pytest.mark.criterion(5, "DSL round trip")
@settings(max_examples=500, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(specs())
def test_dsl_round_trip(spec):
    assert parse_format(print_format(spec)) == spec


# -- 6 ------------------------------------------------------------------------


@pytest.mark.criterion(6, "harness verdict mapping")
def test_harness_verdict_mapping(extracted):
    tree, spec, index = extracted
    cases = generate_corpus(spec, section_of=index.section_for).cases
    assert run_suite(ref("correct"), cases).inconsistencies == []
    omitting = run_suite(ref("omitting"), cases).inconsistencies
    assert any(i.direction == PARSER_ACCEPTS_INVALID for i in omitting)
    crashes = [i for i in run_suite(ref("crashing"), cases).inconsistencies if i.direction == CRASH]
    assert crashes

    gw = replay_gateway()
    for inc in crashes:
        assert diagnose(inc, tree, index, gw, spec).classification == IMPLEMENTATION_ERROR
    assert gw.exchanges == []


# -- 7 ------------------------------------------------------------------------


@pytest.mark.criterion(7, "traceability totality")
def test_traceability_totality(tmp_path):
    cfg = bundle_config(tmp_path)
    pipeline.stage_extract(cfg, replay_gateway())
    spec = parse_format(cfg.format_file.read_text())
    tree = DocTree.load(cfg.workdir / "doctree.json")
    index = TraceIndex.load(cfg.workdir / "trace.json")
    traced = 0
    for struct in spec.structs:
        for pid in ["", *constraint_ids(struct)]:
            section = index.lookup(struct.name, pid)
            assert tree.node(section).content.strip(), (struct.name, pid)
            traced += 1
    assert traced == len(spec.structs) + sum(len(s.constraints) for s in spec.structs)
    for pid in ("RouterIdTLV.RouterId_ne_0", "RouterIdTLV.RouterId_ne_0xFFFFFFFFFFFFFFFF"):
        assert index.lookup("RouterIdTLV", pid) == "4.4.7"
    assert "MUST NOT consist of all zeroes or all ones" in tree.node("4.4.7").content


# -- 8 ------------------------------------------------------------------------


@pytest.mark.criterion(8, "refinement loop")
def test_refinement_loop(tmp_path):
    cfg = bundle_config(tmp_path, "reserved-lenient")
    pipeline.stage_extract(cfg, replay_gateway())
    pipeline.stage_gen(cfg)
    first = pipeline.stage_run(cfg)
    assert [i.property_id for i in first.inconsistencies] == [f"{RESERVED}@Payload"]

    out = pipeline.stage_triage(cfg, replay_gateway())
    assert [(e.property_id, e.action) for e in out.audit] == [(RESERVED, "remove")]
    assert out.fixed_point and out.cycles <= 3

    before = parse_format(cfg.format_file.read_text())
    after = parse_format((cfg.workdir / "format.refined.pform").read_text())
    ids_before = {(s.name, pid) for s in before.structs for pid in constraint_ids(s)}
    ids_after = {(s.name, pid) for s in after.structs for pid in constraint_ids(s)}
    assert ids_before - ids_after == {("RouterIdTLV", RESERVED)}
    assert ids_after < ids_before

    old = {c.id: c for c in load_corpus(cfg.workdir / "corpus")}
    new = {c.id: c for c in load_corpus(cfg.workdir / "corpus.refined")}
    dropped = set(old) - set(new)
    assert dropped == {c for c, case in old.items() if case.property_id and case.base_property == RESERVED}
    assert dropped == {f"p0001__neg__{RESERVED}@Payload"}
    assert set(new) < set(old)
    assert all(new[c].data == old[c].data for c in new)

    summary = json.loads((cfg.workdir / "triage.json").read_text())
    assert summary["implementation_errors"] == [] and summary["refinements"] == 1
