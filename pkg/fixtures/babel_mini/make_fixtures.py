"""Regenerate ``fixtures.jsonl`` for the Babel-mini bundle.

A scripted stand-in for the model answers every prompt the pipeline asks
while running in record mode, so the bundle can be rebuilt offline and
byte for byte.  The script runs extraction once and then triage against
every reference parser variant, so that all diagnosis prompts the tests
need are on file.

Some answers are deliberately imperfect to exercise the recovery paths:
the first summary of section 4.1 is blank, the first Router-Id format
misses a semicolon, and the first diagnosis of the all-ones router id has
no verdict line.

Usage: python fixtures/babel_mini/make_fixtures.py
"""

from __future__ import annotations

import json
import re
import tempfile
from collections import Counter
from dataclasses import replace
from pathlib import Path

import httpx

from parlens import pipeline
from parlens.config import load_config
from parlens.llm import Gateway

HERE = Path(__file__).resolve().parent
FIXTURES = HERE / "fixtures.jsonl"
VARIANTS = ("omitting", "reserved-lenient", "crashing", "correct", "accept-all")

SUMMARIES = {
    "0": "Excerpt of the Babel specification covering the introduction and the encoding of Pad1 and Router-Id TLVs.",
    "1": "Introduces Babel, a loop-avoiding distance-vector routing protocol.",
    "4": "Babel packets are carried in UDP datagrams sent with hop count 1.",
    "4.1": "Integers are big-endian and a router-id is an 8-octet value.",
    "4.2": "A packet is a 4-octet header followed by a sequence of TLVs described in section 4.4.",
    "4.4": "All TLVs except Pad1 start with a 1-octet Type and a 1-octet Length followed by the payload.",
    "4.4.1": "Pad1 is a single octet of Type 0 that is ignored on reception.",
    "4.4.7": (
        "The Router-Id TLV (Type 6) has a Length of at least 10, a 2-octet Reserved field sent as 0, "
        "and an 8-octet Router-Id that must not be all zeroes or all ones."
    ),
}

FORMATS = {
    "1": "NO_FORMAT",
    "4": "NO_FORMAT",
    "4.1": "NO_FORMAT",
    "4.2": "NO_FORMAT",
    "4.4": "struct TLV {\n    UINT8 Type;\n}",
    "4.4.1": "struct Pad1 { }",
    "4.4.7": """```
struct RouterIdTLV {
    UINT8 Length;
    Length >= 10;
    UINT16 Reserved;
    Reserved == 0;
    UINT64 RouterId
    RouterId != 0;
    RouterId != 0xFFFFFFFFFFFFFFFF;
}
```""",
}

REPAIRED = {
    "4.4.7": """struct RouterIdTLV {
    UINT8 Length;
    Length >= 10;
    UINT16 Reserved;
    Reserved == 0;
    UINT64 RouterId;
    RouterId != 0;
    RouterId != 0xFFFFFFFFFFFFFFFF;
}""",
}

MERGED = """struct TLV {
    UINT8 Type;
    switch (Type) {
        case 0: Pad1;
        case 6: RouterIdTLV;
    } Payload;
}
struct Pad1 { }
struct RouterIdTLV {
    UINT8 Length;
    Length >= 10;
    UINT16 Reserved;
    Reserved == 0;
    UINT64 RouterId;
    RouterId != 0;
    RouterId != 0xFFFFFFFFFFFFFFFF;
}"""

MERGE_SOURCES = {
    # merged section -> section each struct is claimed from
    "4.4": {"TLV": "4.4", "Pad1": "4.4.1", "RouterIdTLV": "4.4.7"},
    "4.2": {"TLV": "4.4", "Pad1": "4.4", "RouterIdTLV": "4.4"},
    "4": {"TLV": "4.2", "Pad1": "4.2", "RouterIdTLV": "4.2"},
    "0": {"TLV": "4", "Pad1": "4", "RouterIdTLV": "4"},
}


def merge_answer(sid: str) -> str:
    trace = "\n".join(f"{name} <- {src}" for name, src in MERGE_SOURCES[sid].items())
    summary = SUMMARIES[sid] + " Its TLVs are dispatched on Type: 0 is Pad1 and 6 is Router-Id."
    return f"FORMAT:\n{MERGED}\nSUMMARY:\n{summary}\nTRACE:\n{trace}\n"


ROUTER_ID_BUG = """\
The packet carries a Router-Id of {value}.  Section 4.4.7 states that the
router-id "MUST NOT consist of all zeroes or all ones", so such a packet is
invalid and the format property matches the section.  The parser accepting
it is a bug in the implementation instead of the extracted format.
EVIDENCE: This MUST NOT consist of all zeroes or all ones.
CORRECTION: none
VERDICT: myformat"""

RESERVED_FORMAT_ERROR = """\
The section says the Reserved field is "Sent as 0 and MUST be ignored on
reception".  A receiver therefore has to accept any Reserved value; the
property Reserved == 0 only binds senders and must not be used to judge
received packets.  The parser is right to accept the packet.
EVIDENCE: Reserved  Sent as 0 and MUST be ignored on reception.
CORRECTION: REMOVE
VERDICT: parser"""

GENERIC_BUG = """\
The section defines the layout that the format encodes, and the packet
violates it.  The parser should have rejected the packet.
EVIDENCE: {quote}
CORRECTION: none
VERDICT: myformat"""


def _section_of_prompt(prompt: str) -> str:
    return re.search(r"Section (\S+?)(?: \(|\n)", prompt).group(1)


class ScriptedModel:
    """httpx handler answering chat-completion requests from the tables above."""

    def __init__(self):
        self.seen: Counter = Counter()

    def __call__(self, request: httpx.Request) -> httpx.Response:
        prompt = json.loads(request.content)["messages"][0]["content"]
        self.seen[prompt] += 1
        text = self.answer(prompt, self.seen[prompt])
        usage = {"prompt_tokens": len(prompt.split()), "completion_tokens": len(text.split())}
        return httpx.Response(200, json={"choices": [{"message": {"content": text}}], "usage": usage})

    def answer(self, prompt: str, n: int) -> str:
        if prompt.startswith("Task: Please summarize"):
            sid = _section_of_prompt(prompt)
            return "" if sid == "4.1" and n == 1 else SUMMARIES[sid]
        if prompt.startswith("Task: Analyze the hierarchical"):
            if "Section 4.2 (" in prompt and "Section 4.4 (" in prompt:
                return "Section 4.2 is the parent of Section 4.4: the TLVs it lists are the packet body of 4.2."
            return "NONE"
        if prompt.startswith("Task: Write the packet format"):
            return FORMATS[re.search(r"RFC section (\S+) in", prompt).group(1)]
        if prompt.startswith("Task: The format below"):
            return REPAIRED[re.search(r"RFC section (\S+?), is rejected", prompt).group(1)]
        if prompt.startswith("Task: Merge multiple"):
            return merge_answer(re.search(r"Current section: Section (\S+)", prompt).group(1))
        m = re.match(r"Task: (.*) is allowed by (\w+) but not by (\w+)\.", prompt)
        if m:
            what = m.group(1)
            if what.startswith("Reserved ="):
                return RESERVED_FORMAT_ERROR
            if what.startswith("RouterId ="):
                value = what.split("=", 1)[1].strip()
                if value.startswith("0xffff") and n == 1:
                    return "The router-id is all ones, which the section forbids."  # no verdict line
                return ROUTER_ID_BUG.format(value=value)
            quote = "The Length of this TLV is at least 10." if "Length" in what else "With the exception of Pad1"
            return GENERIC_BUG.format(quote=quote)
        raise ValueError(f"no scripted answer for prompt starting {prompt[:60]!r}")


def main() -> None:
    FIXTURES.unlink(missing_ok=True)
    model = ScriptedModel()
    gateway = Gateway(
        "record",
        FIXTURES,
        api_key="offline",
        base_url="https://scripted.invalid/v1",
        transport=httpx.MockTransport(model),
    )
    with tempfile.TemporaryDirectory() as tmp:
        cfg = replace(load_config(HERE / "config.yaml"), workdir=Path(tmp))
        pipeline.stage_extract(cfg, gateway)
        pipeline.stage_gen(cfg)
        for variant in VARIANTS:
            cfg.target = dict(cfg.target, command=f"{{python}} -m parlens.refparsers {variant}")
            pipeline.stage_run(cfg)
            pipeline.stage_triage(cfg, gateway)
    gateway.close()
    print(f"{len(gateway.exchanges)} exchanges recorded in {FIXTURES}")


if __name__ == "__main__":
    main()
