"""Prompt templates.

Placeholders use :class:`string.Template` syntax (``${Name}``) so that
braces in format sources and RFC text never need escaping.  Each template
opens with the task wording and then pins down an answer layout that the
calling module parses mechanically.
"""

from __future__ import annotations

from dataclasses import dataclass
from string import Template

DSL_CARD_VERSION = "parlens-dsl-card/1"

DSL_CARD = """\
Format language reference (version parlens-dsl-card/1)

A format is a list of structs.  The first struct is the packet root
unless a line `entry Name;` names another one.

  struct Name {
      Type field;          // a field
      expression op expr;  // a constraint on earlier fields of this struct
  }

Types:
  UINT8 UINT16 UINT32 UINT64   unsigned big-endian integers
  BIT(n)                       n-bit unsigned integer, 1 <= n <= 63, packed
                               most significant bit first; consecutive BIT
                               fields must add up to whole bytes
  OtherStruct                  a nested struct
  T name[len]                  an array; len is a number or an arithmetic
                               expression over earlier integer fields of the
                               same struct.  Write `[len bytes]` or
                               `[len elements]` to say how len is measured;
                               struct arrays default to bytes, others to
                               elements
  switch (Field) { case 0: T0; case 6: T6; default: T; } name;
                               the layout of `name` is chosen by the value
                               of an earlier integer field

Constraints use + - * / (integer division) over field names and numbers,
compared with >= <= > < == !=.  Numbers may be decimal or 0x-hex.

Example:
  struct TLV { UINT8 Type; switch (Type) { case 0: Pad1; case 6: RouterIdTLV; } Payload; }
  struct Pad1 { }
  struct RouterIdTLV { UINT8 Length; Length >= 10; UINT16 Reserved; UINT64 RouterId; RouterId != 0; }
"""

NO_FORMAT = "NO_FORMAT"


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    text: str

    @property
    def placeholders(self) -> set[str]:
        found = set()
        for match in Template.pattern.finditer(self.text):
            name = match.group("named") or match.group("braced")
            if name:
                found.add(name)
        return found

    def render(self, bindings: dict[str, str]) -> str:
        missing = sorted(self.placeholders - set(bindings))
        if missing:
            raise KeyError(f"template {self.name!r} has unbound placeholder(s): {', '.join(missing)}")
        return Template(self.text).substitute({k: str(v) for k, v in bindings.items()})


SUMMARIZE = PromptTemplate(
    "summarize",
    """\
Task: Please summarize a given RFC section: ${Section}

Answer with a plain-text summary of at most three sentences.  Mention the
packet structures, fields and value restrictions the section defines, if any.
""",
)

HIERARCHY = PromptTemplate(
    "hierarchy",
    """\
Task: Analyze the hierarchical structure of the following sections in an RFC document: ${Summaries}
Instructions:
Identify Parent-Child relationships where one section provides a detailed breakdown of another.

Answer with one line per relationship, written as `<parent id> parent of <child id>`,
using only the section ids listed above.  Answer NONE if there is no such relationship.
""",
)

GENERATE_FORMAT = PromptTemplate(
    "generate_format",
    """\
Task: Write the packet format defined by RFC section ${SectionId} in the format language below.

${DSL}
RFC section ${SectionId}:
${Section}

Answer with the format source only.  If the section defines no packet layout,
answer ${NoFormat}.
""",
)

REFINE_SYNTAX = PromptTemplate(
    "refine_syntax",
    """\
Task: The format below, written for RFC section ${SectionId}, is rejected by the syntax checker.
Correct it so that it is valid in the format language and still describes the section.

${DSL}
RFC section ${SectionId}:
${Section}

Rejected format:
${Format}

Checker diagnostics:
${Diagnostics}

Answer with the corrected format source only, or ${NoFormat} if the section defines no packet layout.
""",
)

MERGE = PromptTemplate(
    "merge",
    """\
Task: Merge multiple protocol formats into a single comprehensive format.
Current section: ${Section};
Current format: ${Format};
Summaries and formats of child nodes: ${Children}.

${DSL}
Answer in three parts:
FORMAT:
<the merged format source, or ${NoFormat}>
SUMMARY:
<an updated summary of the current section>
TRACE:
<one line per struct of the merged format: `<struct name> <- <section id>`, naming the
child section the struct comes from, or the current section if it is new>
""",
)

DIAGNOSE = PromptTemplate(
    "diagnose",
    """\
Task: ${Constraint} is allowed by ${Allowed} but not by ${Rejected}. According to the RFC section: ${Section}, identify whether myformat or parser is correct, and provide evidence from the RFC section.

Here `myformat` is the following format property extracted from the RFC: ${Property}

Explain your reasoning step by step first.  Then finish with exactly these lines:
EVIDENCE: <a quote from the RFC section>
CORRECTION: <only if parser is correct: a replacement constraint in the format language, or REMOVE>
VERDICT: myformat|parser
""",
)

TEMPLATES: dict[str, PromptTemplate] = {
    t.name: t for t in (SUMMARIZE, HIERARCHY, GENERATE_FORMAT, REFINE_SYNTAX, MERGE, DIAGNOSE)
}


def get_template(name: str) -> PromptTemplate:
    try:
        return TEMPLATES[name]
    except KeyError:
        raise KeyError(f"unknown prompt template {name!r}") from None
