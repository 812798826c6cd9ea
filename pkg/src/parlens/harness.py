"""Run target parsers on test cases and compare verdicts with expectations.

Each case gets a fresh process.  The verdict is ``crash`` when the process
dies from a signal or overruns its timeout; otherwise it is decided by
the exit code (0 accepts) or by marker text in the output.
"""

from __future__ import annotations

import json
import os
import shlex
import signal
import subprocess
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .testgen import TestCase

DEFAULT_TIMEOUT = 5.0
OUTPUT_HEAD = 512

PARSER_ACCEPTS_INVALID = "parser-accepts-invalid"
PARSER_REJECTS_VALID = "parser-rejects-valid"
CRASH = "crash"


class HarnessConfigError(RuntimeError):
    """The target cannot be started; not a property of the parser under test."""


@dataclass(frozen=True)
class ParserTarget:
    command: tuple[str, ...]
    input_mode: str = "stdin"  # stdin | file
    success: str = "exit-code"  # exit-code | marker
    accept_marker: Optional[str] = None
    reject_marker: Optional[str] = None
    timeout: float = DEFAULT_TIMEOUT
    name: str = ""

    def __post_init__(self):
        if self.input_mode not in ("stdin", "file"):
            raise HarnessConfigError(f"input_mode must be stdin or file, not {self.input_mode!r}")
        if self.success not in ("exit-code", "marker"):
            raise HarnessConfigError(f"success must be exit-code or marker, not {self.success!r}")
        if self.success == "marker" and not (self.accept_marker or self.reject_marker):
            raise HarnessConfigError("marker success convention needs accept_marker or reject_marker")
        if self.timeout <= 0:
            raise HarnessConfigError("timeout must be positive")
        if self.input_mode == "file" and not any("{input}" in a for a in self.command):
            raise HarnessConfigError("file input mode needs an {input} placeholder in the arguments")

    @classmethod
    def from_config(cls, block: dict) -> "ParserTarget":
        known = {"command", "args", "input_mode", "success", "timeout_ms", "accept_marker", "reject_marker", "name"}
        unknown = set(block) - known
        if unknown:
            raise HarnessConfigError(f"unknown target key(s): {', '.join(sorted(unknown))}")
        if "command" not in block:
            raise HarnessConfigError("target needs a command")
        command = block["command"]
        argv = shlex.split(command) if isinstance(command, str) else [str(a) for a in command]
        argv = [sys.executable if a == "{python}" else a for a in argv]
        argv += [str(a) for a in block.get("args", [])]
        return cls(
            tuple(argv),
            block.get("input_mode", "stdin"),
            block.get("success", "exit-code"),
            block.get("accept_marker"),
            block.get("reject_marker"),
            block.get("timeout_ms", DEFAULT_TIMEOUT * 1000) / 1000.0,
            block.get("name", ""),
        )

    def repro_command(self, packet_file: str) -> str:
        if self.input_mode == "file":
            return shlex.join(a.replace("{input}", packet_file) for a in self.command)
        return f"{shlex.join(self.command)} < {shlex.quote(packet_file)}"


@dataclass(frozen=True)
class Verdict:
    kind: str  # pass | fail | crash
    returncode: Optional[int] = None
    signal: Optional[int] = None
    timed_out: bool = False
    output_head: str = ""

    def evidence(self) -> str:
        if self.timed_out:
            return "timeout"
        if self.signal is not None:
            try:
                name = signal.Signals(self.signal).name
            except ValueError:
                name = str(self.signal)
            return f"signal {name}"
        return f"exit {self.returncode}"

    def to_json(self) -> dict:
        return {
            "verdict": self.kind,
            "returncode": self.returncode,
            "signal": self.signal,
            "timed_out": self.timed_out,
            "evidence": self.evidence(),
            "output_head": self.output_head,
        }


@dataclass(frozen=True)
class RunRecord:
    case_id: str
    expectation: str
    verdict: Verdict
    wall_time: float = field(default=0.0, compare=False)

    @property
    def consistent(self) -> bool:
        return self.verdict.kind != CRASH and self.verdict.kind == self.expectation

    def to_json(self) -> dict:
        # Wall time is left out so that records are reproducible byte for byte.
        return {"case": self.case_id, "expectation": self.expectation, **self.verdict.to_json()}

    @classmethod
    def from_json(cls, obj: dict) -> "RunRecord":
        v = Verdict(obj["verdict"], obj.get("returncode"), obj.get("signal"), obj.get("timed_out", False), obj.get("output_head", ""))
        return cls(obj["case"], obj["expectation"], v)


@dataclass(frozen=True)
class Inconsistency:
    case: TestCase
    record: RunRecord
    direction: str  # parser-accepts-invalid | parser-rejects-valid | crash

    @property
    def case_id(self) -> str:
        return self.case.id

    @property
    def property_id(self) -> Optional[str]:
        return None if self.case.mutation == "none" else self.case.property_id

    @property
    def section(self) -> Optional[str]:
        return self.case.section

    def to_json(self) -> dict:
        return {
            "case": self.case.id,
            "direction": self.direction,
            "property": self.property_id,
            "section": self.section,
            "evidence": self.record.verdict.evidence(),
        }


def _kill_group(proc: subprocess.Popen):
    try:
        os.killpg(proc.pid, signal.SIGKILL)
    except (ProcessLookupError, PermissionError):
        proc.kill()


def _decide(target: ParserTarget, returncode: int, output: str) -> str:
    if target.success == "exit-code":
        return "pass" if returncode == 0 else "fail"
    if target.accept_marker and target.accept_marker in output:
        return "pass"
    if target.reject_marker and target.reject_marker in output:
        return "fail"
    return "fail" if target.accept_marker else "pass"


def run_packet(target: ParserTarget, data: bytes) -> Verdict:
    """Deliver ``data`` to a fresh parser process and classify the outcome."""
    tmp = None
    argv = list(target.command)
    stdin_data = data
    try:
        if target.input_mode == "file":
            fd, tmp = tempfile.mkstemp(suffix=".bin", prefix="parlens-")
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            argv = [a.replace("{input}", tmp) for a in argv]
            stdin_data = b""
        try:
            proc = subprocess.Popen(
                argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                start_new_session=True,
            )
        except OSError as exc:
            raise HarnessConfigError(f"cannot start {argv[0]!r}: {exc}") from exc
        try:
            out, err = proc.communicate(stdin_data, timeout=target.timeout)
        except subprocess.TimeoutExpired:
            _kill_group(proc)
            out, err = proc.communicate()
            head = (out + err)[:OUTPUT_HEAD].decode("utf-8", "replace")
            return Verdict(CRASH, proc.returncode, None, True, head)
        head = (out + err)[:OUTPUT_HEAD].decode("utf-8", "replace")
        if proc.returncode < 0:
            return Verdict(CRASH, proc.returncode, -proc.returncode, False, head)
        kind = _decide(target, proc.returncode, (out + err).decode("utf-8", "replace"))
        return Verdict(kind, proc.returncode, None, False, head)
    finally:
        if tmp is not None:
            os.unlink(tmp)


def run_case(target: ParserTarget, case: TestCase) -> RunRecord:
    start = time.monotonic()
    verdict = run_packet(target, case.data)
    return RunRecord(case.id, case.expectation, verdict, time.monotonic() - start)


def classify(case: TestCase, record: RunRecord) -> Optional[Inconsistency]:
    kind = record.verdict.kind
    if kind == CRASH:
        return Inconsistency(case, record, CRASH)
    if case.expectation == "pass" and kind == "fail":
        return Inconsistency(case, record, PARSER_REJECTS_VALID)
    if case.expectation == "fail" and kind == "pass":
        return Inconsistency(case, record, PARSER_ACCEPTS_INVALID)
    return None


@dataclass
class SuiteResult:
    records: list[RunRecord]
    inconsistencies: list[Inconsistency]

    def counts(self) -> dict[str, int]:
        out = {"cases": len(self.records), "inconsistencies": len(self.inconsistencies)}
        for d in (PARSER_ACCEPTS_INVALID, PARSER_REJECTS_VALID, CRASH):
            out[d] = sum(i.direction == d for i in self.inconsistencies)
        return out


def run_suite(
    target: ParserTarget,
    cases: Sequence[TestCase],
    *,
    workers: Optional[int] = None,
) -> SuiteResult:
    """Run every case (in parallel) and report records sorted by case id."""
    workers = workers or os.cpu_count() or 1
    errors: list[str] = []

    def one(case: TestCase) -> Optional[RunRecord]:
        try:
            return run_case(target, case)
        except HarnessConfigError as exc:
            errors.append(f"{case.id}: {exc}")
            return None

    ordered = sorted(cases, key=lambda c: c.id)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        records = list(pool.map(one, ordered))
    if errors:
        raise HarnessConfigError(f"{len(errors)} case(s) could not be started; first: {errors[0]}")
    inconsistencies = []
    for case, rec in zip(ordered, records):
        inc = classify(case, rec)
        if inc is not None:
            inconsistencies.append(inc)
    return SuiteResult(list(records), inconsistencies)


def write_records(path: str | Path, records: Iterable[RunRecord], timings: Optional[str | Path] = None) -> Path:
    p = Path(path)
    records = list(records)
    with p.open("w") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_json(), sort_keys=True) + "\n")
    if timings is not None:
        Path(timings).write_text(
            json.dumps({r.case_id: round(r.wall_time, 6) for r in records}, indent=2, sort_keys=True) + "\n"
        )
    return p


def read_records(path: str | Path) -> list[RunRecord]:
    return [RunRecord.from_json(json.loads(l)) for l in Path(path).read_text().splitlines() if l.strip()]
