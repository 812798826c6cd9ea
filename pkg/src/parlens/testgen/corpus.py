"""On-disk corpus: one ``.bin`` per case plus ``manifest.json``."""

from __future__ import annotations

import json
from pathlib import Path

from .generate import Corpus, TestCase

MANIFEST = "manifest.json"


def write_corpus(directory: str | Path, corpus: Corpus) -> Path:
    """Write ``corpus`` to ``directory``, replacing any previous corpus there."""
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    for stale in root.glob("*.bin"):
        stale.unlink()
    ordered = sorted(corpus.cases, key=lambda c: c.id)
    ids = [c.id for c in ordered]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate test case ids in corpus")
    for case in ordered:
        (root / f"{case.id}.bin").write_bytes(case.data)
    manifest = {
        "summary": corpus.summary(),
        "cases": [c.to_json() for c in ordered],
        "skipped": [s.to_json() for s in corpus.skips],
    }
    path = root / MANIFEST
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def load_corpus(directory: str | Path) -> list[TestCase]:
    """Cases listed in the manifest, with bytes read from their ``.bin`` files."""
    root = Path(directory)
    manifest_path = root / MANIFEST
    if not manifest_path.is_file():
        raise FileNotFoundError(f"no corpus manifest at {manifest_path}")
    manifest = json.loads(manifest_path.read_text())
    cases = []
    for entry in manifest["cases"]:
        data = (root / entry["file"]).read_bytes()
        cases.append(TestCase.from_json(entry, data))
    return cases
