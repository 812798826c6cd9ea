"""Chat-completion client with deterministic record/replay fixtures.

``replay`` serves responses from a JSONL fixture file keyed by the hash
of the rendered prompt and never touches the network.  ``live`` talks to
an OpenAI-compatible ``/chat/completions`` endpoint.  ``record`` does a
live call and appends the exchange to the fixture file.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import httpx

from .templates import get_template

log = logging.getLogger(__name__)

API_KEY_ENV = "PARLENS_API_KEY"
DECODING_PARAMS = {"temperature": 0, "n": 1}
MODES = ("live", "replay", "record")


class GatewayError(RuntimeError):
    pass


class MissingFixtureError(GatewayError):
    def __init__(self, digest: str, template: str):
        self.digest = digest
        self.template = template
        super().__init__(f"no fixture for {template} prompt with hash {digest}")


def prompt_hash(prompt: str, params: Optional[dict] = None) -> str:
    payload = json.dumps({"prompt": prompt, "params": params or DECODING_PARAMS}, sort_keys=True)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass
class Exchange:
    template: str
    prompt: str
    response: str
    hash: str
    params: dict = field(default_factory=lambda: dict(DECODING_PARAMS))
    latency: float = 0.0
    prompt_tokens: int = 0
    completion_tokens: int = 0

    def fixture_record(self) -> dict:
        return {"hash": self.hash, "template": self.template, "prompt": self.prompt, "response": self.response}


def load_fixtures(path: str | Path) -> dict[str, list[str]]:
    """hash -> responses in file order."""
    table: dict[str, list[str]] = defaultdict(list)
    p = Path(path)
    if not p.exists():
        return {}
    with p.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                table[rec["hash"]].append(rec["response"])
            except (json.JSONDecodeError, KeyError) as exc:
                raise GatewayError(f"{p}:{lineno}: malformed fixture record ({exc})") from None
    return dict(table)


def record_fixtures(exchanges: list[Exchange], path: str | Path) -> Path:
    """Write a session's exchanges as a replayable JSONL fixture file."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with p.open("w", encoding="utf-8") as fh:
        for ex in exchanges:
            fh.write(json.dumps(ex.fixture_record(), sort_keys=True) + "\n")
    return p


class Gateway:
    """Single entry point for every model interaction.

    In replay mode the same prompt may be recorded several times (for
    instance a blank answer followed by a valid one); successive requests
    walk through the recorded answers and then keep returning the last.
    """

    def __init__(
        self,
        mode: str = "replay",
        fixtures_path: Optional[str | Path] = None,
        *,
        model: str = "gpt-4o",
        base_url: str = "https://api.openai.com/v1",
        api_key: Optional[str] = None,
        transport: Optional[httpx.BaseTransport] = None,
        attempts: int = 3,
        backoff: float = 1.0,
        request_timeout: float = 120.0,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if mode not in MODES:
            raise ValueError(f"unknown gateway mode {mode!r}; expected one of {', '.join(MODES)}")
        if mode in ("replay", "record") and fixtures_path is None:
            raise ValueError(f"{mode} mode needs a fixtures path")
        self.mode = mode
        self.fixtures_path = Path(fixtures_path) if fixtures_path is not None else None
        self.model = model
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key
        self.transport = transport
        self.attempts = attempts
        self.backoff = backoff
        self.request_timeout = request_timeout
        self.sleep = sleep
        self.exchanges: list[Exchange] = []
        self._lock = threading.Lock()
        self._cursor: dict[str, int] = defaultdict(int)
        if mode == "replay" and not self.fixtures_path.exists():
            raise GatewayError(f"fixture file {self.fixtures_path} does not exist")
        self._fixtures = load_fixtures(self.fixtures_path) if mode == "replay" else {}
        self._client: Optional[httpx.Client] = None

    # -- public ----------------------------------------------------------

    def complete(self, template: str, bindings: dict[str, str]) -> str:
        prompt = get_template(template).render(bindings)
        digest = prompt_hash(prompt)
        if self.mode == "replay":
            response, latency, usage = self._replay(digest, template), 0.0, {}
        else:
            response, latency, usage = self._live(prompt)
        ex = Exchange(
            template,
            prompt,
            response,
            digest,
            latency=latency,
            prompt_tokens=usage.get("prompt_tokens", 0),
            completion_tokens=usage.get("completion_tokens", 0),
        )
        with self._lock:
            self.exchanges.append(ex)
            if self.mode == "record":
                self.fixtures_path.parent.mkdir(parents=True, exist_ok=True)
                with self.fixtures_path.open("a", encoding="utf-8") as fh:
                    fh.write(json.dumps(ex.fixture_record(), sort_keys=True) + "\n")
        return response

    def count(self, template: Optional[str] = None) -> int:
        return sum(1 for ex in self.exchanges if template is None or ex.template == template)

    def close(self):
        if self._client is not None:
            self._client.close()
            self._client = None

    # -- modes -------------------------------------------------------------

    def _replay(self, digest: str, template: str) -> str:
        with self._lock:
            answers = self._fixtures.get(digest)
            if not answers:
                raise MissingFixtureError(digest, template)
            i = self._cursor[digest]
            self._cursor[digest] = i + 1
        return answers[min(i, len(answers) - 1)]

    def _http(self) -> httpx.Client:
        if self._client is None:
            key = self.api_key or os.environ.get(API_KEY_ENV)
            if not key:
                raise GatewayError(f"live mode needs an API key in ${API_KEY_ENV}")
            self._client = httpx.Client(
                base_url=self.base_url,
                headers={"Authorization": f"Bearer {key}"},
                timeout=self.request_timeout,
                transport=self.transport,
            )
        return self._client

    def _live(self, prompt: str) -> tuple[str, float, dict]:
        client = self._http()
        body = {"model": self.model, "messages": [{"role": "user", "content": prompt}], **DECODING_PARAMS}
        delay = self.backoff
        last_error = ""
        for attempt in range(1, self.attempts + 1):
            start = time.monotonic()
            try:
                resp = client.post("/chat/completions", json=body)
            except httpx.TransportError as exc:
                last_error = f"{type(exc).__name__}: {exc}"
            else:
                if resp.status_code == 200:
                    data = resp.json()
                    text = data["choices"][0]["message"]["content"] or ""
                    return text, time.monotonic() - start, data.get("usage") or {}
                last_error = f"HTTP {resp.status_code}: {resp.text[:200]}"
                if resp.status_code < 500 and resp.status_code != 429:
                    raise GatewayError(f"request rejected: {last_error}")
            log.warning("chat completion attempt %d/%d failed: %s", attempt, self.attempts, last_error)
            if attempt < self.attempts:
                self.sleep(delay)
                delay *= 2
        raise GatewayError(f"chat completion failed after {self.attempts} attempts: {last_error}")


__all__ = [
    "API_KEY_ENV",
    "DECODING_PARAMS",
    "Exchange",
    "Gateway",
    "GatewayError",
    "MissingFixtureError",
    "load_fixtures",
    "prompt_hash",
    "record_fixtures",
]
