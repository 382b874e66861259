"""Single choke-point for all LLM calls.

Every prompting step (extraction, decomposition, type selection, sub-query
answering) goes through :func:`chat_complete`, which enforces deterministic
decoding (temperature 0) and JSON-only outputs, with one format retry and a
small transport retry budget. Backends are either a chat-completion HTTP
endpoint or a scripted deterministic mock.
"""

from __future__ import annotations

import json
import re
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Callable, Optional, Protocol, Sequence

import requests

from tasr.errors import LlmProtocolError, LlmUnavailable, MockMiss

ROLE_TAGS = ("extract", "decompose", "type_select", "answer")

TRANSPORT_RETRIES = 2
TRANSPORT_BACKOFF_S = 1.0

_FENCE_RE = re.compile(r"^```[a-zA-Z0-9_-]*\s*\n(.*?)\n?```\s*$", re.DOTALL)


@dataclass(frozen=True)
class LlmRequest:
    role_tag: str
    system_prompt: str
    user_prompt: str
    temperature: float = 0.0

    def __post_init__(self) -> None:
        if self.role_tag not in ROLE_TAGS:
            raise ValueError(f"unknown role_tag {self.role_tag!r}")
        if self.temperature != 0.0:
            raise ValueError("all LLM calls are deterministic; temperature must be 0")


@dataclass(frozen=True)
class LlmResponse:
    raw: str
    parsed: Any


class Backend(Protocol):
    def complete(self, req: LlmRequest) -> str:
        """Return the raw completion text; raise LlmUnavailable on transport failure."""
        ...


def strip_code_fences(text: str) -> str:
    """Drop a single wrapping markdown code fence, if present."""
    match = _FENCE_RE.match(text.strip())
    if match:
        return match.group(1).strip()
    return text.strip()


def chat_complete(
    req: LlmRequest,
    backend: Backend,
    sleep: Callable[[float], None] = time.sleep,
) -> LlmResponse:
    """Run one request; parse the body as JSON after stripping code fences.

    On a parse failure the request is retried once with an explicit JSON-only
    instruction appended; a second failure raises :class:`LlmProtocolError`.
    """
    raw = _complete_with_transport_retry(req, backend, sleep)
    parsed = _try_parse(raw)
    if parsed is not _PARSE_FAILED:
        return LlmResponse(raw=raw, parsed=parsed)

    retry_req = LlmRequest(
        role_tag=req.role_tag,
        system_prompt=req.system_prompt,
        user_prompt=req.user_prompt + "\n\nRespond with valid JSON only, no prose.",
    )
    raw = _complete_with_transport_retry(retry_req, backend, sleep)
    parsed = _try_parse(raw)
    if parsed is not _PARSE_FAILED:
        return LlmResponse(raw=raw, parsed=parsed)
    raise LlmProtocolError(req.role_tag, f"non-JSON output after retry: {raw[:200]!r}")


_PARSE_FAILED = object()


def _try_parse(raw: str) -> Any:
    try:
        return json.loads(strip_code_fences(raw))
    except json.JSONDecodeError:
        return _PARSE_FAILED


def _complete_with_transport_retry(
    req: LlmRequest, backend: Backend, sleep: Callable[[float], None]
) -> str:
    last: Optional[LlmUnavailable] = None
    for attempt in range(1 + TRANSPORT_RETRIES):
        try:
            return backend.complete(req)
        except LlmUnavailable as exc:
            last = exc
            if attempt < TRANSPORT_RETRIES:
                sleep(TRANSPORT_BACKOFF_S)
    assert last is not None
    raise last


class HttpChatBackend:
    """Chat-completion endpoint speaking the common ``/v1/chat/completions`` format."""

    def __init__(self, url: str, model: str, api_key: str = "", timeout: float = 120.0) -> None:
        base = url.rstrip("/")
        if not base.endswith("/chat/completions"):
            base = base + "/v1/chat/completions"
        self.url = base
        self.model = model
        self.api_key = api_key
        self.timeout = timeout

    def complete(self, req: LlmRequest) -> str:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        payload = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": req.system_prompt},
                {"role": "user", "content": req.user_prompt},
            ],
            "temperature": req.temperature,
        }
        try:
            resp = requests.post(self.url, json=payload, headers=headers, timeout=self.timeout)
            resp.raise_for_status()
            return resp.json()["choices"][0]["message"]["content"]
        except (requests.RequestException, KeyError, IndexError, ValueError) as exc:
            raise LlmUnavailable(req.role_tag, f"chat endpoint {self.url}: {exc}") from exc


@dataclass(frozen=True)
class ScriptEntry:
    role_tag: str
    match: str  # substring of the user prompt
    response: Any  # JSON value, or a raw string returned verbatim


class ScriptedMockBackend:
    """Deterministic canned backend; first declared matching entry wins."""

    def __init__(self, entries: Sequence[ScriptEntry]) -> None:
        self.entries = list(entries)
        self.calls: list[LlmRequest] = []

    def complete(self, req: LlmRequest) -> str:
        self.calls.append(req)
        for entry in self.entries:
            if entry.role_tag == req.role_tag and entry.match in req.user_prompt:
                if isinstance(entry.response, str):
                    return entry.response
                return json.dumps(entry.response)
        raise MockMiss(
            f"no script entry for role={req.role_tag!r}; prompt was:\n{req.user_prompt}"
        )

    def calls_for(self, role_tag: str) -> list[LlmRequest]:
        return [c for c in self.calls if c.role_tag == role_tag]


def scripted_mock(script: Sequence[tuple[str, str, Any]] | Sequence[ScriptEntry]) -> ScriptedMockBackend:
    """Build a mock backend from (role_tag, prompt-substring, response) entries."""
    entries = [e if isinstance(e, ScriptEntry) else ScriptEntry(*e) for e in script]
    return ScriptedMockBackend(entries)


def load_script(path: str | Path) -> ScriptedMockBackend:
    """Load a scripted mock from JSON: ``{"responses": [{"role", "match", "response"}]}``."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    entries = [
        ScriptEntry(role_tag=item["role"], match=item["match"], response=item["response"])
        for item in data["responses"]
    ]
    return ScriptedMockBackend(entries)


class RecordingBackend:
    """Wrap a backend and record every request; used to assert call contracts."""

    def __init__(self, inner: Backend) -> None:
        self.inner = inner
        self.requests: list[LlmRequest] = []

    def complete(self, req: LlmRequest) -> str:
        self.requests.append(req)
        return self.inner.complete(req)


def backend_from_spec(spec: str, model: str = "default", api_key: str = "") -> Backend:
    """``mock:<script-file>`` selects the scripted backend; anything else is HTTP."""
    if spec.startswith("mock:"):
        return load_script(spec[len("mock:"):])
    return HttpChatBackend(spec, model=model, api_key=api_key)


@dataclass
class Gateway:
    """Backend plus the call policy; the only object modules talk LLM through."""

    backend: Backend
    sleep: Callable[[float], None] = field(default=time.sleep)

    def call(self, role_tag: str, system_prompt: str, user_prompt: str) -> LlmResponse:
        req = LlmRequest(role_tag=role_tag, system_prompt=system_prompt, user_prompt=user_prompt)
        return chat_complete(req, self.backend, sleep=self.sleep)


def load_prompt(name: str) -> str:
    """Load a prompt template bundled with the package."""
    return (resources.files("tasr") / "prompts" / f"{name}.txt").read_text(encoding="utf-8")
