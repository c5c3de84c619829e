"""Pluggable language-model boundary: request/response types, live HTTP client,
scripted deterministic mock, and strict response parsing."""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass

import requests

from .errors import ParseFailure, ScriptExhausted, TagMismatch, TransportError

REQUEST_TAGS = ("weight_update", "policy_extraction", "policy_evaluation", "prp_rank")

API_KEY_ENV = "APEF_LLM_API_KEY"

# Temperature defaults: deterministic where parsing matters, diverse where
# synthesis matters.
DEFAULT_TEMPERATURES = {
    "weight_update": 0.0,
    "policy_extraction": 0.7,
    "policy_evaluation": 0.0,
    "prp_rank": 0.0,
}


@dataclass(frozen=True)
class LlmRequest:
    system_text: str
    user_text: str
    request_tag: str
    temperature: float = 0.0
    max_tokens: int = 2048

    def __post_init__(self):
        if not self.user_text:
            raise ValueError("user_text must be non-empty")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature must be in [0, 2]")
        if self.request_tag not in REQUEST_TAGS:
            raise ValueError(f"unknown request_tag {self.request_tag!r}")


@dataclass(frozen=True)
class LlmResponse:
    text: str
    adapter_id: str
    latency_ms: int = 0


class TranscriptWriter:
    """Appends {request, response, tag, timestamp} JSONL records; thread-safe."""

    def __init__(self, path: str):
        self.path = path
        self._lock = threading.Lock()

    def record(self, request: LlmRequest, response: LlmResponse) -> None:
        entry = {
            "tag": request.request_tag,
            "request": {
                "system_text": request.system_text,
                "user_text": request.user_text,
                "temperature": request.temperature,
                "max_tokens": request.max_tokens,
            },
            "response": {"text": response.text, "adapter_id": response.adapter_id},
            "timestamp": time.time(),
        }
        line = json.dumps(entry, sort_keys=True)
        with self._lock:
            with open(self.path, "a") as fh:
                fh.write(line + "\n")


class ScriptedAdapter:
    """Deterministic replay adapter: a fixed list of (expected_tag, response_text).

    The cursor advances one entry per call; requesting past the end raises
    ScriptExhausted and a tag mismatch raises TagMismatch.
    """

    adapter_id = "scripted"

    def __init__(self, script: list[tuple[str, str]], transcript: TranscriptWriter | None = None):
        self.script = list(script)
        self.cursor = 0
        self.transcript = transcript

    @classmethod
    def from_transcript(cls, path: str, transcript: TranscriptWriter | None = None) -> "ScriptedAdapter":
        script = []
        with open(path) as fh:
            for line in fh:
                entry = json.loads(line)
                script.append((entry["tag"], entry["response"]["text"]))
        return cls(script, transcript=transcript)

    def complete(self, request: LlmRequest) -> LlmResponse:
        if self.cursor >= len(self.script):
            raise ScriptExhausted(f"script has {len(self.script)} entries")
        expected_tag, text = self.script[self.cursor]
        if expected_tag != request.request_tag:
            raise TagMismatch(
                f"entry {self.cursor} expects {expected_tag!r}, got {request.request_tag!r}"
            )
        self.cursor += 1
        response = LlmResponse(text=text, adapter_id=self.adapter_id)
        if self.transcript is not None:
            self.transcript.record(request, response)
        return response


class HttpAdapter:
    """Chat-completion-style JSON-over-HTTP client with a configurable body template.

    The body template is rendered with {system}, {user}, {temperature},
    {max_tokens}, and {model}; the response text is pulled from the JSON reply
    via a dotted path (default suits OpenAI-style replies).
    """

    def __init__(
        self,
        endpoint: str,
        model: str,
        adapter_id: str | None = None,
        response_path: str = "choices.0.message.content",
        transcript: TranscriptWriter | None = None,
        max_retries: int = 3,
        backoff_s: float = 0.5,
        session: requests.Session | None = None,
    ):
        self.endpoint = endpoint
        self.model = model
        self.adapter_id = adapter_id or model
        self.response_path = response_path
        self.transcript = transcript
        self.max_retries = max_retries
        self.backoff_s = backoff_s
        self.session = session or requests.Session()

    def _body(self, request: LlmRequest) -> dict:
        return {
            "model": self.model,
            "messages": [
                {"role": "system", "content": request.system_text},
                {"role": "user", "content": request.user_text},
            ],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }

    def _extract(self, payload: dict) -> str:
        node = payload
        for part in self.response_path.split("."):
            node = node[int(part)] if part.isdigit() else node[part]
        return str(node)

    def complete(self, request: LlmRequest) -> LlmResponse:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(API_KEY_ENV)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        last_err: Exception | None = None
        for attempt in range(self.max_retries):
            start = time.monotonic()
            try:
                resp = self.session.post(
                    self.endpoint, json=self._body(request), headers=headers, timeout=120
                )
                resp.raise_for_status()
                text = self._extract(resp.json())
                response = LlmResponse(
                    text=text,
                    adapter_id=self.adapter_id,
                    latency_ms=int((time.monotonic() - start) * 1000),
                )
                if self.transcript is not None:
                    self.transcript.record(request, response)
                return response
            except (requests.RequestException, KeyError, IndexError, ValueError) as err:
                last_err = err
                time.sleep(self.backoff_s * 2**attempt)
        raise TransportError(str(last_err))


# ---------------------------------------------------------------------------
# Response parsing
# ---------------------------------------------------------------------------


def iter_json_objects(text: str):
    """Yield every decodable JSON object embedded in possibly-chatty text."""
    decoder = json.JSONDecoder()
    pos = 0
    while True:
        start = text.find("{", pos)
        if start < 0:
            return
        try:
            obj, end = decoder.raw_decode(text[start:])
        except json.JSONDecodeError:
            pos = start + 1
            continue
        if isinstance(obj, dict):
            yield obj
        pos = start + max(end, 1)


@dataclass(frozen=True)
class WeightProposal:
    """Raw parsed weights before constraint validation; may violate bounds."""

    w_peak: float
    w_der: float
    w_amp: float
    tolerance: float


def parse_weight_response(text: str) -> WeightProposal:
    """Extract the first JSON object carrying all four weight keys.

    Constraint validation is deliberately not performed here; the optimizer
    repairs out-of-range proposals.
    """
    needed = {"w_peak", "w_der", "w_amp", "tolerance"}
    for obj in iter_json_objects(text):
        if needed <= set(obj):
            return WeightProposal(
                w_peak=float(obj["w_peak"]),
                w_der=float(obj["w_der"]),
                w_amp=float(obj["w_amp"]),
                tolerance=float(obj["tolerance"]),
            )
    raise ParseFailure("no JSON object with w_peak/w_der/w_amp/tolerance found")


def parse_policy_response(text: str):
    """Parse the policy JSON schema embedded in a model response."""
    from .policy import parse_policy_dict

    for obj in iter_json_objects(text):
        if {"metrics", "formulas", "scoring"} <= set(obj):
            return parse_policy_dict(obj)
    raise ParseFailure("no policy JSON object found")
