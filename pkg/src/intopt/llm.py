"""Pluggable LLM invocation with record/replay transcripts.

Two production wire formats (OpenAI-style chat and raw completion) plus a
replay backend that resolves requests from a persisted transcript store,
keyed by an exact hash of (backend id, prompt, sampling).  Running the
whole pipeline in replay mode is bit-reproducible.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .errors import BackendUnavailable, RateLimited, ReplayMiss

logger = logging.getLogger(__name__)

PURPOSES = (
    "formulation",
    "refinement",
    "realization",
    "distillation",
    "harness_generation",
)

DEFAULT_TEMPERATURE = 0.0
DEFAULT_MAX_OUTPUT_TOKENS = 8192


@dataclass
class LlmRequest:
    backend_id: str
    prompt: str
    temperature: float = DEFAULT_TEMPERATURE
    max_output_tokens: int = DEFAULT_MAX_OUTPUT_TOKENS
    purpose: str = "realization"

    def request_hash(self) -> str:
        payload = json.dumps(
            {
                "backend_id": self.backend_id,
                "prompt": self.prompt,
                "sampling": {
                    "temperature": self.temperature,
                    "max_output_tokens": self.max_output_tokens,
                },
            },
            sort_keys=True,
            ensure_ascii=False,
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class TranscriptStore:
    """One JSON file per transcript, named by request hash."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._cache: dict[str, str] = {}
        self._load()

    def _load(self) -> None:
        for path in sorted(self.directory.glob("*.json")):
            try:
                data = json.loads(path.read_text())
                self._cache[data["request_hash"]] = data["response"]
            except (json.JSONDecodeError, KeyError) as exc:
                logger.warning("skipping corrupt transcript %s: %s", path, exc)

    def lookup(self, request_hash: str) -> str | None:
        return self._cache.get(request_hash)

    def record(self, request: LlmRequest, response: str) -> Path:
        request_hash = request.request_hash()
        data = {
            "request_hash": request_hash,
            "backend_id": request.backend_id,
            "prompt": request.prompt,
            "sampling": {
                "temperature": request.temperature,
                "max_output_tokens": request.max_output_tokens,
            },
            "purpose": request.purpose,
            "response": response,
            "recorded_at": datetime.now(timezone.utc).isoformat(),
        }
        path = self.directory / f"{request_hash}.json"
        with self._lock:
            path.write_text(json.dumps(data, indent=2, ensure_ascii=False) + "\n")
            self._cache[request_hash] = response
        return path

    def __len__(self) -> int:
        return len(self._cache)


@dataclass
class BackendConfig:
    backend_id: str
    kind: str  # "openai_chat", "raw_completion", "replay"
    endpoint: str = ""
    model: str = ""
    transcript_dir: str | None = None  # records here when set (non-replay kinds)
    max_retries: int = 5
    timeout_s: float = 600.0
    extra: dict = field(default_factory=dict)

    def api_key(self) -> str | None:
        return os.environ.get(f"INTOPT_API_KEY_{self.backend_id.upper().replace('-', '_')}")


def complete(request: LlmRequest, backend: BackendConfig) -> str:
    """Send *request* through *backend*, returning the raw model output."""
    if backend.kind == "replay":
        if not backend.transcript_dir:
            raise BackendUnavailable("replay backend requires a transcript_dir")
        store = _store_for(backend.transcript_dir)
        response = store.lookup(request.request_hash())
        if response is None:
            raise ReplayMiss(request.request_hash())
        return response

    response = _http_complete(request, backend)
    if backend.transcript_dir:
        _store_for(backend.transcript_dir).record(request, response)
    return response


_stores: dict[str, TranscriptStore] = {}
_stores_lock = threading.Lock()


def _store_for(directory: str | Path) -> TranscriptStore:
    key = str(Path(directory).resolve())
    with _stores_lock:
        if key not in _stores:
            _stores[key] = TranscriptStore(directory)
        return _stores[key]


def _http_complete(request: LlmRequest, backend: BackendConfig) -> str:
    import requests

    if backend.kind == "openai_chat":
        url = backend.endpoint.rstrip("/") + "/chat/completions"
        body = {
            "model": backend.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        }
    elif backend.kind == "raw_completion":
        url = backend.endpoint.rstrip("/") + "/completions"
        body = {
            "model": backend.model,
            "prompt": request.prompt,
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        }
    else:
        raise BackendUnavailable(f"unknown backend kind '{backend.kind}'")

    headers = {"Content-Type": "application/json"}
    key = backend.api_key()
    if key:
        headers["Authorization"] = f"Bearer {key}"

    delay = 1.0
    for attempt in range(backend.max_retries + 1):
        try:
            resp = requests.post(url, json=body, headers=headers, timeout=backend.timeout_s)
        except requests.RequestException as exc:
            raise BackendUnavailable(f"cannot reach {url}: {exc}") from exc
        if resp.status_code == 429 or resp.status_code >= 500:
            if attempt == backend.max_retries:
                raise RateLimited(
                    f"{url} still returning {resp.status_code} after "
                    f"{backend.max_retries} retries"
                )
            time.sleep(delay)
            delay = min(delay * 2, 60.0)
            continue
        if resp.status_code != 200:
            raise BackendUnavailable(f"{url} returned {resp.status_code}: {resp.text[:500]}")
        data = resp.json()
        if backend.kind == "openai_chat":
            return data["choices"][0]["message"]["content"]
        return data["choices"][0]["text"]
    raise BackendUnavailable("unreachable")
