"""Chat-completions backends: a real HTTP client, offline mocks, and a
record/replay transcript cache that wraps either."""

from __future__ import annotations

import hashlib
import json
import os
import random
import threading
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import httpx

from ..cooklang import IngredientRecord, IngredientRef, Step, Text, parse, render

RECIPE_LABEL = "recipe_text: "


class BackendError(RuntimeError):
    def __init__(self, message, status=None, retries=0):
        super().__init__(message)
        self.status = status
        self.retries = retries


class ReplayMiss(BackendError):
    """The transcript cache has no entry for a request and may not record one."""


@dataclass(frozen=True)
class ChatRequest:
    model: str
    messages: tuple[tuple[str, str], ...]
    temperature: float = 0.0
    max_tokens: int = 2048

    def payload(self) -> dict:
        return {
            "model": self.model,
            "messages": [{"role": r, "content": c} for r, c in self.messages],
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        }

    def digest(self) -> str:
        blob = json.dumps(self.payload(), sort_keys=True, ensure_ascii=False, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    @property
    def recipe_text(self) -> str:
        """The recipe text of the target (final user) message."""
        content = self.messages[-1][1]
        at = content.find(RECIPE_LABEL)
        return content[at + len(RECIPE_LABEL):] if at >= 0 else content


@dataclass
class Completion:
    text: str
    usage: dict = field(default_factory=dict)
    retries: int = 0


class ChatCompletionsClient:
    """Minimal client for an OpenAI-style ``/chat/completions`` endpoint.

    Transport errors and 5xx responses are retried with exponential backoff;
    4xx responses fail immediately. The API key is read from the environment
    variable named by ``api_key_env`` and never written anywhere.
    """

    def __init__(
        self,
        base_url: str,
        api_key_env: str | None = None,
        timeout: float = 120.0,
        max_retries: int = 3,
        backoff: float = 1.0,
        sleep: Callable[[float], None] = time.sleep,
        transport: httpx.BaseTransport | None = None,
    ):
        self.url = base_url.rstrip("/") + "/chat/completions"
        self.max_retries = max_retries
        self.backoff = backoff
        self.sleep = sleep
        headers = {"Content-Type": "application/json"}
        if api_key_env:
            key = os.environ.get(api_key_env)
            if not key:
                raise BackendError(f"environment variable {api_key_env} is not set")
            headers["Authorization"] = f"Bearer {key}"
        self._http = httpx.Client(timeout=timeout, headers=headers, transport=transport)

    def complete(self, request: ChatRequest) -> Completion:
        attempt = 0
        while True:
            try:
                resp = self._http.post(self.url, json=request.payload())
            except httpx.TransportError as exc:
                error = BackendError(f"transport error: {exc}", retries=attempt)
            else:
                if resp.status_code < 400:
                    return self._parse(resp, attempt)
                error = BackendError(
                    f"HTTP {resp.status_code}: {resp.text[:200]}", status=resp.status_code, retries=attempt
                )
                if resp.status_code < 500:
                    raise error
            if attempt >= self.max_retries:
                raise error
            self.sleep(self.backoff * 2**attempt)
            attempt += 1

    @staticmethod
    def _parse(resp, attempt):
        try:
            data = resp.json()
            text = data["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError):
            raise BackendError("malformed chat-completions response", status=resp.status_code, retries=attempt)
        return Completion(text or "", data.get("usage") or {}, attempt)

    def close(self):
        self._http.close()


class EchoBackend:
    """Answers every request with the reference for its recipe text."""

    def __init__(self, references: dict[str, str]):
        self.references = dict(references)

    @classmethod
    def from_corpus(cls, corpus):
        return cls({s.recipe_text: s.reference_cook for s in corpus})

    def lookup(self, request):
        try:
            return self.references[request.recipe_text]
        except KeyError:
            raise BackendError("echo backend: unknown recipe text") from None

    def complete(self, request: ChatRequest) -> Completion:
        return Completion(self.lookup(request))


class NoisyEchoBackend(EchoBackend):
    """Echo with seeded, per-request damage to the ingredient markup.

    Each ingredient is independently unmarked (left as plain words) or
    stripped of its quantity with probability ``noise / 2``. The damage is a
    pure function of (seed, request), so runs are reproducible while
    different prompts for the same recipe come out differently.
    """

    def __init__(self, references, noise: float = 0.3, seed: int = 0):
        super().__init__(references)
        self.noise = noise
        self.seed = seed

    def complete(self, request: ChatRequest) -> Completion:
        reference = self.lookup(request)
        key = hashlib.sha256(f"{self.seed}:{request.digest()}".encode("utf-8")).digest()
        rng = random.Random(key)
        ast = parse(reference)
        ingredients = list(ast.ingredients)
        steps = []
        for step in ast.steps:
            items = []
            for item in step.items:
                if isinstance(item, IngredientRef):
                    r = rng.random()
                    rec = ingredients[item.index]
                    if r < self.noise / 2:
                        item = Text(rec.name)
                    elif r < self.noise:
                        ingredients[item.index] = IngredientRecord(rec.name)
                items.append(item)
            steps.append(Step(tuple(items)))
        damaged = replace(ast, steps=tuple(steps), ingredients=tuple(ingredients))
        return Completion(render(damaged))


class ScriptedBackend:
    """Plays back canned responses, for tests.

    ``script`` is either a list consumed in order or a callable taking the
    request. Each entry is the completion text, a ``Completion``, or an
    exception instance to raise.
    """

    def __init__(self, script):
        self.script = script if callable(script) else list(script)
        self.requests = []
        self._lock = threading.Lock()

    def complete(self, request: ChatRequest) -> Completion:
        with self._lock:
            self.requests.append(request)
            if callable(self.script):
                entry = self.script(request)
            elif self.script:
                entry = self.script.pop(0)
            else:
                raise BackendError("scripted backend exhausted")
        if isinstance(entry, BaseException):
            raise entry
        if isinstance(entry, Completion):
            return entry
        return Completion(entry)


class TranscriptCache:
    """Disk cache of request digest -> response, one JSON file per request.

    Modes: ``"replay"`` serves only cached responses and raises
    ``ReplayMiss`` otherwise; ``"record"`` always calls the wrapped backend
    and stores the result; ``"auto"`` replays hits and records misses.
    """

    MODES = ("replay", "record", "auto")

    def __init__(self, directory, backend=None, mode: str = "auto"):
        if mode not in self.MODES:
            raise ValueError(f"unknown cache mode {mode!r}")
        if mode != "replay" and backend is None:
            raise ValueError(f"cache mode {mode!r} needs a backend")
        self.directory = Path(directory)
        self.backend = backend
        self.mode = mode
        self._lock = threading.Lock()

    def _path(self, digest):
        return self.directory / f"{digest}.json"

    def complete(self, request: ChatRequest) -> Completion:
        digest = request.digest()
        path = self._path(digest)
        if self.mode != "record" and path.is_file():
            entry = json.loads(path.read_text(encoding="utf-8"))["response"]
            return Completion(entry["text"], entry.get("usage", {}))
        if self.mode == "replay":
            raise ReplayMiss(f"no cached response for request {digest[:12]}")
        completion = self.backend.complete(request)
        record = {
            "request": request.payload(),
            "response": {"text": completion.text, "usage": completion.usage},
        }
        with self._lock:
            self.directory.mkdir(parents=True, exist_ok=True)
            tmp = path.with_suffix(".tmp")
            tmp.write_text(json.dumps(record, indent=1, sort_keys=True, ensure_ascii=False), encoding="utf-8")
            tmp.replace(path)
        return completion

    def digest(self) -> str | None:
        return cache_digest(self.directory)


def cache_digest(directory) -> str | None:
    """Hash over every cached transcript, or None if the directory is absent."""
    directory = Path(directory)
    if not directory.is_dir():
        return None
    h = hashlib.sha256()
    for path in sorted(directory.glob("*.json")):
        h.update(path.name.encode("utf-8"))
        h.update(path.read_bytes())
    return h.hexdigest()


def make_backend(config, corpus=(), cache_dir=None, cache_mode="auto"):
    """Backend for ``config.backend``: ``http``, ``echo`` or ``noisy``.

    With ``cache_dir`` the backend is wrapped in a ``TranscriptCache``; in
    replay mode no live backend is built at all.
    """
    if cache_dir is not None and cache_mode == "replay":
        return TranscriptCache(cache_dir, mode="replay")
    kind = config.backend
    if kind == "echo":
        live = EchoBackend.from_corpus(corpus)
    elif kind == "noisy":
        live = NoisyEchoBackend({s.recipe_text: s.reference_cook for s in corpus})
    elif kind == "http":
        if not config.endpoint:
            raise ValueError(f"config {config.model_id!r}: http backend needs an endpoint")
        live = ChatCompletionsClient(config.endpoint, config.api_key_env)
    else:
        raise ValueError(f"unknown backend kind {kind!r}")
    if cache_dir is not None:
        return TranscriptCache(cache_dir, live, cache_mode)
    return live
