"""Model gateway: one completion/embedding interface over remote providers.

Requests pass through a content-addressed response cache and a shared token
bucket before reaching the provider. Transient failures (HTTP 429, 5xx,
timeouts) are retried with exponential backoff. ``StubProvider`` answers every
role from a fixed template and never touches the network.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import tempfile
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Optional

import httpx
import numpy as np

from .errors import AuthError, GatewayError, MalformedResponse, RateLimited
from .text import HashingEmbedder, keyword_sets

logger = logging.getLogger(__name__)

ROLES = ("summarize_method", "summarize_file", "feature", "epic", "judge", "tiebreak")
JUDGE_ROLES = ("judge", "tiebreak")
DEFAULT_TEMPERATURE = 0.2


@dataclass(frozen=True)
class ModelRequest:
    role: str
    prompt: str
    temperature: float = DEFAULT_TEMPERATURE
    max_tokens: int = 1024
    model_name: str = "stub"

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError(f"temperature {self.temperature} outside [0, 2]")
        if self.role in JUDGE_ROLES and self.temperature != 0.0:
            object.__setattr__(self, "temperature", 0.0)

    def cache_key(self) -> str:
        payload = json.dumps(
            [self.model_name, self.role, self.prompt, self.temperature], ensure_ascii=False
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


# --------------------------------------------------------------------------- cache


class ResponseCache:
    """One JSON file per entry, written atomically (temp file + rename)."""

    def __init__(self, directory):
        self.directory = Path(directory)

    def _path(self, key: str) -> Path:
        return self.directory / key[:2] / f"{key}.json"

    def get(self, req: ModelRequest) -> Optional[str]:
        path = self._path(req.cache_key())
        if not path.exists():
            return None
        entry = json.loads(path.read_text(encoding="utf-8"))
        if entry.get("model_name") != req.model_name or entry.get("role") != req.role:
            return None
        return entry["response"]

    def put(self, req: ModelRequest, response: str) -> None:
        key = req.cache_key()
        path = self._path(key)
        path.parent.mkdir(parents=True, exist_ok=True)
        entry = {
            "key": key,
            "model_name": req.model_name,
            "role": req.role,
            "temperature": req.temperature,
            "response": response,
            "created_at": datetime.now(timezone.utc).isoformat(),
        }
        fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(entry, fh, ensure_ascii=False)
        os.replace(tmp, path)

    def invalidate(self, req: ModelRequest) -> None:
        self._path(req.cache_key()).unlink(missing_ok=True)


class TokenBucket:
    def __init__(self, rate: float, capacity: Optional[float] = None, clock=time.monotonic, sleep=time.sleep):
        self.rate = rate
        self.capacity = capacity if capacity is not None else max(1.0, rate)
        self._tokens = self.capacity
        self._clock = clock
        self._sleep = sleep
        self._stamp = clock()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        if self.rate <= 0:
            return
        while True:
            with self._lock:
                now = self._clock()
                self._tokens = min(self.capacity, self._tokens + (now - self._stamp) * self.rate)
                self._stamp = now
                if self._tokens >= 1.0:
                    self._tokens -= 1.0
                    return
                wait = (1.0 - self._tokens) / self.rate
            self._sleep(wait)


# --------------------------------------------------------------------------- providers


class StubProvider:
    """Deterministic offline provider. Outputs are templates filled from prompt markers."""

    name = "stub"

    def __init__(self, dim: int = 256):
        self.embedder = HashingEmbedder(dim)

    def complete(self, req: ModelRequest) -> str:
        return getattr(self, f"_{req.role}")(req.prompt)

    def embed(self, text: str) -> np.ndarray:
        return self.embedder.embed(text)

    @staticmethod
    def _field(prompt: str, name: str) -> str:
        m = re.search(rf"^{name}: (.*)$", prompt, re.MULTILINE)
        return m.group(1).strip() if m else ""

    def _summarize_method(self, prompt: str) -> str:
        fqn = self._field(prompt, "FQN")
        calls = [c for c in self._field(prompt, "CALLS").split(", ") if c]
        words = " ".join([fqn.rsplit(".", 1)[-1].split("/")[0]] + [c.rsplit(".", 1)[-1] for c in calls])
        return json.dumps(
            {
                "description": f"STUB-SUMMARY({fqn}) {words}".strip(),
                "workflow": [f"call {c}" for c in calls],
                "quality": "no non-functional notes",
            }
        )

    def _summarize_file(self, prompt: str) -> str:
        path = self._field(prompt, "FILE")
        members = re.findall(r"^- METHOD: (.*)$", prompt, re.MULTILINE)
        return json.dumps(
            {"description": f"STUB-FILE-SUMMARY({path}) " + " ".join(m.rsplit(".", 1)[-1] for m in members)}
        )

    def _feature(self, prompt: str) -> str:
        cluster = self._field(prompt, "CLUSTER")
        members = re.findall(r"^- FQN: (.*)\n  DESCRIPTION: (.*)$", prompt, re.MULTILINE)
        if not members:
            members = [(f, "") for f in re.findall(r"^- FQN: (.*)$", prompt, re.MULTILINE)]
        desc = "; ".join(f"{fqn}: {d}" if d else fqn for fqn, d in members)
        entities, ops = keyword_sets(" ".join(d for _, d in members))
        return json.dumps(
            {
                "entities": sorted(entities),
                "operations": sorted(ops),
                "title": f"STUB-FEATURE({cluster})",
                "description": f"Implements {desc}",
            }
        )

    def _epic(self, prompt: str) -> str:
        cluster = self._field(prompt, "FILE_CLUSTER")
        titles = re.findall(r"^- TITLE: (.*)$", prompt, re.MULTILINE)
        return json.dumps({"title": f"STUB-EPIC({cluster})", "description": "Groups " + "; ".join(titles)})

    def _judge(self, prompt: str) -> str:
        from .eval.judges import stub_verdict_from_prompt

        return json.dumps(stub_verdict_from_prompt(prompt))

    _tiebreak = _judge


class HttpProvider:
    """OpenAI-compatible chat-completions and embeddings endpoints."""

    def __init__(
        self,
        base_url: str,
        model_name: str,
        api_key_env: str = "REPOSUM_API_KEY",
        embedding_model: Optional[str] = None,
        timeout: float = 60.0,
        transport: Optional[httpx.BaseTransport] = None,
    ):
        self.name = model_name
        self.model_name = model_name
        self.embedding_model = embedding_model or model_name
        api_key = os.environ.get(api_key_env, "")
        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        self._client = httpx.Client(base_url=base_url, headers=headers, timeout=timeout, transport=transport)

    def _post(self, path: str, payload: dict) -> dict:
        try:
            resp = self._client.post(path, json=payload)
        except httpx.TimeoutException as exc:
            raise RateLimited(f"timeout: {exc}") from exc
        except httpx.HTTPError as exc:
            raise GatewayError(str(exc)) from exc
        if resp.status_code in (401, 403):
            raise AuthError(f"provider rejected credentials ({resp.status_code})")
        if resp.status_code == 429:
            raise RateLimited("HTTP 429")
        if resp.status_code >= 500:
            raise RateLimited(f"HTTP {resp.status_code}")
        if resp.status_code >= 400:
            raise GatewayError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            return resp.json()
        except ValueError as exc:
            raise MalformedResponse("response body is not JSON") from exc

    def complete(self, req: ModelRequest) -> str:
        data = self._post(
            "/chat/completions",
            {
                "model": req.model_name,
                "messages": [{"role": "user", "content": req.prompt}],
                "temperature": req.temperature,
                "max_tokens": req.max_tokens,
            },
        )
        try:
            return data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise MalformedResponse("no completion text in response") from exc

    def embed(self, text: str) -> np.ndarray:
        data = self._post("/embeddings", {"model": self.embedding_model, "input": text})
        try:
            return np.asarray(data["data"][0]["embedding"], dtype=float)
        except (KeyError, IndexError, TypeError) as exc:
            raise MalformedResponse("no embedding in response") from exc


# --------------------------------------------------------------------------- gateway


@dataclass
class GatewayStats:
    requests: int = 0
    provider_calls: int = 0
    cache_hits: int = 0
    retries: int = 0
    failures: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def bump(self, **deltas):
        with self._lock:
            for k, v in deltas.items():
                setattr(self, k, getattr(self, k) + v)


class Gateway:
    def __init__(
        self,
        provider,
        cache: Optional[ResponseCache] = None,
        limiter: Optional[TokenBucket] = None,
        model_name: Optional[str] = None,
        retries: int = 2,
        backoff: float = 1.0,
        temperature: float = DEFAULT_TEMPERATURE,
        max_tokens: int = 1024,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.provider = provider
        self.cache = cache
        self.limiter = limiter
        self.model_name = model_name or getattr(provider, "model_name", None) or provider.name
        self.retries = retries
        self.backoff = backoff
        self.temperature = temperature
        self.max_tokens = max_tokens
        self.stats = GatewayStats()
        self._sleep = sleep

    def request(self, role: str, prompt: str) -> ModelRequest:
        temperature = 0.0 if role in JUDGE_ROLES else self.temperature
        return ModelRequest(role, prompt, temperature, self.max_tokens, self.model_name)

    def complete(self, req: ModelRequest | str, prompt: Optional[str] = None) -> str:
        if isinstance(req, str):
            req = self.request(req, prompt or "")
        self.stats.bump(requests=1)
        if self.cache is not None:
            hit = self.cache.get(req)
            if hit is not None:
                self.stats.bump(cache_hits=1)
                return hit
        text = self._with_retries(lambda: self.provider.complete(req))
        if self.cache is not None:
            self.cache.put(req, text)
        return text

    def invalidate(self, req: ModelRequest) -> None:
        if self.cache is not None:
            self.cache.invalidate(req)

    def embed(self, text: str) -> np.ndarray:
        if not text or not text.strip():
            raise GatewayError("cannot embed empty text")
        vec = np.asarray(self._with_retries(lambda: self.provider.embed(text)), dtype=float)
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            raise MalformedResponse("zero embedding vector")
        return vec / norm

    def _with_retries(self, call):
        attempt = 0
        while True:
            if self.limiter is not None:
                self.limiter.acquire()
            self.stats.bump(provider_calls=1)
            try:
                return call()
            except RateLimited as exc:
                if attempt >= self.retries:
                    self.stats.bump(failures=1)
                    raise
                delay = self.backoff * (2**attempt)
                logger.warning("transient provider error (%s); retry %d in %.2fs", exc, attempt + 1, delay)
                self.stats.bump(retries=1)
                self._sleep(delay)
                attempt += 1
            except GatewayError:
                self.stats.bump(failures=1)
                raise


def parse_json_reply(text: str) -> dict:
    """Extract the first JSON object from a model reply (code fences tolerated)."""
    start = text.find("{")
    end = text.rfind("}")
    if start < 0 or end <= start:
        raise MalformedResponse("reply contains no JSON object")
    try:
        data = json.loads(text[start : end + 1])
    except json.JSONDecodeError as exc:
        raise MalformedResponse(f"reply is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise MalformedResponse("reply JSON is not an object")
    return data


def make_gateway(settings: Optional[dict] = None, cache_dir=None, transport=None) -> Gateway:
    """Gateway from a ``[provider]`` config section (``name = "stub"`` selects the stub)."""
    settings = dict(settings or {})
    name = settings.get("name", "stub")
    if name == "stub":
        provider = StubProvider(settings.get("embedding_dim", 256))
    else:
        provider = HttpProvider(
            base_url=settings["base_url"],
            model_name=settings.get("model_name", name),
            api_key_env=settings.get("api_key_env", "REPOSUM_API_KEY"),
            embedding_model=settings.get("embedding_model"),
            transport=transport,
        )
    rate = float(settings.get("requests_per_second", 0))
    return Gateway(
        provider,
        cache=ResponseCache(cache_dir) if cache_dir is not None else None,
        limiter=TokenBucket(rate, settings.get("burst")) if rate > 0 else None,
        model_name=settings.get("model_name", name),
        retries=int(settings.get("retries", 2)),
        backoff=float(settings.get("backoff", 1.0)),
        temperature=float(settings.get("temperature", DEFAULT_TEMPERATURE)),
        max_tokens=int(settings.get("max_tokens", 1024)),
    )
