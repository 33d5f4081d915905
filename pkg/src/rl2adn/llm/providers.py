"""Chat-completion backends: an HTTP client and a scripted fixture player."""

from __future__ import annotations

import logging
import os
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import httpx

from .history import DialogueHistory

log = logging.getLogger(__name__)

API_KEY_ENV = "ADN_LLM_API_KEY"
KICKOFF_MESSAGE = "Design the two penalty functions now."


class LlmError(RuntimeError):
    pass


class LlmHttpError(LlmError):
    def __init__(self, status: int, message: str):
        super().__init__(f"HTTP {status}: {message}")
        self.status = status


class LlmAuthError(LlmHttpError):
    pass


class LlmResponseError(LlmError):
    pass


class FixturesExhausted(LlmError):
    pass


@dataclass(frozen=True)
class LlmProviderConfig:
    kind: str = "mock"  # live | mock
    endpoint: str = ""
    model: str = "qwen-max"
    temperature: float = 0.8
    top_p: float = 0.8
    timeout: float = 60.0
    max_retries: int = 3
    backoff: float = 1.0  # seconds, doubled after every failed attempt
    fixtures_dir: str | None = None
    max_history_tokens: int | None = None
    api_key_env: str = API_KEY_ENV

    def __post_init__(self):
        if self.kind not in ("live", "mock"):
            raise ValueError("provider kind must be 'live' or 'mock'")
        if not (0.0 <= self.temperature <= 1.0 and 0.0 <= self.top_p <= 1.0):
            raise ValueError("temperature and top_p must lie in [0, 1]")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "LlmProviderConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown LLM option(s): {', '.join(sorted(unknown))}")
        return cls(**d)


def _check_history(history: DialogueHistory) -> None:
    if len(history) == 0 or history[0].role != "system":
        raise LlmError("history must start with the system prompt")


class MockProvider:
    """Replays ``round_NN.txt`` files from a directory, one per call."""

    def __init__(self, fixtures_dir: str | Path):
        self.dir = Path(fixtures_dir)
        if not self.dir.is_dir():
            raise LlmError(f"fixtures directory not found: {self.dir}")
        self.turn = 0

    def chat(self, history: DialogueHistory) -> str:
        _check_history(history)
        path = self.dir / f"round_{self.turn:02d}.txt"
        if not path.exists():
            raise FixturesExhausted(f"no fixture {path.name} for dialogue turn {self.turn}")
        self.turn += 1
        return path.read_text(encoding="utf-8")


class LiveProvider:
    """OpenAI-compatible ``/chat/completions`` client."""

    def __init__(self, config: LlmProviderConfig, transport: httpx.BaseTransport | None = None, sleep=time.sleep):
        if not config.endpoint:
            raise LlmError("live provider needs an endpoint URL")
        self.config = config
        self._transport = transport
        self._sleep = sleep

    def __repr__(self) -> str:
        return f"LiveProvider(endpoint={self.config.endpoint!r}, model={self.config.model!r})"

    def _token(self) -> str:
        token = os.environ.get(self.config.api_key_env)
        if not token:
            raise LlmError(f"environment variable {self.config.api_key_env} is not set")
        return token

    def request_body(self, history: DialogueHistory) -> dict:
        msgs = [m.wire() for m in history.window(self.config.max_history_tokens)]
        if not any(m["role"] == "user" for m in msgs):
            # Some endpoints refuse a conversation without a user turn.
            msgs.append({"role": "user", "content": KICKOFF_MESSAGE})
        return {
            "model": self.config.model,
            "temperature": self.config.temperature,
            "top_p": self.config.top_p,
            "messages": msgs,
        }

    def chat(self, history: DialogueHistory) -> str:
        _check_history(history)
        cfg = self.config
        body = self.request_body(history)
        headers = {"Authorization": f"Bearer {self._token()}", "Content-Type": "application/json"}
        url = cfg.endpoint.rstrip("/") + "/chat/completions"
        delay = cfg.backoff
        last: Exception | None = None
        with httpx.Client(timeout=cfg.timeout, transport=self._transport) as client:
            for attempt in range(cfg.max_retries + 1):
                if attempt:
                    log.info("retrying chat request (attempt %d) after %.1fs", attempt + 1, delay)
                    self._sleep(delay)
                    delay *= 2
                try:
                    resp = client.post(url, json=body, headers=headers)
                except (httpx.TimeoutException, httpx.TransportError) as exc:
                    last = LlmError(f"request failed: {type(exc).__name__}")
                    log.warning("chat request failed: %s", type(exc).__name__)
                    continue
                if resp.status_code in (401, 403):
                    raise LlmAuthError(resp.status_code, "authentication rejected by the endpoint")
                if resp.status_code == 429 or resp.status_code >= 500:
                    last = LlmHttpError(resp.status_code, "endpoint unavailable")
                    log.warning("chat request returned HTTP %d", resp.status_code)
                    continue
                if resp.status_code >= 400:
                    raise LlmHttpError(resp.status_code, _error_text(resp))
                return _first_choice(resp)
        raise last if last else LlmError("no attempt made")


def _error_text(resp: httpx.Response) -> str:
    try:
        err = resp.json().get("error")
        if isinstance(err, dict):
            return str(err.get("message", "request rejected"))[:200]
    except Exception:
        pass
    return "request rejected"


def _first_choice(resp: httpx.Response) -> str:
    try:
        content = resp.json()["choices"][0]["message"]["content"]
    except (ValueError, KeyError, IndexError, TypeError):
        raise LlmResponseError("malformed chat-completion response body") from None
    if not isinstance(content, str) or not content:
        raise LlmResponseError("empty assistant message")
    return content


def make_provider(config: LlmProviderConfig, fixtures_dir: str | Path | None = None):
    fixtures = fixtures_dir or config.fixtures_dir
    if fixtures is not None or config.kind == "mock":
        if fixtures is None:
            raise LlmError("mock provider needs a fixtures directory")
        return MockProvider(fixtures)
    return LiveProvider(config)


def chat(history: DialogueHistory, provider) -> str:
    """One request/response turn; the reply is not appended here."""
    _check_history(history)
    return provider.chat(history)
