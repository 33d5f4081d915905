"""Append-only chat transcript."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

ROLES = ("system", "user", "assistant")


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str
    tag: str | None = None  # e.g. "regeneration" for corrective exchanges

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")
        if not self.content:
            raise ValueError("message content must be nonempty")

    def to_dict(self) -> dict:
        d = {"role": self.role, "content": self.content}
        if self.tag:
            d["tag"] = self.tag
        return d

    def wire(self) -> dict:
        return {"role": self.role, "content": self.content}


class DialogueHistory:
    """System prompt first, then strictly alternating assistant/user turns."""

    def __init__(self, messages: list[ChatMessage] | None = None):
        self._messages: list[ChatMessage] = []
        for m in messages or ():
            self.append(m)

    def __len__(self) -> int:
        return len(self._messages)

    def __iter__(self):
        return iter(self._messages)

    def __getitem__(self, i):
        return self._messages[i]

    @property
    def messages(self) -> tuple[ChatMessage, ...]:
        return tuple(self._messages)

    def append(self, message: ChatMessage) -> None:
        msgs = self._messages
        if not msgs:
            if message.role != "system":
                raise ValueError("the first message must be the system prompt")
        elif message.role == "system":
            raise ValueError("only one system prompt is allowed")
        elif msgs[-1].role != "system" and msgs[-1].role == message.role:
            raise ValueError(f"two consecutive {message.role} messages")
        msgs.append(message)

    def add(self, role: str, content: str, tag: str | None = None) -> ChatMessage:
        m = ChatMessage(role, content, tag)
        self.append(m)
        return m

    def window(self, token_budget: int | None = None) -> list[ChatMessage]:
        """Messages to send, dropping the oldest exchanges to fit ``token_budget``.

        The stored history is never modified; the system prompt and the
        latest message are always kept.
        """
        msgs = list(self._messages)
        if token_budget is None or not msgs:
            return msgs
        head, rest = msgs[:1], msgs[1:]
        while len(rest) > 1 and estimate_tokens(head + rest) > token_budget:
            rest = rest[2:] if len(rest) > 2 else rest[1:]
        return head + rest

    def to_jsonl(self) -> str:
        return "".join(json.dumps(m.to_dict(), ensure_ascii=False) + "\n" for m in self._messages)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_jsonl(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "DialogueHistory":
        msgs = []
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if line.strip():
                d = json.loads(line)
                msgs.append(ChatMessage(d["role"], d["content"], d.get("tag")))
        return cls(msgs)


def estimate_tokens(messages) -> int:
    # Rough four-characters-per-token estimate; only used for truncation.
    return sum(len(m.content) // 4 + 4 for m in messages)
