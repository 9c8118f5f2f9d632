"""Formula generators: a chat-completions HTTP client and a scripted replayer."""

from __future__ import annotations

import os
import re
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import httpx
import yaml


@dataclass(frozen=True)
class Expected:
    """What the response to a request must contain."""

    kind: str  # "subtasks", "psi", "phi" or "masks"
    index: int | None = None

    @property
    def key(self) -> str:
        return self.kind if self.index is None else f"{self.kind}{self.index}"


def SubtaskList() -> Expected:
    return Expected("subtasks")


def FormulaPsi(i: int) -> Expected:
    return Expected("psi", i)


def FormulaPhi(i: int) -> Expected:
    return Expected("phi", i)


def Masks(i: int) -> Expected:
    return Expected("masks", i)


@dataclass
class GeneratorRequest:
    system_prompt: str
    messages: list  # [{"role": ..., "content": ...}]
    expected: Expected


class GeneratorError(RuntimeError):
    pass


class Generator(Protocol):
    id: str

    def complete(self, request: GeneratorRequest) -> str: ...


_FENCE = re.compile(r"```mrbt[ \t]*\n(.*?)```", re.DOTALL)


def extract_block(text: str) -> str:
    """Body of the last ```mrbt fenced block."""
    blocks = _FENCE.findall(text)
    if not blocks:
        raise ValueError("response has no ```mrbt fenced block")
    return blocks[-1].strip()


def fence(body: str) -> str:
    return f"```mrbt\n{body}\n```"


class ScriptedGenerator:
    """Replays canned responses keyed by request (``subtasks``, ``psi1``, ...).

    Each key holds a queue; the last response of a queue repeats once the
    others are used up.
    """

    def __init__(self, responses: dict, id: str = "scripted"):
        self.id = id
        self._q = {k: deque(v if isinstance(v, (list, tuple)) else [v]) for k, v in responses.items()}
        self.calls: list = []

    def complete(self, request: GeneratorRequest) -> str:
        key = request.expected.key
        self.calls.append(key)
        q = self._q.get(key)
        if not q:
            raise GeneratorError(f"scripted generator has no response for {key!r}")
        return q.popleft() if len(q) > 1 else q[0]

    @classmethod
    def from_file(cls, path) -> "ScriptedGenerator":
        d = yaml.safe_load(Path(path).read_text())
        if not isinstance(d, dict) or "responses" not in d:
            raise ValueError(f"{path}: expected a mapping with a 'responses' key")
        return cls(d["responses"], id=str(d.get("id", Path(path).stem)))

    @classmethod
    def from_entries(cls, entries, overrides: dict | None = None, id: str = "scripted") -> "ScriptedGenerator":
        """Build fenced responses from subtask dicts (name/psi/phi/nav/interact).

        ``overrides`` maps request keys to lists of raw formula/body texts that
        replace the defaults (for example a buggy then a corrected ``psi1``).
        """
        resp = {"subtasks": [fence(yaml.safe_dump([e["name"] for e in entries]).strip())]}
        for i, e in enumerate(entries, start=1):
            resp[f"psi{i}"] = [fence(e["psi"])]
            resp[f"phi{i}"] = [fence(e["phi"])]
            masks = {"nav": list(e["nav"]), "interact": list(e["interact"])}
            resp[f"masks{i}"] = [fence(yaml.safe_dump(masks, default_flow_style=True).strip())]
        for k, v in (overrides or {}).items():
            resp[k] = [fence(x) for x in v]
        return cls(resp, id=id)


@dataclass
class ChatGenerator:
    """Client for an HTTP chat-completions endpoint.

    Configuration comes from ``MRBT_LLM_ENDPOINT``, ``MRBT_LLM_API_KEY`` and
    ``MRBT_LLM_MODEL`` unless given explicitly.
    """

    endpoint: str | None = None
    api_key: str | None = None
    model: str | None = None
    temperature: float = 0.0
    timeout: float = 120.0
    transport: httpx.BaseTransport | None = field(default=None, repr=False)

    def __post_init__(self):
        self.endpoint = self.endpoint or os.environ.get("MRBT_LLM_ENDPOINT")
        self.api_key = self.api_key or os.environ.get("MRBT_LLM_API_KEY")
        self.model = self.model or os.environ.get("MRBT_LLM_MODEL", "default")
        if not self.endpoint:
            raise GeneratorError("no chat endpoint configured (set MRBT_LLM_ENDPOINT)")

    @property
    def id(self) -> str:
        return f"chat:{self.model}"

    def complete(self, request: GeneratorRequest) -> str:
        body = {
            "model": self.model,
            "temperature": self.temperature,
            "messages": [{"role": "system", "content": request.system_prompt}] + list(request.messages),
        }
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        try:
            with httpx.Client(transport=self.transport, timeout=self.timeout) as client:
                r = client.post(self.endpoint, json=body, headers=headers)
                r.raise_for_status()
                data = r.json()
            return data["choices"][0]["message"]["content"]
        except (httpx.HTTPError, KeyError, IndexError, ValueError) as exc:
            raise GeneratorError(f"chat endpoint request failed: {exc}") from exc
