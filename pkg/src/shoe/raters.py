"""Rater backends: a deterministic offline mock and an OpenAI-compatible
chat-completions client."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from typing import Protocol

logger = logging.getLogger(__name__)

_DIGIT = re.compile(r"(?<![\d.])([0-4])(?!\.?\d)")


def parse_rating(text: str) -> "int | None":
    """First standalone digit 0-4 in a model response, else ``None``."""
    m = _DIGIT.search(text or "")
    return int(m.group(1)) if m else None


class RaterError(Exception):
    """Transport-level failure talking to a rater backend."""


class Rater(Protocol):
    name: str

    def complete(self, prompt: str) -> str: ...


@dataclass
class MockRater:
    """Pure function of (seed, name, prompt) mapped onto the 0-4 scale.

    ``zero_fraction`` controls how often the hash lands on 0, which is what
    screening tests need.  ``overrides`` pins specific prompts (by a
    substring match) to fixed responses for fault injection.
    """

    name: str
    seed: int = 0
    zero_fraction: float = 0.5
    overrides: dict[str, str] = field(default_factory=dict)
    calls: int = 0

    def complete(self, prompt: str) -> str:
        self.calls += 1
        for needle, reply in self.overrides.items():
            if needle in prompt:
                return reply
        h = hashlib.sha256(f"{self.seed}\x00{self.name}\x00{prompt}".encode()).digest()
        u = int.from_bytes(h[:8], "big") / 2**64
        if u < self.zero_fraction:
            return "0"
        rest = (u - self.zero_fraction) / (1.0 - self.zero_fraction)
        return str(1 + min(3, int(rest * 4)))


@dataclass
class HttpRater:
    """Chat-completions endpoint; temperature pinned to 0."""

    name: str
    endpoint: str
    model: str
    api_key_env: "str | None" = None
    timeout: float = 60.0
    max_tokens: int = 8

    def complete(self, prompt: str) -> str:
        headers = {"Content-Type": "application/json"}
        if self.api_key_env:
            key = os.environ.get(self.api_key_env)
            if not key:
                raise RaterError(f"environment variable {self.api_key_env} is not set")
            headers["Authorization"] = f"Bearer {key}"
        body = json.dumps({
            "model": self.model,
            "temperature": 0,
            "max_tokens": self.max_tokens,
            "messages": [{"role": "user", "content": prompt}],
        }).encode()
        req = urllib.request.Request(self.endpoint, data=body, headers=headers, method="POST")
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                payload = json.loads(resp.read().decode())
        except (urllib.error.URLError, TimeoutError, ValueError) as exc:
            raise RaterError(f"{self.name}: {exc}") from exc
        try:
            return payload["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise RaterError(f"{self.name}: unexpected response shape") from exc


@dataclass
class RaterGateway:
    """Wraps a backend with retries and exponential backoff."""

    backend: Rater
    retries: int = 3
    backoff: float = 0.5

    @property
    def name(self) -> str:
        return self.backend.name

    def rate(self, prompt: str) -> "int | None":
        delay = self.backoff
        for attempt in range(self.retries + 1):
            try:
                return parse_rating(self.backend.complete(prompt))
            except RaterError as exc:
                if attempt == self.retries:
                    logger.warning("rater %s gave up after %d attempts: %s", self.name, attempt + 1, exc)
                    return None
                time.sleep(delay)
                delay *= 2
        return None


def gateway_from_config(cfg: dict, seed: int = 0) -> RaterGateway:
    kind = cfg.get("kind", "mock")
    name = cfg["name"]
    if kind == "mock":
        backend: Rater = MockRater(
            name=name,
            seed=int(cfg.get("seed", seed)),
            zero_fraction=float(cfg.get("zero_fraction", 0.5)),
            overrides=dict(cfg.get("overrides", {})),
        )
    elif kind == "http":
        backend = HttpRater(
            name=name,
            endpoint=cfg["endpoint"],
            model=cfg["model"],
            api_key_env=cfg.get("api_key_env"),
            timeout=float(cfg.get("timeout", 60.0)),
        )
    else:
        raise ValueError(f"unknown rater kind {kind!r}")
    return RaterGateway(backend, retries=int(cfg.get("retries", 3)), backoff=float(cfg.get("backoff", 0.5)))
