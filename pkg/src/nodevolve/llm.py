"""Minimal chat-completions client with retry and backoff.

Only the pieces the variation operators need: one blocking completion call
against an OpenAI-compatible endpoint, exponential backoff on transient
failures, and a hard error once retries run out. Transport and sleeping are
injectable so tests never touch a real endpoint or a real clock.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import requests


class LlmTransportError(RuntimeError):
    """The endpoint could not produce a usable completion."""


@dataclass
class LlmEndpointConfig:
    base_url: str
    model_name: str
    api_key: str = field(default="", repr=False)
    temperature_crossover: float = 1.0
    temperature_mutation: float = 1.5
    timeout: float = 60.0
    max_retries: int = 3
    parallelism: int = 4

    def __post_init__(self) -> None:
        if not self.base_url:
            raise ValueError("base_url is required")
        if not self.model_name:
            raise ValueError("model_name is required")
        if self.timeout <= 0 or self.max_retries < 0 or self.parallelism < 1:
            raise ValueError("timeout, max_retries, parallelism out of range")


class ChatClient:
    """Blocking chat-completions caller with exponential backoff.

    Retries connection errors, 429s, 5xxs, and malformed bodies up to
    max_retries times (sleeping 2^attempt seconds, doubled when the server
    is rate limiting); any other 4xx fails immediately since retrying a
    rejected request cannot help.
    """

    def __init__(self, config: LlmEndpointConfig, session=None, sleep=time.sleep):
        self.config = config
        self._session = session if session is not None else requests.Session()
        self._sleep = sleep

    def complete(self, prompt: str, temperature: float) -> str:
        url = self.config.base_url.rstrip("/") + "/chat/completions"
        payload = {
            "model": self.config.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": temperature,
        }
        headers = {"Authorization": f"Bearer {self.config.api_key}"}
        last_failure = "no attempt made"
        for attempt in range(self.config.max_retries + 1):
            if attempt:
                self._sleep(self._delay(attempt, last_failure))
            try:
                response = self._session.post(
                    url, json=payload, headers=headers, timeout=self.config.timeout
                )
            except requests.RequestException as exc:
                last_failure = f"transport: {exc}"
                continue
            status = getattr(response, "status_code", 0)
            if status == 429 or status >= 500:
                last_failure = f"status {status}"
                continue
            if status != 200:
                raise LlmTransportError(f"endpoint rejected request: status {status}")
            try:
                body = response.json()
                content = body["choices"][0]["message"]["content"]
            except (ValueError, LookupError, TypeError) as exc:
                last_failure = f"malformed body: {exc}"
                continue
            if not isinstance(content, str):
                last_failure = "malformed body: content is not text"
                continue
            return content
        raise LlmTransportError(
            f"gave up after {self.config.max_retries + 1} attempts ({last_failure})"
        )

    @staticmethod
    def _delay(attempt: int, last_failure: str) -> float:
        base = 2.0**attempt
        if last_failure == "status 429":
            return base * 2.0
        return base
