"""Chat-completion clients: an HTTP client for OpenAI-compatible gateways and
a scripted client for offline runs and tests."""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import httpx

from dxbench.dialogue import LlmEndpointConfig, UpstreamError


class HttpChatClient:
    """Blocking client for {base_url}/chat/completions endpoints."""

    def __init__(self, config: LlmEndpointConfig):
        self.config = config

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.config.api_key_env_var:
            key = os.environ.get(self.config.api_key_env_var)
            if not key:
                raise UpstreamError(
                    f"environment variable {self.config.api_key_env_var} is not set"
                )
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def complete(self, messages: list[dict[str, str]]) -> str:
        payload = {
            "model": self.config.model_id,
            "temperature": self.config.temperature,
            "messages": messages,
        }
        url = self.config.base_url.rstrip("/") + "/chat/completions"
        try:
            response = httpx.post(
                url, json=payload, headers=self._headers(),
                timeout=self.config.timeout_seconds,
            )
            response.raise_for_status()
            body = response.json()
        except httpx.HTTPError as exc:
            raise UpstreamError(f"chat completion failed: {exc}") from exc
        except ValueError as exc:
            raise UpstreamError(f"non-JSON response: {exc}") from exc
        try:
            content = body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise UpstreamError(f"malformed completion payload: {body!r}") from exc
        if not isinstance(content, str):
            raise UpstreamError("completion content is not text")
        return content


@dataclass
class ScriptedChatClient:
    """Returns queued replies in order; raises UpstreamError when exhausted."""

    replies: list[str]
    calls: list[list[dict[str, str]]] = field(default_factory=list)
    _cursor: int = 0

    def complete(self, messages: list[dict[str, str]]) -> str:
        self.calls.append([dict(m) for m in messages])
        if self._cursor >= len(self.replies):
            raise UpstreamError("scripted client exhausted its replies")
        reply = self.replies[self._cursor]
        self._cursor += 1
        return reply
