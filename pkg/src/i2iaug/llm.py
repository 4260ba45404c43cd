"""Minimal client for OpenAI-style chat-completion endpoints.

Only the request/response shape is assumed::

    POST {base_url}/chat/completions
    {"model": ..., "messages": [{"role": "user", "content": ...}]}
    -> {"choices": [{"message": {"content": ...}}]}

When ``request_logprobs`` is set the request also carries
``"logprobs": true, "top_logprobs": 5`` and the first generated token's
alternatives are returned as probabilities.
"""

from __future__ import annotations

import json
import math
import os
import threading
import urllib.error
import urllib.request
from dataclasses import dataclass

from .exceptions import EndpointError


@dataclass
class EndpointConfig:
    base_url: str
    model: str
    credential_env: str | None = None
    timeout: float = 60.0
    max_in_flight: int = 4
    request_logprobs: bool = False


class ChatClient:
    def __init__(self, config: EndpointConfig):
        self.config = config
        self._slots = threading.BoundedSemaphore(max(1, config.max_in_flight))

    @property
    def url(self):
        return self.config.base_url.rstrip("/") + "/chat/completions"

    def _headers(self):
        headers = {"Content-Type": "application/json"}
        env = self.config.credential_env
        if env:
            token = os.environ.get(env)
            if token:
                headers["Authorization"] = f"Bearer {token}"
        return headers

    def complete(self, prompt: str) -> tuple[str, dict[str, float] | None]:
        """Send one user message; return (text, first-token probabilities or None)."""
        body = {"model": self.config.model,
                "messages": [{"role": "user", "content": prompt}]}
        if self.config.request_logprobs:
            body["logprobs"] = True
            body["top_logprobs"] = 5
        req = urllib.request.Request(self.url, data=json.dumps(body).encode("utf-8"),
                                     headers=self._headers(), method="POST")
        with self._slots:
            try:
                with urllib.request.urlopen(req, timeout=self.config.timeout) as resp:
                    payload = json.loads(resp.read().decode("utf-8"))
            except (urllib.error.URLError, OSError, json.JSONDecodeError) as exc:
                raise EndpointError(f"request to {self.url} failed: {exc}") from exc
        return parse_chat_response(payload)


def parse_chat_response(payload) -> tuple[str, dict[str, float] | None]:
    try:
        choice = payload["choices"][0]
        text = choice["message"]["content"]
    except (KeyError, IndexError, TypeError):
        raise EndpointError("response lacks choices[0].message.content") from None
    if not isinstance(text, str):
        raise EndpointError("message content is not a string")
    token_scores = None
    lp = choice.get("logprobs") if isinstance(choice, dict) else None
    if lp and lp.get("content"):
        first = lp["content"][0]
        alts = first.get("top_logprobs") or [first]
        token_scores = {}
        for alt in alts:
            tok = alt.get("token")
            if tok is None or alt.get("logprob") is None:
                continue
            token_scores[tok] = math.exp(alt["logprob"])
    return text, token_scores
