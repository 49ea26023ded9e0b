"""HTTP clients for remote embedding and chat-completion backends.

Both clients read their credential from an environment variable, retry
transient failures with exponential backoff, and raise RemoteBackendError
carrying the attempt count once retries are exhausted.
"""

from __future__ import annotations

import os
import time
from typing import Sequence

import numpy as np
import requests

from .errors import ConfigError, RemoteBackendError

EMBED_API_KEY_VAR = "EMBED_API_KEY"
CHAT_API_KEY_VAR = "CHAT_API_KEY"

_RETRYABLE_STATUS = {429, 500, 502, 503, 504}


def _require_key(var_name: str) -> str:
    key = os.environ.get(var_name, "").strip()
    if not key:
        raise ConfigError(f"environment variable {var_name} is not set")
    return key


def _post_with_retries(
    url: str,
    payload: dict,
    headers: dict,
    timeout: float,
    max_retries: int,
    backoff: float,
) -> dict:
    """POST JSON and return the decoded body, retrying transient failures."""
    attempts = 0
    last_error = "no attempt made"
    while attempts < max_retries:
        attempts += 1
        try:
            resp = requests.post(url, json=payload, headers=headers, timeout=timeout)
        except requests.RequestException as exc:
            last_error = f"transport error: {exc}"
        else:
            if resp.status_code == 200:
                try:
                    return resp.json()
                except ValueError:
                    last_error = "response body is not JSON"
            elif resp.status_code in _RETRYABLE_STATUS:
                last_error = f"HTTP {resp.status_code}"
            else:
                raise RemoteBackendError(
                    f"{url} returned HTTP {resp.status_code}: {resp.text[:200]}",
                    attempts=attempts,
                )
        if attempts < max_retries:
            time.sleep(backoff * (2 ** (attempts - 1)))
    raise RemoteBackendError(
        f"{url} failed after {attempts} attempts ({last_error})", attempts=attempts
    )


class RemoteEmbedder:
    """Client for an embedding endpoint: POST {model, input: [texts]}.

    The response carries one vector per input, in order, under
    data[i].embedding. Vectors are L2-normalized on receipt so downstream
    cosine math matches the local backend's contract.
    """

    def __init__(
        self,
        base_url: str,
        model: str,
        dim: int = 3072,
        api_key_var: str = EMBED_API_KEY_VAR,
        timeout: float = 30.0,
        max_retries: int = 3,
        backoff: float = 0.5,
    ):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.dim = dim
        self.api_key_var = api_key_var
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff = backoff
        self.backend_id = f"remote:{model}"

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray:
        key = _require_key(self.api_key_var)
        body = _post_with_retries(
            self.base_url,
            payload={"model": self.model, "input": list(texts)},
            headers={"Authorization": f"Bearer {key}"},
            timeout=self.timeout,
            max_retries=self.max_retries,
            backoff=self.backoff,
        )
        try:
            rows = body["data"]
            vectors = [np.asarray(r["embedding"], dtype=np.float64) for r in rows]
        except (KeyError, TypeError) as exc:
            raise RemoteBackendError(f"malformed embedding response: {exc}", attempts=1)
        if len(vectors) != len(texts):
            raise RemoteBackendError(
                f"expected {len(texts)} vectors, got {len(vectors)}", attempts=1
            )
        out = np.stack(vectors)
        if out.shape[1] != self.dim:
            raise RemoteBackendError(
                f"expected dim {self.dim}, got {out.shape[1]}", attempts=1
            )
        norms = np.linalg.norm(out, axis=1)
        if np.any(norms == 0):
            raise RemoteBackendError("zero-norm vector in embedding response", attempts=1)
        return out / norms[:, None]


class ChatClient:
    """Client for a chat-completion endpoint: POST {model, messages}."""

    def __init__(
        self,
        base_url: str,
        model: str,
        api_key_var: str = CHAT_API_KEY_VAR,
        timeout: float = 60.0,
        max_retries: int = 3,
        backoff: float = 0.5,
        temperature: float = 0.0,
    ):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key_var = api_key_var
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff = backoff
        self.temperature = temperature

    def complete(self, messages: Sequence[dict]) -> str:
        key = _require_key(self.api_key_var)
        body = _post_with_retries(
            self.base_url,
            payload={
                "model": self.model,
                "messages": list(messages),
                "temperature": self.temperature,
            },
            headers={"Authorization": f"Bearer {key}"},
            timeout=self.timeout,
            max_retries=self.max_retries,
            backoff=self.backoff,
        )
        try:
            return str(body["choices"][0]["message"]["content"])
        except (KeyError, IndexError, TypeError) as exc:
            raise RemoteBackendError(f"malformed chat response: {exc}", attempts=1)
