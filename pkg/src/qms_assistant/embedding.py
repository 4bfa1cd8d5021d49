"""Pluggable text embedding backends.

Default backend is a hashed bag-of-tokens embedder: every token is hashed
to one of d buckets, counts are accumulated, and the vector is
L2-normalized. Fully deterministic and offline, so similarity search is
oracle-verifiable. A JSON-over-HTTP backend speaks the same contract
(request {"text": ...} -> response {"vector": [...]}).
"""

from __future__ import annotations

import hashlib
import re
from typing import Protocol

import numpy as np

from .errors import BackendUnreachableError, ValidationError

DEFAULT_DIM = 256
_TOKEN = re.compile(r"[a-z0-9]+")


class EmbeddingBackend(Protocol):
    dim: int

    def embed(self, text: str) -> np.ndarray: ...


def _bucket(token: str, dim: int) -> int:
    digest = hashlib.sha256(token.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") % dim


class HashedBagEmbedder:
    """Deterministic hashed bag-of-tokens embedder."""

    def __init__(self, dim: int = DEFAULT_DIM):
        if dim <= 0:
            raise ValidationError("embedding dimension must be positive")
        self.dim = dim

    def embed(self, text: str) -> np.ndarray:
        if not text:
            raise ValidationError("cannot embed empty text")
        tokens = _TOKEN.findall(text.casefold())
        if not tokens:
            # Punctuation-only input: hash the raw text as a single token so
            # every non-empty input still maps to a unit vector.
            tokens = [text]
        vec = np.zeros(self.dim, dtype=np.float64)
        for token in tokens:
            vec[_bucket(token, self.dim)] += 1.0
        return vec / np.linalg.norm(vec)


class HttpEmbedder:
    """Remote embedding backend over JSON/HTTP."""

    def __init__(self, endpoint: str, dim: int, timeout: float = 10.0):
        self.endpoint = endpoint
        self.dim = dim
        self.timeout = timeout

    def embed(self, text: str) -> np.ndarray:
        import requests

        if not text:
            raise ValidationError("cannot embed empty text")
        try:
            resp = requests.post(self.endpoint, json={"text": text}, timeout=self.timeout)
            resp.raise_for_status()
        except requests.RequestException as exc:
            raise BackendUnreachableError(f"embedding backend unreachable: {exc}") from exc
        vector = np.asarray(resp.json()["vector"], dtype=np.float64)
        if vector.shape != (self.dim,):
            raise ValidationError(
                f"backend returned dimension {vector.shape}, expected ({self.dim},)"
            )
        norm = np.linalg.norm(vector)
        if norm == 0:
            raise ValidationError("backend returned a zero vector")
        return vector / norm
