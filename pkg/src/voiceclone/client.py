"""Minimal HTTP client for :mod:`voiceclone.service`."""

from __future__ import annotations

import base64
from pathlib import Path

import httpx


class ServiceError(RuntimeError):
    def __init__(self, status, detail):
        self.status = status
        self.detail = detail
        super().__init__(f"HTTP {status}: {detail}")


def is_url(location) -> bool:
    return str(location).startswith(("http://", "https://"))


def _samples(paths):
    return [
        {"wav_base64": base64.b64encode(Path(p).read_bytes()).decode("ascii"), "filename": str(p)}
        for p in paths
    ]


class Client:
    def __init__(self, base_url: str, http: httpx.Client | None = None, timeout: float = 60.0):
        self.http = http or httpx.Client(base_url=base_url.rstrip("/"), timeout=timeout)

    def _post(self, route, payload):
        resp = self.http.post(route, json=payload)
        if resp.status_code >= 400:
            try:
                detail = resp.json().get("detail")
            except ValueError:
                detail = resp.text
            raise ServiceError(resp.status_code, detail)
        return resp.json()

    def health(self):
        return self.http.get("/health").json()

    def embed(self, paths, enhance="none"):
        return self._post("/embed", {"samples": _samples(paths), "enhance": enhance})

    def enroll(self, speaker_id, paths, enhance="none"):
        return self._post("/enroll", {"speaker_id": speaker_id, "samples": _samples(paths), "enhance": enhance})

    def similar(self, paths, k=5, enhance="none"):
        return self._post("/similar", {"samples": _samples(paths), "k": k, "enhance": enhance})
