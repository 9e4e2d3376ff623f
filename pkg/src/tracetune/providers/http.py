"""Live HTTP-backed provider clients.

All six contracts speak the same plain JSON-over-HTTP convention (documented
in the config schema docs): one POST endpoint per provider, base64 PNG for
rasters, run-length masks. Every client honors its configured timeout and
retry count; a slow or failing backend surfaces as ProviderFailure, never a
hang. Error messages never carry response payloads or credential values.

Requests across one deployment share a FIFO concurrency gate: up to the
configured limit run at once, the rest queue in arrival order.
"""

from __future__ import annotations

import base64
import threading
from collections import deque
from contextlib import contextmanager
from typing import Mapping

import httpx
import numpy as np

from ..errors import MissingCredential, ProviderFailure
from ..geometry import RegionSelection
from ..imaging import ImageData, mask_to_rle, rle_to_mask
from .base import InpaintSample
from .config import ProviderSpec


class ConcurrencyGate:
    """Admits up to `limit` concurrent holders; excess callers queue FIFO."""

    def __init__(self, limit: int):
        if limit < 1:
            raise ValueError("concurrency limit must be >= 1")
        self.limit = limit
        self._lock = threading.Lock()
        self._active = 0
        self._waiters: deque[threading.Event] = deque()

    @contextmanager
    def slot(self):
        ticket: threading.Event | None = None
        with self._lock:
            if self._active < self.limit and not self._waiters:
                self._active += 1
            else:
                ticket = threading.Event()
                self._waiters.append(ticket)
        if ticket is not None:
            ticket.wait()
        try:
            yield
        finally:
            with self._lock:
                if self._waiters:
                    self._waiters.popleft().set()
                else:
                    self._active -= 1


class _HttpClient:
    def __init__(
        self,
        spec: ProviderSpec,
        gate: ConcurrencyGate | None = None,
        environment: Mapping[str, str] | None = None,
        transport: httpx.BaseTransport | None = None,
    ):
        self.spec = spec
        self.gate = gate
        self._environment = environment
        self._client = httpx.Client(timeout=spec.timeout_s, transport=transport)

    def _headers(self) -> dict[str, str]:
        if not self.spec.credential_env:
            return {}
        import os

        env = os.environ if self._environment is None else self._environment
        value = env.get(self.spec.credential_env)
        if value is None:
            raise MissingCredential(self.spec.name, self.spec.credential_env)
        return {"Authorization": f"Bearer {value}"}

    def post(self, payload: dict) -> dict:
        attempts = self.spec.retries + 1
        last: Exception | None = None
        for _ in range(attempts):
            try:
                if self.gate is not None:
                    with self.gate.slot():
                        response = self._client.post(
                            self.spec.endpoint, json=payload, headers=self._headers()
                        )
                else:
                    response = self._client.post(
                        self.spec.endpoint, json=payload, headers=self._headers()
                    )
            except httpx.TimeoutException as exc:
                last = exc
                continue
            except httpx.HTTPError as exc:
                last = exc
                continue
            if response.status_code >= 500:
                last = ProviderFailure(
                    self.spec.name, f"backend returned {response.status_code}", retryable=True
                )
                continue
            if response.status_code >= 400:
                raise ProviderFailure(
                    self.spec.name, f"backend rejected request ({response.status_code})"
                )
            try:
                return response.json()
            except ValueError:
                raise ProviderFailure(self.spec.name, "backend returned non-JSON payload")
        kind = "timed out" if isinstance(last, httpx.TimeoutException) else "failed"
        raise ProviderFailure(
            self.spec.name, f"request {kind} after {attempts} attempt(s)", retryable=True
        )


def _png_b64(image: ImageData) -> str:
    return base64.b64encode(image.to_png_bytes()).decode("ascii")


def _image_from_b64(data: str, provider: str) -> ImageData:
    try:
        return ImageData.from_png_bytes(base64.b64decode(data))
    except Exception as exc:
        raise ProviderFailure(provider, "backend returned an undecodable image") from exc


class HttpTextProvider(_HttpClient):
    def generate(self, prompt: str) -> str:
        doc = self.post({"prompt": prompt})
        text = doc.get("text")
        if not isinstance(text, str):
            raise ProviderFailure(self.spec.name, "backend response missing text")
        return text


class HttpImageProvider(_HttpClient):
    def generate(self, prompt: str, seed: int) -> ImageData:
        doc = self.post({"prompt": prompt, "seed": seed})
        if "image_png_b64" not in doc:
            raise ProviderFailure(self.spec.name, "backend response missing image")
        return _image_from_b64(doc["image_png_b64"], self.spec.name)


class HttpInpaintProvider(_HttpClient):
    def fill(
        self, image: ImageData, mask: np.ndarray, region_prompt: str, count: int
    ) -> list[InpaintSample]:
        doc = self.post(
            {
                "image_png_b64": _png_b64(image),
                "mask_rle": mask_to_rle(mask),
                "region_prompt": region_prompt,
                "count": count,
            }
        )
        samples = doc.get("samples")
        if not isinstance(samples, list) or not samples:
            raise ProviderFailure(self.spec.name, "backend response missing samples")
        out = []
        for item in samples:
            out.append(
                InpaintSample(
                    image=_image_from_b64(item["image_png_b64"], self.spec.name),
                    seed=item.get("seed"),
                )
            )
        return out


class HttpSegmentationProvider(_HttpClient):
    def segment(self, image: ImageData, selection: RegionSelection) -> np.ndarray:
        sel: dict = {"kind": selection.kind}
        if selection.kind == "point":
            sel["point"] = list(selection.point)
        else:
            sel["box"] = list(selection.box.as_tuple())
        doc = self.post({"image_png_b64": _png_b64(image), "selection": sel})
        if "mask_rle" not in doc:
            raise ProviderFailure(self.spec.name, "backend response missing mask")
        try:
            return rle_to_mask(doc["mask_rle"])
        except (KeyError, ValueError) as exc:
            raise ProviderFailure(self.spec.name, "backend returned a malformed mask") from exc


class HttpEmbeddingProvider(_HttpClient):
    @property
    def dimension(self) -> int:
        dim = self.spec.options.get("dimension")
        if not isinstance(dim, int) or dim < 1:
            raise ProviderFailure(self.spec.name, "embedding dimension not configured")
        return dim

    def _vector(self, doc: dict) -> np.ndarray:
        vec = doc.get("vector")
        if not isinstance(vec, list) or len(vec) != self.dimension:
            raise ProviderFailure(self.spec.name, "backend returned a malformed vector")
        v = np.asarray(vec, dtype=np.float64)
        norm = np.linalg.norm(v)
        if not np.isfinite(norm) or norm == 0:
            raise ProviderFailure(self.spec.name, "backend returned a degenerate vector")
        return v / norm

    def embed_text(self, text: str) -> np.ndarray:
        return self._vector(self.post({"text": text}))

    def embed_image(self, image: ImageData) -> np.ndarray:
        return self._vector(self.post({"image_png_b64": _png_b64(image)}))


class HttpCaptionProvider(_HttpClient):
    def caption(self, image: ImageData) -> str:
        doc = self.post({"image_png_b64": _png_b64(image)})
        text = doc.get("caption")
        if not isinstance(text, str) or not text:
            raise ProviderFailure(self.spec.name, "backend response missing caption")
        return text
