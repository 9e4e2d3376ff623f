"""Region-to-label resolution: segmentation, query-image preparation, and
joint text-image embedding similarity.

The pipeline for one selection: segment the region, crop the image to the
padded tight bounding box, darken everything outside the mask to 20%
brightness, embed the crop, score it against one text query per candidate
label, and return the top five matches.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyLabelSet,
    EmptyMask,
    ProviderFailure,
    TraceTuneError,
)
from .geometry import Box, RegionSelection
from .imaging import ImageData
from .providers.base import EmbeddingProvider, SegmentationProvider

# Text query sent to the embedding provider for each candidate label,
# reproduced verbatim including capitalization.
QUERY_TEXT_TEMPLATE = "The bright part is a segmentation of {label}"

DARKEN_FACTOR = 0.2
PAD_FRACTION = 0.1
TOP_K = 5


@dataclass(frozen=True)
class SegmentationResult:
    mask: np.ndarray  # image-sized bool raster, at least one True pixel
    bbox: Box  # tight bound, computed here, never trusted from the provider


@dataclass(frozen=True)
class Provenance:
    source_id: str
    source_digest: str
    crop_box: Box
    padding: int


@dataclass(frozen=True)
class QueryImage:
    """The darkened crop fed to embedding similarity. `mask` is the crop-sized
    slice of the segmentation mask; pixels outside it are darkened, pixels
    inside are bit-identical to the source."""

    pixels: ImageData
    mask: np.ndarray
    provenance: Provenance


@dataclass(frozen=True)
class LabelScore:
    label: str
    score: float


@dataclass(frozen=True)
class ResolveResult:
    scores: list[LabelScore]
    segmentation: SegmentationResult
    query: QueryImage


def tight_bbox(mask: np.ndarray) -> Box:
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    if rows.size == 0:
        raise EmptyMask()
    return Box(int(cols[0]), int(rows[0]), int(cols[-1]) + 1, int(rows[-1]) + 1)


class _EmbeddingContext:
    """Per-image memo of embedding calls, valid for one pixel content."""

    def __init__(self, source_digest: str):
        self.source_digest = source_digest
        self.image_vectors: dict[str, np.ndarray] = {}
        self.text_vectors: dict[str, np.ndarray] = {}


class CorrespondenceEngine:
    def __init__(
        self,
        segmentation: SegmentationProvider,
        embedding: EmbeddingProvider,
        *,
        darken_factor: float = DARKEN_FACTOR,
        pad_fraction: float = PAD_FRACTION,
        top_k: int = TOP_K,
    ):
        self.segmentation = segmentation
        self.embedding = embedding
        self.darken_factor = darken_factor
        self.pad_fraction = pad_fraction
        self.top_k = top_k
        self._contexts: dict[str, _EmbeddingContext] = {}
        self._context_lock = threading.Lock()

    # --- embedding context cache ---

    def precompute_image_embedding_context(self, image_id: str, image: ImageData) -> str:
        """Register a reusable embedding context for this image. Later resolve
        calls on the same id memoize provider encodes; the context is replaced
        when the image content behind the id changes. Purely an optimization:
        resolution without it is identical, just uncached."""
        with self._context_lock:
            ctx = self._contexts.get(image_id)
            if ctx is None or ctx.source_digest != image.digest():
                self._contexts[image_id] = _EmbeddingContext(image.digest())
        return image_id

    def invalidate_context(self, image_id: str) -> None:
        with self._context_lock:
            self._contexts.pop(image_id, None)

    def _context_for(self, image_id: str | None, source_digest: str) -> _EmbeddingContext | None:
        if image_id is None:
            return None
        with self._context_lock:
            ctx = self._contexts.get(image_id)
            if ctx is None:
                return None
            if ctx.source_digest != source_digest:
                ctx = _EmbeddingContext(source_digest)
                self._contexts[image_id] = ctx
            return ctx

    # --- pipeline stages ---

    def segment_region(self, image: ImageData, selection: RegionSelection) -> SegmentationResult:
        selection.validate_for(image.width, image.height)
        try:
            mask = self.segmentation.segment(image, selection)
        except TraceTuneError:
            raise
        except Exception as exc:
            raise ProviderFailure("segmentation", "segmentation call failed") from exc
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (image.height, image.width):
            raise DimensionMismatch(
                f"provider mask shape {mask.shape} does not match image "
                f"{image.height}x{image.width}"
            )
        if not mask.any():
            raise EmptyMask()
        return SegmentationResult(mask=mask, bbox=tight_bbox(mask))

    def prepare_query_image(
        self, image: ImageData, seg: SegmentationResult, *, image_id: str | None = None
    ) -> QueryImage:
        """Crop to the padded bbox and darken outside the mask. Padding is a
        fraction of the bbox's larger side, clamped at the image border."""
        if seg.mask.shape != (image.height, image.width):
            raise DimensionMismatch(
                f"mask shape {seg.mask.shape} does not match image "
                f"{image.height}x{image.width}"
            )
        pad = math.floor(self.pad_fraction * max(seg.bbox.width, seg.bbox.height))
        crop_box = seg.bbox.expand(pad).clamp(image.width, image.height)
        crop = np.array(
            image.pixels[crop_box.y0 : crop_box.y1, crop_box.x0 : crop_box.x1],
            dtype=np.uint8,
            copy=True,
        )
        crop_mask = np.asarray(
            seg.mask[crop_box.y0 : crop_box.y1, crop_box.x0 : crop_box.x1], dtype=bool
        ).copy()
        outside = ~crop_mask
        crop[outside] = np.floor(crop[outside] * self.darken_factor).astype(np.uint8)
        source_digest = image.digest()
        return QueryImage(
            pixels=ImageData(crop),
            mask=crop_mask,
            provenance=Provenance(
                source_id=image_id if image_id is not None else source_digest,
                source_digest=source_digest,
                crop_box=crop_box,
                padding=pad,
            ),
        )

    def resolve_labels(
        self, query: QueryImage, labels: list[str], *, image_id: str | None = None
    ) -> list[LabelScore]:
        """Score the query crop against every candidate label's text query and
        return the top min(top_k, n) labels by cosine similarity, ties broken
        by candidate order."""
        if not labels:
            raise EmptyLabelSet()
        ctx = self._context_for(image_id, query.provenance.source_digest)

        image_vec = self._embed_image(query, ctx)
        scored: list[LabelScore] = []
        for label in labels:
            text = QUERY_TEXT_TEMPLATE.format(label=label)
            text_vec = self._embed_text(text, ctx)
            score = float(np.clip(np.dot(image_vec, text_vec), -1.0, 1.0))
            scored.append(LabelScore(label=label, score=score))
        ranked = sorted(scored, key=lambda ls: -ls.score)  # stable: ties keep order
        return ranked[: min(self.top_k, len(ranked))]

    def resolve_selection(
        self,
        image: ImageData,
        selection: RegionSelection,
        labels: list[str],
        *,
        image_id: str | None = None,
    ) -> ResolveResult:
        seg = self.segment_region(image, selection)
        query = self.prepare_query_image(image, seg, image_id=image_id)
        scores = self.resolve_labels(query, labels, image_id=image_id)
        return ResolveResult(scores=scores, segmentation=seg, query=query)

    # --- provider wrappers ---

    def _embed_image(self, query: QueryImage, ctx: _EmbeddingContext | None) -> np.ndarray:
        key = query.pixels.digest()
        if ctx is not None:
            with self._context_lock:
                cached = ctx.image_vectors.get(key)
            if cached is not None:
                return cached
        try:
            vec = np.asarray(self.embedding.embed_image(query.pixels), dtype=np.float64)
        except TraceTuneError:
            raise
        except Exception as exc:
            raise ProviderFailure("embedding", "image embedding failed") from exc
        if ctx is not None:
            with self._context_lock:
                ctx.image_vectors[key] = vec
        return vec

    def _embed_text(self, text: str, ctx: _EmbeddingContext | None) -> np.ndarray:
        if ctx is not None:
            with self._context_lock:
                cached = ctx.text_vectors.get(text)
            if cached is not None:
                return cached
        try:
            vec = np.asarray(self.embedding.embed_text(text), dtype=np.float64)
        except TraceTuneError:
            raise
        except Exception as exc:
            raise ProviderFailure("embedding", "text embedding failed") from exc
        if ctx is not None:
            with self._context_lock:
                ctx.text_vectors[text] = vec
        return vec
