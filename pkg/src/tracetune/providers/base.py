"""The six external-model contracts.

Each contract maps to one model role in the generation pipeline and can be
bound independently to a mock or a live HTTP client. All LLM roles share the
single text-generation contract; they differ only by the template rendered
into the prompt.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np

from ..geometry import RegionSelection
from ..imaging import ImageData


@dataclass(frozen=True)
class InpaintSample:
    """One inpainting sample: the provider's raster plus the seed it reports
    (None when the backend does not expose one)."""

    image: ImageData
    seed: int | None = None


@runtime_checkable
class TextProvider(Protocol):
    def generate(self, prompt: str) -> str: ...


@runtime_checkable
class ImageProvider(Protocol):
    def generate(self, prompt: str, seed: int) -> ImageData: ...


@runtime_checkable
class InpaintProvider(Protocol):
    def fill(
        self, image: ImageData, mask: np.ndarray, region_prompt: str, count: int
    ) -> list[InpaintSample]: ...


@runtime_checkable
class SegmentationProvider(Protocol):
    def segment(self, image: ImageData, selection: RegionSelection) -> np.ndarray: ...


@runtime_checkable
class EmbeddingProvider(Protocol):
    @property
    def dimension(self) -> int: ...

    def embed_image(self, image: ImageData) -> np.ndarray: ...

    def embed_text(self, text: str) -> np.ndarray: ...


@runtime_checkable
class CaptionProvider(Protocol):
    def caption(self, image: ImageData) -> str: ...


@dataclass
class ProviderSet:
    """Everything the engines need, bundled."""

    text: TextProvider
    image: ImageProvider
    inpaint: InpaintProvider
    segmentation: SegmentationProvider
    embedding: EmbeddingProvider
    caption: CaptionProvider
