"""Deterministic mock providers.

The whole primary test suite runs on these, with zero network access:

- text: scripted table (input pattern -> output), strict on misses
- image: raster hashed from (prompt, seed), or scene renders from a fixture
- segmentation: exact-color region matching over synthetic scenes
- embedding: one-hot vectors planted per label and per blob color
- inpainting: solid fill derived from the region prompt
- captioning: digest-keyed table

Scenes are the shared fixture: geometric blobs with a color and a label each.
The scene image provider renders them, the color segmenter recovers them, and
the one-hot embedder scores them, which makes end-to-end label resolution an
exact oracle.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import MalformedConfig, ProviderFailure, UnscriptedInput
from ..geometry import RegionSelection
from ..imaging import ImageData
from ..prompt import normalize_label
from .base import ImageProvider, InpaintSample

SCENE_SCHEMA = "tracetune/scenes/v1"


def _digest_bytes(*parts: str) -> bytes:
    h = hashlib.sha256()
    for part in parts:
        h.update(part.encode())
        h.update(b"\x00")
    return h.digest()


# --- text ---


class ScriptedTextProvider:
    """Table-driven text generation. Each entry matches a substring of the
    rendered prompt; the first matching entry wins. An entry may carry one
    output or a queue consumed across repeated matches (last one repeats).
    Unmatched input raises UnscriptedInput: that is a test authoring error.
    """

    def __init__(self, table: list[dict]):
        self.entries: list[tuple[str, list[str]]] = []
        for row in table:
            outputs = _script_outputs(row)
            self.entries.append((row["match"], outputs))
        self._cursors = [0] * len(self.entries)
        self.call_count = 0

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedTextProvider":
        doc = json.loads(Path(path).read_text())
        rows = doc["entries"] if isinstance(doc, dict) else doc
        return cls(rows)

    def generate(self, prompt: str) -> str:
        self.call_count += 1
        for i, (pattern, outputs) in enumerate(self.entries):
            if pattern in prompt:
                cursor = self._cursors[i]
                self._cursors[i] = min(cursor + 1, len(outputs) - 1)
                return outputs[cursor]
        raise UnscriptedInput(
            f"no table entry matches prompt starting: {prompt[:160]!r}"
        )


def _script_outputs(row: dict) -> list[str]:
    if "outputs" in row:
        items = row["outputs"]
    elif "output" in row:
        items = [row["output"]]
    else:
        raise MalformedConfig(f"script entry needs output(s): {row.get('match')!r}")
    return [item if isinstance(item, str) else json.dumps(item) for item in items]


# --- images ---


class HashImageProvider:
    """Raster fully determined by (prompt, seed): counter-mode SHA-256 bytes
    reshaped into pixels. Equal inputs give bit-identical images."""

    def __init__(self, width: int = 64, height: int = 64):
        self.width = width
        self.height = height
        self.call_count = 0

    def generate(self, prompt: str, seed: int) -> ImageData:
        self.call_count += 1
        need = self.width * self.height * 3
        base = _digest_bytes(prompt, str(seed))
        blocks = []
        counter = 0
        while sum(len(b) for b in blocks) < need:
            blocks.append(hashlib.sha256(base + counter.to_bytes(4, "big")).digest())
            counter += 1
        raw = b"".join(blocks)[:need]
        px = np.frombuffer(raw, dtype=np.uint8).reshape(self.height, self.width, 3)
        return ImageData(px)


@dataclass(frozen=True)
class Blob:
    label: str
    color: tuple[int, int, int]
    shape: str  # "rect" | "circle"
    box: tuple[int, int, int, int] | None = None
    center: tuple[int, int] | None = None
    radius: int | None = None


@dataclass(frozen=True)
class Scene:
    name: str
    size: tuple[int, int]  # (width, height)
    background: tuple[int, int, int]
    blobs: tuple[Blob, ...]


def load_scene_fixture(path: str | Path) -> dict[str, Scene]:
    doc = json.loads(Path(path).read_text())
    if not isinstance(doc, dict) or doc.get("schema") != SCENE_SCHEMA:
        raise MalformedConfig(f"{path}: not a {SCENE_SCHEMA} document")
    scenes: dict[str, Scene] = {}
    for name, raw in doc["scenes"].items():
        blobs = []
        for b in raw["blobs"]:
            blobs.append(
                Blob(
                    label=b["label"],
                    color=tuple(b["color"]),
                    shape=b["shape"],
                    box=tuple(b["box"]) if "box" in b else None,
                    center=tuple(b["center"]) if "center" in b else None,
                    radius=b.get("radius"),
                )
            )
        scenes[name] = Scene(
            name=name,
            size=tuple(raw["size"]),
            background=tuple(raw["background"]),
            blobs=tuple(blobs),
        )
    return scenes


def blob_mask(scene: Scene, blob: Blob) -> np.ndarray:
    w, h = scene.size
    mask = np.zeros((h, w), dtype=bool)
    if blob.shape == "rect":
        x0, y0, x1, y1 = blob.box
        mask[y0:y1, x0:x1] = True
    elif blob.shape == "circle":
        cx, cy = blob.center
        yy, xx = np.ogrid[:h, :w]
        mask[(xx - cx) ** 2 + (yy - cy) ** 2 <= blob.radius**2] = True
    else:
        raise MalformedConfig(f"unknown blob shape {blob.shape!r}")
    return mask


def render_scene(scene: Scene, seed: int | None = None) -> ImageData:
    """Paint the scene's blobs over its background. Later blobs draw on top.
    When a seed is given, a 2x2 tag derived from it lands in the top-left
    corner so sibling variants differ; fixture blobs stay clear of it."""
    w, h = scene.size
    px = np.empty((h, w, 3), dtype=np.uint8)
    px[:, :] = scene.background
    for blob in scene.blobs:
        px[blob_mask(scene, blob)] = blob.color
    if seed is not None:
        tag = _digest_bytes("seed-tag", str(seed))[:3]
        px[0:2, 0:2] = np.frombuffer(tag, dtype=np.uint8)
    return ImageData(px)


class SceneImageProvider:
    """Image generation scripted against the scene fixture: the first table
    entry whose pattern appears in the prompt picks the scene to render."""

    def __init__(self, table: list[dict], scenes: dict[str, Scene]):
        for row in table:
            if row["scene"] not in scenes:
                raise MalformedConfig(f"scene table names unknown scene {row['scene']!r}")
        self.table = [(row["match"], row["scene"]) for row in table]
        self.scenes = scenes
        self.call_count = 0

    def generate(self, prompt: str, seed: int) -> ImageData:
        self.call_count += 1
        for pattern, scene_name in self.table:
            if pattern in prompt:
                return render_scene(self.scenes[scene_name], seed=seed)
        raise UnscriptedInput(
            f"no scene entry matches prompt starting: {prompt[:160]!r}"
        )


class FailingImageProvider:
    """Wraps an image provider and fails on the given call ordinals (1-based).
    Used to exercise partial-batch handling."""

    def __init__(self, inner: ImageProvider, fail_calls: set[int]):
        self.inner = inner
        self.fail_calls = set(fail_calls)
        self.call_count = 0

    def generate(self, prompt: str, seed: int) -> ImageData:
        self.call_count += 1
        if self.call_count in self.fail_calls:
            raise ProviderFailure("image", "scripted failure", retryable=True)
        return self.inner.generate(prompt, seed)


# --- segmentation ---


class ColorRegionSegmentation:
    """Segments by exact color: a point selects every pixel sharing its color;
    a box selects every pixel sharing the modal color inside the box. On solid
    blob scenes this recovers blobs exactly."""

    def __init__(self):
        self.call_count = 0

    def segment(self, image: ImageData, selection: RegionSelection) -> np.ndarray:
        self.call_count += 1
        px = image.pixels
        if selection.kind == "point":
            x, y = selection.point
            color = px[y, x]
        else:
            b = selection.box
            crop = px[b.y0 : b.y1, b.x0 : b.x1].reshape(-1, 3)
            colors, counts = np.unique(crop, axis=0, return_counts=True)
            color = colors[int(np.argmax(counts))]
        return np.all(px == color, axis=2)


class StaticSegmentation:
    """Always returns the configured mask (all-false when none is given)."""

    def __init__(self, mask: np.ndarray | None = None):
        self.mask = None if mask is None else np.asarray(mask, dtype=bool)
        self.call_count = 0

    def segment(self, image: ImageData, selection: RegionSelection) -> np.ndarray:
        self.call_count += 1
        if self.mask is None:
            return np.zeros((image.height, image.width), dtype=bool)
        return self.mask.copy()


# --- embedding ---


def _unit_from_hash(dim: int, *parts: str) -> np.ndarray:
    raw = _digest_bytes("fallback-embedding", *parts)
    rng = np.random.Generator(np.random.PCG64(int.from_bytes(raw[:8], "big")))
    v = rng.normal(size=dim)
    return v / np.linalg.norm(v)


class OneHotEmbeddingProvider:
    """Joint text-image embedding with planted correspondences: each known
    label owns one basis vector; text queries mentioning the label and images
    dominated by the label's blob color both map onto it, so the matching
    pair has cosine similarity exactly 1. Unknown inputs get a deterministic
    hash-derived unit vector."""

    def __init__(
        self,
        labels: list[str],
        colors: dict[tuple[int, int, int], int] | None = None,
        dimension: int | None = None,
        image_digests: dict[str, int] | None = None,
    ):
        self.labels = [normalize_label(l) for l in labels]
        self.colors = dict(colors or {})
        self._dimension = dimension or max(len(self.labels), 1)
        if self._dimension < len(self.labels):
            raise MalformedConfig("embedding dimension smaller than label count")
        self.image_digests = dict(image_digests or {})
        self.image_calls = 0
        self.text_calls = 0

    @classmethod
    def from_scenes(
        cls, scenes: dict[str, Scene], dimension: int | None = None
    ) -> "OneHotEmbeddingProvider":
        labels: list[str] = []
        colors: dict[tuple[int, int, int], int] = {}
        for scene in scenes.values():
            for blob in scene.blobs:
                key = normalize_label(blob.label)
                if key not in labels:
                    labels.append(key)
                colors.setdefault(tuple(blob.color), labels.index(key))
        return cls(labels=labels, colors=colors, dimension=dimension)

    @property
    def dimension(self) -> int:
        return self._dimension

    def _basis(self, index: int) -> np.ndarray:
        v = np.zeros(self._dimension)
        v[index] = 1.0
        return v

    def embed_text(self, text: str) -> np.ndarray:
        self.text_calls += 1
        folded = text.casefold()
        best: int | None = None
        best_len = -1
        for idx, label in enumerate(self.labels):
            if label in folded and len(label) > best_len:
                best, best_len = idx, len(label)
        if best is None:
            return _unit_from_hash(self._dimension, "text", text)
        return self._basis(best)

    def embed_image(self, image: ImageData) -> np.ndarray:
        self.image_calls += 1
        digest = image.digest()
        if digest in self.image_digests:
            return self._basis(self.image_digests[digest])
        if self.colors:
            px = image.pixels.reshape(-1, 3)
            best: int | None = None
            best_count = 0
            for color, idx in self.colors.items():
                count = int(np.all(px == np.asarray(color, dtype=np.uint8), axis=1).sum())
                if count > best_count:
                    best, best_count = idx, count
            if best is not None:
                return self._basis(best)
        return _unit_from_hash(self._dimension, "image", digest)


# --- inpainting ---


class SolidFillInpaintProvider:
    """Fills the mask region with a color hashed from (region prompt, sample
    index). With perturb_outside on, it also flips the low bit of every pixel
    outside the mask, so tests prove the engine's re-composite guarantee
    rather than provider politeness."""

    def __init__(self, perturb_outside: bool = True):
        self.perturb_outside = perturb_outside
        self.call_count = 0

    def fill(
        self, image: ImageData, mask: np.ndarray, region_prompt: str, count: int
    ) -> list[InpaintSample]:
        self.call_count += 1
        samples = []
        for i in range(count):
            raw = _digest_bytes("inpaint", region_prompt, str(i))
            px = np.array(image.pixels, dtype=np.uint8, copy=True)
            if self.perturb_outside:
                px[~mask] ^= 1
            px[mask] = np.frombuffer(raw[:3], dtype=np.uint8)
            samples.append(
                InpaintSample(image=ImageData(px), seed=int.from_bytes(raw[4:8], "big"))
            )
        return samples


# --- captioning ---


class TableCaptionProvider:
    """Caption lookup by image digest, with an optional default. No entry and
    no default raises UnscriptedInput."""

    def __init__(self, table: dict[str, str] | None = None, default: str | None = None):
        self.table = dict(table or {})
        self.default = default
        self.call_count = 0

    def caption(self, image: ImageData) -> str:
        self.call_count += 1
        digest = image.digest()
        if digest in self.table:
            return self.table[digest]
        if self.default is not None:
            return self.default
        raise UnscriptedInput(f"no caption entry for image digest {digest[:12]}")
