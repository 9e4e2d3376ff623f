"""Raster primitives: RGB images, binary masks, PNG round-trips, digests,
and the run-length mask encoding used in API payloads.

Images are plain numpy arrays (H, W, 3) uint8 wrapped in a tiny value type so
the rest of the engine can pass them around with a stable content digest.
Masks are (H, W) bool arrays.
"""

from __future__ import annotations

import hashlib
import io
from dataclasses import dataclass, field

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import UndecodableImage


@dataclass(frozen=True)
class ImageData:
    """An RGB raster with value semantics: equality and digest are defined by
    pixel content alone."""

    pixels: np.ndarray = field(repr=False)

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.uint8)
        if px.ndim != 3 or px.shape[2] != 3:
            raise ValueError(f"expected (H, W, 3) uint8 raster, got shape {px.shape}")
        px = np.ascontiguousarray(px)
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def size(self) -> tuple[int, int]:
        return (self.width, self.height)

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(f"{self.height}x{self.width}".encode())
        h.update(self.pixels.tobytes())
        return h.hexdigest()

    def to_png_bytes(self) -> bytes:
        buf = io.BytesIO()
        Image.fromarray(np.asarray(self.pixels)).save(buf, format="PNG")
        return buf.getvalue()

    @classmethod
    def from_png_bytes(cls, data: bytes) -> "ImageData":
        try:
            with Image.open(io.BytesIO(data)) as im:
                return cls(np.asarray(im.convert("RGB"), dtype=np.uint8))
        except (UnidentifiedImageError, OSError, ValueError) as exc:
            raise UndecodableImage(f"cannot decode image bytes: {exc}") from exc

    def __eq__(self, other) -> bool:
        if not isinstance(other, ImageData):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(
            np.array_equal(self.pixels, other.pixels)
        )

    def __hash__(self) -> int:
        return hash(self.digest())


def solid_image(width: int, height: int, color: tuple[int, int, int]) -> ImageData:
    px = np.empty((height, width, 3), dtype=np.uint8)
    px[:, :] = color
    return ImageData(px)


def mask_to_rle(mask: np.ndarray) -> dict:
    """Encode a bool mask as alternating run lengths over the row-major
    flattened raster, starting with the length of the leading False run
    (possibly 0). Decoded size comes from the stored shape.
    """
    m = np.asarray(mask, dtype=bool)
    if m.ndim != 2:
        raise ValueError(f"mask must be 2-D, got shape {m.shape}")
    flat = m.ravel()
    # run boundaries: indices where the value changes
    change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate(([0], change, [flat.size]))
    runs = np.diff(bounds).tolist()
    if flat.size and flat[0]:
        runs = [0] + runs
    return {"size": [int(m.shape[0]), int(m.shape[1])], "counts": [int(r) for r in runs]}


def rle_to_mask(rle: dict) -> np.ndarray:
    h, w = (int(v) for v in rle["size"])
    counts = rle["counts"]
    total = sum(counts)
    if total != h * w:
        raise ValueError(f"rle counts sum to {total}, expected {h * w}")
    flat = np.zeros(h * w, dtype=bool)
    pos = 0
    value = False
    for run in counts:
        if value:
            flat[pos : pos + run] = True
        pos += run
        value = not value
    return flat.reshape(h, w)
