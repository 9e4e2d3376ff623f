"""Pixel-space selection geometry. Boxes are half-open: [x0, x1) by [y0, y1),
matching array slicing."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import InvalidRequest


@dataclass(frozen=True)
class Box:
    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self):
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise InvalidRequest(f"box must have positive area: {self.as_tuple()}")

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.x0, self.y0, self.x1, self.y1)

    @property
    def width(self) -> int:
        return self.x1 - self.x0

    @property
    def height(self) -> int:
        return self.y1 - self.y0

    def expand(self, pad: int) -> "Box":
        return Box(self.x0 - pad, self.y0 - pad, self.x1 + pad, self.y1 + pad)

    def clamp(self, width: int, height: int) -> "Box":
        return Box(
            max(0, self.x0), max(0, self.y0), min(width, self.x1), min(height, self.y1)
        )

    def contains_point(self, x: int, y: int) -> bool:
        return self.x0 <= x < self.x1 and self.y0 <= y < self.y1


@dataclass(frozen=True)
class RegionSelection:
    """A point or box selection in image pixel coordinates."""

    kind: str
    point: tuple[int, int] | None = None
    box: Box | None = None

    def __post_init__(self):
        if self.kind == "point":
            if self.point is None:
                raise InvalidRequest("point selection needs a point")
        elif self.kind == "box":
            if self.box is None:
                raise InvalidRequest("box selection needs a box")
        else:
            raise InvalidRequest(f"unknown selection kind: {self.kind!r}")

    @classmethod
    def at_point(cls, x: int, y: int) -> "RegionSelection":
        return cls(kind="point", point=(int(x), int(y)))

    @classmethod
    def in_box(cls, x0: int, y0: int, x1: int, y1: int) -> "RegionSelection":
        return cls(kind="box", box=Box(int(x0), int(y0), int(x1), int(y1)))

    def validate_for(self, width: int, height: int) -> None:
        if self.kind == "point":
            x, y = self.point
            if not (0 <= x < width and 0 <= y < height):
                raise InvalidRequest(
                    f"point ({x}, {y}) outside image bounds {width}x{height}"
                )
        else:
            b = self.box
            if not (0 <= b.x0 < b.x1 <= width and 0 <= b.y0 < b.y1 <= height):
                raise InvalidRequest(
                    f"box {b.as_tuple()} outside image bounds {width}x{height}"
                )
