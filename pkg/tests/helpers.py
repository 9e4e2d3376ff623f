from __future__ import annotations

import numpy as np

from tracetune.imaging import ImageData


def make_image(width: int, height: int, color=(10, 20, 30)) -> ImageData:
    px = np.empty((height, width, 3), dtype=np.uint8)
    px[:, :] = color
    return ImageData(px)


def paint_rect(image: ImageData, box, color) -> ImageData:
    x0, y0, x1, y1 = box
    px = np.array(image.pixels, copy=True)
    px[y0:y1, x0:x1] = color
    return ImageData(px)
