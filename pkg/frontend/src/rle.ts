/** Mask run-length decoding. The service encodes masks as alternating run
 * lengths over the row-major raster, starting with the False run. */

import type { MaskRle } from './types.js';

export interface RowSpan {
  x: number;
  y: number;
  width: number;
}

/** Decode to per-row horizontal spans of mask-true pixels, ready to render
 * as SVG rects. Spans never cross row boundaries. */
export function rleToSpans(rle: MaskRle): RowSpan[] {
  const [height, width] = rle.size;
  const total = height * width;
  const spans: RowSpan[] = [];
  let pos = 0;
  let value = false;
  for (const run of rle.counts) {
    if (value && run > 0) {
      let start = pos;
      const end = pos + run;
      while (start < end) {
        const y = Math.floor(start / width);
        const rowEnd = Math.min(end, (y + 1) * width);
        spans.push({ x: start % width, y, width: rowEnd - start });
        start = rowEnd;
      }
    }
    pos += run;
    value = !value;
  }
  if (pos !== total) {
    throw new Error(`rle counts sum to ${pos}, expected ${total}`);
  }
  return spans;
}

/** Decode to a flat boolean raster (row-major). Used by tests as the
 * reference oracle for span decoding. */
export function rleToMask(rle: MaskRle): boolean[] {
  const [height, width] = rle.size;
  const flat = new Array<boolean>(height * width).fill(false);
  let pos = 0;
  let value = false;
  for (const run of rle.counts) {
    if (value) {
      flat.fill(true, pos, pos + run);
    }
    pos += run;
    value = !value;
  }
  return flat;
}
