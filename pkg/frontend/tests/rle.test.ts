import { describe, expect, it } from 'vitest';

import { rleToMask, rleToSpans } from '../src/rle.js';
import type { MaskRle } from '../src/types.js';

function spansToMask(rle: MaskRle): boolean[] {
  const [height, width] = rle.size;
  const flat = new Array<boolean>(height * width).fill(false);
  for (const span of rleToSpans(rle)) {
    for (let i = 0; i < span.width; i += 1) {
      flat[span.y * width + span.x + i] = true;
    }
  }
  return flat;
}

describe('rle decoding', () => {
  it('decodes a known pattern', () => {
    // 2x4 raster: row 0 = .XX., row 1 = ....
    const rle: MaskRle = { size: [2, 4], counts: [1, 2, 5] };
    expect(rleToSpans(rle)).toEqual([{ x: 1, y: 0, width: 2 }]);
  });

  it('handles a leading true run', () => {
    const rle: MaskRle = { size: [2, 2], counts: [0, 4] };
    expect(rleToSpans(rle)).toEqual([
      { x: 0, y: 0, width: 2 },
      { x: 0, y: 1, width: 2 },
    ]);
  });

  it('splits runs at row boundaries', () => {
    // one run of 5 starting at (1,2) in a 3x4 raster crosses into row 2
    const rle: MaskRle = { size: [3, 4], counts: [6, 5, 1] };
    expect(rleToSpans(rle)).toEqual([
      { x: 2, y: 1, width: 2 },
      { x: 0, y: 2, width: 3 },
    ]);
  });

  it('rejects counts that do not cover the raster', () => {
    expect(() => rleToSpans({ size: [2, 2], counts: [1, 1] })).toThrow();
  });

  it('spans agree with the flat-mask oracle on random masks', () => {
    let seed = 1234;
    const rand = () => {
      // deterministic LCG so failures reproduce
      seed = (seed * 1103515245 + 12345) % 2147483648;
      return seed / 2147483648;
    };
    for (let round = 0; round < 50; round += 1) {
      const height = 1 + Math.floor(rand() * 12);
      const width = 1 + Math.floor(rand() * 12);
      const flat = Array.from({ length: height * width }, () => rand() < 0.4);
      const counts: number[] = [];
      let value = false;
      let run = 0;
      for (const bit of flat) {
        if (bit === value) {
          run += 1;
        } else {
          counts.push(run);
          value = bit;
          run = 1;
        }
      }
      counts.push(run);
      const rle: MaskRle = { size: [height, width], counts };
      expect(rleToMask(rle)).toEqual(flat);
      expect(spansToMask(rle)).toEqual(flat);
    }
  });
});
