import { describe, expect, it } from 'vitest';

import { ViewState, modeNeedsSelection } from '../src/viewState.js';
import type { LabelEntry, MaskRle } from '../src/types.js';

function resolvedWith(labels: string[]): {
  selection: { kind: 'point'; point: [number, number] };
  labels: LabelEntry[];
  maskRle: MaskRle;
  bbox: [number, number, number, number];
} {
  return {
    selection: { kind: 'point', point: [3, 4] },
    labels: labels.map((label, i) => ({
      label,
      score: 1 - i * 0.1,
      description: `${label} description`,
      ancestors: [],
    })),
    maskRle: { size: [4, 4], counts: [0, 16] },
    bbox: [0, 0, 4, 4],
  };
}

describe('label cycling', () => {
  it('starts at rank 1 and wraps past the last alternative', () => {
    const state = new ViewState();
    state.setResolved(resolvedWith(['a', 'b', 'c', 'd', 'e']));
    expect(state.currentLabel()?.label).toBe('a');
    const seen = [state.currentLabel()?.label];
    for (let i = 0; i < 5; i += 1) {
      seen.push(state.cycleLabel()?.label);
    }
    expect(seen).toEqual(['a', 'b', 'c', 'd', 'e', 'a']);
  });

  it('keeps the cycle index below the list length', () => {
    const state = new ViewState();
    state.setResolved(resolvedWith(['a', 'b', 'c']));
    for (let i = 0; i < 20; i += 1) {
      state.cycleLabel();
      expect(state.cycleIndex).toBeLessThan(3);
    }
  });

  it('tracks the expanded label with the badge', () => {
    const state = new ViewState();
    state.setResolved(resolvedWith(['a', 'b']));
    expect(state.expandedLabel).toBe('a');
    state.cycleLabel();
    expect(state.expandedLabel).toBe('b');
  });
});

describe('mode gating', () => {
  it('selection-requiring modes block submit without a selection', () => {
    const state = new ViewState();
    for (const mode of ['mixed', 'seed', 'inpaint'] as const) {
      state.mode = mode;
      expect(modeNeedsSelection(mode)).toBe(true);
      expect(state.canSubmit('change it')).toBe(false);
      expect(state.submitBlockReason('change it')).toContain('requires selecting');
    }
  });

  it('global mode submits without a selection', () => {
    const state = new ViewState();
    state.mode = 'global';
    expect(state.canSubmit('make it night')).toBe(true);
  });

  it('requires an instruction or a reference', () => {
    const state = new ViewState();
    state.mode = 'global';
    expect(state.canSubmit('   ')).toBe(false);
    expect(state.canSubmit('', true)).toBe(true);
  });

  it('selection unblocks selection-requiring modes', () => {
    const state = new ViewState();
    state.mode = 'seed';
    state.setResolved(resolvedWith(['a']));
    expect(state.canSubmit('swap it')).toBe(true);
  });
});

describe('pending batch rule', () => {
  it('allows at most one pending batch per session', () => {
    const state = new ViewState();
    state.beginBatch('b1');
    expect(() => state.beginBatch('b2')).toThrow();
    state.settleBatch();
    expect(() => state.beginBatch('b3')).not.toThrow();
  });

  it('a pending batch blocks submission but not selection', () => {
    const state = new ViewState();
    state.mode = 'global';
    state.beginBatch('b1');
    expect(state.canSubmit('more fog')).toBe(false);
    // selection state can still change while the batch runs
    state.setResolved(resolvedWith(['a']));
    expect(state.currentLabel()?.label).toBe('a');
  });
});
