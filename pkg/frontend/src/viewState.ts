/** Local view state: the one piece of UI state that is not a projection of
 * the server (the in-progress selection), plus the interaction rules the
 * panels share. A page reload loses exactly this and nothing else. */

import type {
  LabelEntry,
  MaskRle,
  RefinementMode,
  SelectionPayload,
} from './types.js';

export type SelectionMode = 'hover-click' | 'box';

export interface ResolvedSelection {
  selection: SelectionPayload;
  labels: LabelEntry[];
  maskRle: MaskRle;
  bbox: [number, number, number, number];
}

export const REFINEMENT_MODES: RefinementMode[] = ['mixed', 'seed', 'inpaint', 'global'];

/** Modes that operate on a selected label (mirrors the API precondition). */
export function modeNeedsSelection(mode: RefinementMode): boolean {
  return mode !== 'global';
}

export class ViewState {
  sessionId: string | null = null;
  activeNodeId: string | null = null;
  selectionMode: SelectionMode = 'hover-click';
  mode: RefinementMode = 'mixed';

  resolved: ResolvedSelection | null = null;
  cycleIndex = 0;

  pendingBatchId: string | null = null;
  expandedLabel: string | null = null;

  bindSession(sessionId: string, activeNodeId: string | null): void {
    this.sessionId = sessionId;
    this.activeNodeId = activeNodeId;
    this.clearSelection();
    this.pendingBatchId = null;
  }

  setActiveNode(nodeId: string): void {
    this.activeNodeId = nodeId;
    // the selection belongs to the previous image
    this.clearSelection();
  }

  setResolved(resolved: ResolvedSelection): void {
    this.resolved = resolved;
    this.cycleIndex = 0;
    this.expandedLabel = this.currentLabel()?.label ?? null;
  }

  clearSelection(): void {
    this.resolved = null;
    this.cycleIndex = 0;
    this.expandedLabel = null;
  }

  /** The label the badge currently shows; rank 1 right after a selection. */
  currentLabel(): LabelEntry | null {
    if (!this.resolved || this.resolved.labels.length === 0) {
      return null;
    }
    return this.resolved.labels[this.cycleIndex] ?? null;
  }

  /** Advance the badge through the resolved alternatives; past the last one
   * it wraps back to rank 1. The index never reaches the list length. */
  cycleLabel(): LabelEntry | null {
    if (!this.resolved || this.resolved.labels.length === 0) {
      return null;
    }
    this.cycleIndex = (this.cycleIndex + 1) % this.resolved.labels.length;
    this.expandedLabel = this.currentLabel()?.label ?? null;
    return this.currentLabel();
  }

  /** Why the refine form cannot submit right now, or null when it can.
   * Selections stay allowed while a batch is pending (they are read-only);
   * only submission is gated to one batch per session. */
  submitBlockReason(instruction: string, hasReference = false): string | null {
    if (this.pendingBatchId !== null) {
      return 'a refinement is already running for this session';
    }
    if (modeNeedsSelection(this.mode) && this.resolved === null) {
      return `${this.mode} mode requires selecting an element first`;
    }
    if (instruction.trim() === '' && !hasReference) {
      return 'enter an instruction or attach a reference image';
    }
    return null;
  }

  canSubmit(instruction: string, hasReference = false): boolean {
    return this.submitBlockReason(instruction, hasReference) === null;
  }

  beginBatch(batchId: string): void {
    if (this.pendingBatchId !== null) {
      throw new Error('a batch is already pending for this session');
    }
    this.pendingBatchId = batchId;
  }

  settleBatch(): void {
    this.pendingBatchId = null;
  }
}
