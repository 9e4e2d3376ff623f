/** Wires the panels to the service: main image with selection overlay,
 * structured prompt view, refinement controls, candidate strip, and the
 * version history tree. Everything rendered is a projection of API payloads
 * plus the local in-progress selection. */

import { ApiClient } from './api.js';
import { pollBatch } from './polling.js';
import { ViewState, modeNeedsSelection } from './viewState.js';
import { renderOverlay } from './components/overlay.js';
import { renderPromptPanel } from './components/promptPanel.js';
import { renderRefinePanel } from './components/refinePanel.js';
import { renderCandidates } from './components/candidates.js';
import { renderTreeView } from './components/treeView.js';
import type {
  BatchResponse,
  NodePayload,
  RefinementMode,
  SelectionPayload,
  SuggestionItem,
  TreeResponse,
} from './types.js';

const HOVER_DEBOUNCE_MS = 150;

export class TraceTuneApp {
  readonly state = new ViewState();
  private tree: TreeResponse | null = null;
  private suggestions: SuggestionItem[] = [];
  private instruction = '';
  private hasReference = false;
  private referenceDigest: string | null = null;
  private lastBatch: BatchResponse | null = null;
  private hoverTimer: ReturnType<typeof setTimeout> | null = null;

  private readonly regions: {
    image: HTMLImageElement;
    overlay: HTMLElement;
    prompt: HTMLElement;
    refine: HTMLElement;
    candidates: HTMLElement;
    tree: HTMLElement;
  };

  constructor(
    readonly root: HTMLElement,
    readonly api: ApiClient,
  ) {
    root.replaceChildren();
    root.classList.add('tracetune');

    const mainPanel = document.createElement('div');
    mainPanel.className = 'main-panel';
    const stage = document.createElement('div');
    stage.className = 'image-stage';
    const image = document.createElement('img');
    image.className = 'main-image';
    image.alt = 'active image';
    stage.appendChild(image);
    const overlay = document.createElement('div');
    overlay.className = 'overlay-region';
    stage.appendChild(overlay);
    mainPanel.appendChild(stage);
    root.appendChild(mainPanel);

    const sidePanel = document.createElement('div');
    sidePanel.className = 'side-panel';
    const prompt = document.createElement('div');
    prompt.className = 'prompt-region';
    sidePanel.appendChild(prompt);
    const refine = document.createElement('div');
    refine.className = 'refine-region';
    sidePanel.appendChild(refine);
    root.appendChild(sidePanel);

    const bottomPanel = document.createElement('div');
    bottomPanel.className = 'bottom-panel';
    const candidates = document.createElement('div');
    candidates.className = 'candidates-region';
    bottomPanel.appendChild(candidates);
    const tree = document.createElement('div');
    tree.className = 'tree-region';
    bottomPanel.appendChild(tree);
    root.appendChild(bottomPanel);

    this.regions = { image, overlay, prompt, refine, candidates, tree };
  }

  // --- session lifecycle ---

  async start(initialInput: string): Promise<void> {
    const created = await this.api.createSession(initialInput);
    this.state.bindSession(created.session.session_id, created.session.active_node_id);
    await this.refreshTree();
  }

  /** Rebuild everything from the server; only the in-progress selection is
   * local, so a reload lands here. */
  async load(sessionId: string): Promise<void> {
    const summary = await this.api.getSession(sessionId);
    this.state.bindSession(summary.session_id, summary.active_node_id);
    await this.refreshTree();
  }

  activeNode(): NodePayload | null {
    if (!this.tree || !this.state.activeNodeId) {
      return null;
    }
    return this.tree.nodes.find((n) => n.node_id === this.state.activeNodeId) ?? null;
  }

  async refreshTree(): Promise<void> {
    if (!this.state.sessionId) {
      return;
    }
    this.tree = await this.api.getTree(this.state.sessionId);
    if (this.tree.active_node_id !== null) {
      this.state.activeNodeId = this.tree.active_node_id;
    }
    this.renderAll();
  }

  // --- select and reveal ---

  /** Debounced hover preview; resolves like a click once the pointer rests. */
  hoverAt(x: number, y: number): void {
    if (this.hoverTimer !== null) {
      clearTimeout(this.hoverTimer);
    }
    this.hoverTimer = setTimeout(() => {
      void this.selectAt(x, y);
    }, HOVER_DEBOUNCE_MS);
  }

  async selectAt(x: number, y: number): Promise<void> {
    await this.resolveSelection({ kind: 'point', point: [x, y] });
  }

  async selectBox(x0: number, y0: number, x1: number, y1: number): Promise<void> {
    await this.resolveSelection({ kind: 'box', box: [x0, y0, x1, y1] });
  }

  private async resolveSelection(selection: SelectionPayload): Promise<void> {
    const node = this.activeNode();
    if (!node || !this.state.sessionId) {
      return;
    }
    const result = await this.api.resolve(this.state.sessionId, node.node_id, selection);
    this.state.setResolved({
      selection,
      labels: result.labels,
      maskRle: result.mask_rle,
      bbox: result.bbox,
    });
    this.renderAll();
  }

  cycleLabel(): void {
    this.state.cycleLabel();
    this.renderAll();
  }

  clearSelection(): void {
    this.state.clearSelection();
    this.renderAll();
  }

  // --- refine and compare ---

  setMode(mode: RefinementMode): void {
    this.state.mode = mode;
    this.renderAll();
  }

  setInstruction(text: string): void {
    this.instruction = text;
    this.renderAll();
  }

  async attachReference(file: Blob, name?: string): Promise<void> {
    const uploaded = await this.api.uploadReference(file, name);
    this.referenceDigest = uploaded.digest;
    this.hasReference = true;
    this.renderAll();
  }

  submitBlockReason(): string | null {
    return this.state.submitBlockReason(this.instruction, this.hasReference);
  }

  async submitRefinement(): Promise<BatchResponse> {
    const reason = this.submitBlockReason();
    if (reason !== null) {
      throw new Error(reason);
    }
    const node = this.activeNode();
    if (!node || !this.state.sessionId) {
      throw new Error('no active node to refine');
    }
    const selection = this.state.resolved
      ? { ...this.state.resolved.selection, label: this.state.currentLabel()?.label }
      : undefined;
    const accepted = await this.api.refine(this.state.sessionId, node.node_id, {
      mode: this.state.mode,
      instruction: this.instruction || undefined,
      reference_digest: this.referenceDigest ?? undefined,
      selection: modeNeedsSelection(this.state.mode) ? selection : undefined,
    });
    this.state.beginBatch(accepted.batch_id);
    this.renderAll();
    try {
      this.lastBatch = await pollBatch(this.api, accepted.batch_id);
    } finally {
      this.state.settleBatch();
    }
    await this.refreshTree();
    return this.lastBatch;
  }

  async pickCandidate(nodeId: string): Promise<void> {
    if (!this.state.sessionId) {
      return;
    }
    await this.api.selectNode(this.state.sessionId, nodeId);
    this.state.setActiveNode(nodeId);
    this.lastBatch = null;
    await this.refreshTree();
  }

  async selectTreeNode(nodeId: string): Promise<void> {
    await this.pickCandidate(nodeId);
  }

  // --- suggestions ---

  async fetchGlobalSuggestions(): Promise<void> {
    await this.fetchSuggestions('global');
  }

  async fetchLabelSuggestions(): Promise<void> {
    await this.fetchSuggestions('label_based');
  }

  async fetchExpandedSuggestions(partialInput: string): Promise<void> {
    await this.fetchSuggestions('expanded', partialInput);
  }

  private async fetchSuggestions(
    kind: 'global' | 'label_based' | 'expanded',
    input?: string,
  ): Promise<void> {
    const node = this.activeNode();
    if (!node || !this.state.sessionId) {
      return;
    }
    const label = this.state.currentLabel()?.label;
    const response = await this.api.suggestions({
      kind,
      session_id: this.state.sessionId,
      node_id: node.node_id,
      label: kind === 'global' ? undefined : label,
      input,
    });
    this.suggestions = response.items;
    this.renderAll();
  }

  // --- rendering ---

  private overwriteWarning(): boolean {
    const node = this.activeNode();
    return node?.method === 'inpaint' && this.state.mode !== 'inpaint';
  }

  renderAll(): void {
    const node = this.activeNode();
    if (node) {
      this.regions.image.src = this.api.imageUrl(node.image_url);
      renderPromptPanel(this.regions.prompt, node.prompt, this.state.expandedLabel);
    }
    renderOverlay(this.regions.overlay, this.state.resolved, this.state.currentLabel(), {
      onCycle: () => this.cycleLabel(),
      onLabelSuggestions: () => void this.fetchLabelSuggestions(),
    });
    renderRefinePanel(
      this.regions.refine,
      {
        mode: this.state.mode,
        instruction: this.instruction,
        hasReference: this.hasReference,
        blockReason: this.submitBlockReason(),
        suggestions: this.suggestions,
        overwriteWarning: this.overwriteWarning(),
      },
      {
        onModeChange: (mode) => this.setMode(mode),
        onInstructionInput: (value) => {
          this.instruction = value;
        },
        onSubmit: () => void this.submitRefinement(),
        onApplySuggestion: (text) => this.setInstruction(text),
      },
    );
    renderCandidates(this.regions.candidates, this.api, this.lastBatch, {
      onPick: (nodeId) => void this.pickCandidate(nodeId),
    });
    if (this.tree) {
      renderTreeView(this.regions.tree, this.api, this.tree, {
        onSelect: (nodeId) => void this.selectTreeNode(nodeId),
      });
    }
  }
}

export { ApiClient };
