/** Payload types mirroring the tracetune service JSON contracts. */

export interface ContentElementDoc {
  label: string;
  description: string;
  parent?: string;
}

export interface PromptDoc {
  schema: string;
  theme: string;
  art_style: string;
  content: ContentElementDoc[];
  lighting: string;
  color: string;
  shot_angle: string;
}

export const PROMPT_CATEGORIES = [
  'theme',
  'art_style',
  'content',
  'lighting',
  'color',
  'shot_angle',
] as const;

export type PromptCategory = (typeof PROMPT_CATEGORIES)[number];

export interface RefinementRecordDoc {
  mode: string;
  instruction: string | null;
  label: string | null;
  reference_digest: string | null;
  randomize_seed: boolean;
}

export interface NodePayload {
  node_id: string;
  parent_id: string | null;
  method: 'initial' | 'global' | 'seed' | 'inpaint';
  seed: number;
  image_digest: string;
  image_url: string;
  created_at: number;
  prompt: PromptDoc;
  refinement_record: RefinementRecordDoc | null;
}

export interface SessionSummary {
  session_id: string;
  initial_input: string;
  active_node_id: string | null;
  created_at: number;
  node_count: number;
  generation_errors: unknown[];
}

export interface CreateSessionResponse {
  session: SessionSummary;
  nodes: NodePayload[];
}

export interface TreeResponse {
  session_id: string;
  active_node_id: string | null;
  nodes: NodePayload[];
}

export interface LabelEntry {
  label: string;
  score: number;
  description: string;
  ancestors: string[];
}

export interface MaskRle {
  size: [number, number];
  counts: number[];
}

export interface ResolveResponse {
  labels: LabelEntry[];
  mask_rle: MaskRle;
  bbox: [number, number, number, number];
}

export type SelectionPayload =
  | { kind: 'point'; point: [number, number]; label?: string }
  | { kind: 'box'; box: [number, number, number, number]; label?: string };

export type RefinementMode = 'mixed' | 'seed' | 'inpaint' | 'global';

export type BatchStatus = 'queued' | 'running' | 'done' | 'partial' | 'failed';

export interface RefineAccepted {
  batch_id: string;
  status_url: string;
}

export interface BatchResponse {
  batch_id: string;
  session_id: string;
  node_id: string;
  status: BatchStatus;
  nodes: NodePayload[];
  errors: string[];
  inpaint_overwrite_warning: boolean;
}

export type SuggestionKind = 'global' | 'label_based' | 'expanded';

export interface SuggestionItem {
  text: string;
  tag?: 'refine' | 'replace';
}

export interface SuggestionsResponse {
  kind: SuggestionKind;
  items: SuggestionItem[];
  provenance: {
    prompt_digest: string;
    label: string | null;
    user_input: string | null;
  };
}

export interface ApiErrorBody {
  error: {
    code: string;
    message: string;
    detail: unknown;
    retryable?: boolean;
  };
}
