/** Typed client for the tracetune service. All UI data comes through here;
 * the UI never talks to model providers directly. */

import type {
  ApiErrorBody,
  BatchResponse,
  CreateSessionResponse,
  RefineAccepted,
  RefinementMode,
  ResolveResponse,
  SelectionPayload,
  SessionSummary,
  SuggestionKind,
  SuggestionsResponse,
  TreeResponse,
} from './types.js';

export class ApiError extends Error {
  readonly code: string;
  readonly status: number;
  readonly detail: unknown;
  readonly retryable: boolean;

  constructor(status: number, body: ApiErrorBody['error']) {
    super(body.message);
    this.name = 'ApiError';
    this.status = status;
    this.code = body.code;
    this.detail = body.detail;
    this.retryable = body.retryable ?? false;
  }
}

export class ApiClient {
  constructor(readonly baseUrl: string) {}

  imageUrl(path: string): string {
    return path.startsWith('http') ? path : this.baseUrl + path;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await fetch(this.baseUrl + path, {
      method,
      headers: body !== undefined ? { 'content-type': 'application/json' } : undefined,
      body: body !== undefined ? JSON.stringify(body) : undefined,
    });
    const payload = await response.json();
    if (!response.ok) {
      const error = (payload as ApiErrorBody).error ?? {
        code: 'internal',
        message: `request failed (${response.status})`,
        detail: null,
      };
      throw new ApiError(response.status, error);
    }
    return payload as T;
  }

  createSession(initialInput: string): Promise<CreateSessionResponse> {
    return this.request('POST', '/sessions', { initial_input: initialInput });
  }

  getSession(sessionId: string): Promise<SessionSummary> {
    return this.request('GET', `/sessions/${sessionId}`);
  }

  getTree(sessionId: string): Promise<TreeResponse> {
    return this.request('GET', `/sessions/${sessionId}/tree`);
  }

  selectNode(sessionId: string, nodeId: string): Promise<SessionSummary> {
    return this.request('POST', `/sessions/${sessionId}/select`, { node_id: nodeId });
  }

  resolve(
    sessionId: string,
    nodeId: string,
    selection: SelectionPayload,
  ): Promise<ResolveResponse> {
    return this.request('POST', `/sessions/${sessionId}/nodes/${nodeId}/resolve`, {
      selection,
    });
  }

  refine(
    sessionId: string,
    nodeId: string,
    body: {
      mode: RefinementMode;
      instruction?: string;
      reference_digest?: string;
      selection?: SelectionPayload;
      randomize_seed?: boolean;
    },
  ): Promise<RefineAccepted> {
    return this.request('POST', `/sessions/${sessionId}/nodes/${nodeId}/refine`, body);
  }

  getBatch(batchId: string): Promise<BatchResponse> {
    return this.request('GET', `/batches/${batchId}`);
  }

  suggestions(body: {
    kind: SuggestionKind;
    session_id: string;
    node_id: string;
    label?: string;
    input?: string;
  }): Promise<SuggestionsResponse> {
    return this.request('POST', '/suggestions', body);
  }

  async uploadReference(file: Blob, name = 'reference.png'): Promise<{ digest: string; caption: string }> {
    const form = new FormData();
    form.append('file', file, name);
    const response = await fetch(this.baseUrl + '/references', { method: 'POST', body: form });
    const payload = await response.json();
    if (!response.ok) {
      throw new ApiError(response.status, (payload as ApiErrorBody).error);
    }
    return payload as { digest: string; caption: string };
  }
}
