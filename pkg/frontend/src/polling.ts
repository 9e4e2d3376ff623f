/** Poll a refinement batch until it settles. `done` and `partial` resolve
 * (partial batches still carry usable candidates); `failed` rejects. */

import type { ApiClient } from './api.js';
import type { BatchResponse } from './types.js';

export interface PollOptions {
  intervalMs?: number;
  timeoutMs?: number;
}

export async function pollBatch(
  api: ApiClient,
  batchId: string,
  { intervalMs = 250, timeoutMs = 120_000 }: PollOptions = {},
): Promise<BatchResponse> {
  const deadline = Date.now() + timeoutMs;
  for (;;) {
    const batch = await api.getBatch(batchId);
    if (batch.status === 'done' || batch.status === 'partial') {
      return batch;
    }
    if (batch.status === 'failed') {
      throw new Error(batch.errors[0] ?? 'refinement batch failed');
    }
    if (Date.now() >= deadline) {
      throw new Error(`batch ${batchId} still ${batch.status} after ${timeoutMs} ms`);
    }
    await new Promise((resolve) => setTimeout(resolve, intervalMs));
  }
}
