/** Side-by-side candidate strip for a finished batch: one slot per result
 * with its method tag; failed slots keep a retry affordance instead of a
 * thumbnail. Picking a candidate makes it the active node. */

import type { ApiClient } from '../api.js';
import type { BatchResponse } from '../types.js';

export interface CandidateHandlers {
  onPick?: (nodeId: string) => void;
  onRetry?: () => void;
}

export function renderCandidates(
  container: HTMLElement,
  api: ApiClient,
  batch: BatchResponse | null,
  handlers: CandidateHandlers = {},
): void {
  container.replaceChildren();
  if (!batch) {
    return;
  }
  const strip = document.createElement('div');
  strip.className = 'candidates';
  strip.dataset.batchId = batch.batch_id;

  for (const node of batch.nodes) {
    const slot = document.createElement('figure');
    slot.className = 'candidate';
    slot.dataset.nodeId = node.node_id;
    slot.dataset.method = node.method;

    const image = document.createElement('img');
    image.src = api.imageUrl(node.image_url);
    image.alt = `${node.method} candidate`;
    image.addEventListener('click', () => handlers.onPick?.(node.node_id));
    slot.appendChild(image);

    const tag = document.createElement('figcaption');
    tag.className = 'method-tag';
    tag.textContent = node.method;
    slot.appendChild(tag);

    strip.appendChild(slot);
  }

  for (const error of batch.errors) {
    const slot = document.createElement('figure');
    slot.className = 'candidate failed';
    const message = document.createElement('p');
    message.textContent = error;
    slot.appendChild(message);
    const retry = document.createElement('button');
    retry.type = 'button';
    retry.className = 'retry-slot';
    retry.textContent = 'Retry';
    retry.addEventListener('click', () => handlers.onRetry?.());
    slot.appendChild(retry);
    strip.appendChild(slot);
  }

  container.appendChild(strip);
}
