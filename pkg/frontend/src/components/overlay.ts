/** Selection overlay for the main image panel: the segmentation mask as
 * semi-transparent SVG spans plus the current label badge with the refresh
 * (cycle) and checkmark (label suggestions) affordances. */

import { rleToSpans } from '../rle.js';
import type { ResolvedSelection } from '../viewState.js';
import type { LabelEntry } from '../types.js';

const SVG_NS = 'http://www.w3.org/2000/svg';

export interface OverlayHandlers {
  onCycle?: () => void;
  onLabelSuggestions?: () => void;
}

export function renderOverlay(
  container: HTMLElement,
  resolved: ResolvedSelection | null,
  current: LabelEntry | null,
  handlers: OverlayHandlers = {},
): void {
  container.replaceChildren();
  if (!resolved || !current) {
    return;
  }
  const [height, width] = resolved.maskRle.size;

  const svg = document.createElementNS(SVG_NS, 'svg');
  svg.classList.add('mask-overlay');
  svg.setAttribute('viewBox', `0 0 ${width} ${height}`);
  svg.setAttribute('preserveAspectRatio', 'none');
  for (const span of rleToSpans(resolved.maskRle)) {
    const rect = document.createElementNS(SVG_NS, 'rect');
    rect.setAttribute('x', String(span.x));
    rect.setAttribute('y', String(span.y));
    rect.setAttribute('width', String(span.width));
    rect.setAttribute('height', '1');
    svg.appendChild(rect);
  }
  container.appendChild(svg);

  const badge = document.createElement('div');
  badge.className = 'label-badge';

  const name = document.createElement('span');
  name.className = 'label-badge-text';
  name.textContent = current.label;
  badge.appendChild(name);

  const score = document.createElement('span');
  score.className = 'label-badge-score';
  score.textContent = current.score.toFixed(2);
  badge.appendChild(score);

  const refresh = document.createElement('button');
  refresh.className = 'cycle-label';
  refresh.type = 'button';
  refresh.title = 'cycle through alternative labels';
  refresh.textContent = '↻';
  refresh.addEventListener('click', () => handlers.onCycle?.());
  badge.appendChild(refresh);

  const accept = document.createElement('button');
  accept.className = 'label-suggestions';
  accept.type = 'button';
  accept.title = 'show suggestions for this label';
  accept.textContent = '✓';
  accept.addEventListener('click', () => handlers.onLabelSuggestions?.());
  badge.appendChild(accept);

  container.appendChild(badge);
}
