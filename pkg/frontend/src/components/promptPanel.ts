/** Structured prompt view: one section per category, content elements as
 * collapsible entries. When a label is traced from the image, its section
 * and its ancestor chain expand automatically. */

import { PROMPT_CATEGORIES, type PromptDoc } from '../types.js';

const CATEGORY_TITLES: Record<string, string> = {
  theme: 'Theme',
  art_style: 'Art style',
  content: 'Content',
  lighting: 'Lighting',
  color: 'Color',
  shot_angle: 'Shot angle',
};

function normalize(label: string): string {
  return label.trim().toLowerCase();
}

/** Labels to open for a traced label: the element itself plus every parent
 * up to its root, so the whole chain is visible in the panel. */
export function expansionChain(prompt: PromptDoc, label: string | null): Set<string> {
  const open = new Set<string>();
  if (label === null) {
    return open;
  }
  const byKey = new Map(prompt.content.map((el) => [normalize(el.label), el]));
  let cursor = byKey.get(normalize(label));
  while (cursor) {
    if (open.has(normalize(cursor.label))) {
      break;
    }
    open.add(normalize(cursor.label));
    cursor = cursor.parent ? byKey.get(normalize(cursor.parent)) : undefined;
  }
  return open;
}

export function renderPromptPanel(
  container: HTMLElement,
  prompt: PromptDoc,
  expandedLabel: string | null,
): void {
  container.replaceChildren();
  const openLabels = expansionChain(prompt, expandedLabel);

  for (const category of PROMPT_CATEGORIES) {
    const section = document.createElement('section');
    section.className = 'prompt-category';
    section.dataset.category = category;

    const heading = document.createElement('h3');
    heading.textContent = CATEGORY_TITLES[category] ?? category;
    section.appendChild(heading);

    if (category === 'content') {
      if (openLabels.size > 0) {
        section.classList.add('expanded');
      }
      for (const element of prompt.content) {
        const details = document.createElement('details');
        details.className = 'content-element';
        details.dataset.label = element.label;
        if (openLabels.has(normalize(element.label))) {
          details.open = true;
          details.classList.add('traced');
        }
        const summary = document.createElement('summary');
        summary.textContent = element.label;
        details.appendChild(summary);
        const body = document.createElement('p');
        body.textContent = element.description;
        details.appendChild(body);
        section.appendChild(details);
      }
    } else {
      const body = document.createElement('p');
      body.textContent = prompt[category];
      section.appendChild(body);
    }
    container.appendChild(section);
  }
}
