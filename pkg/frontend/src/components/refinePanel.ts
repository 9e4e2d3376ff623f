/** Refinement controls: mode selector, instruction box, submit gating with
 * the inline rule text, and the suggestion list under the dialog. */

import { REFINEMENT_MODES } from '../viewState.js';
import type { RefinementMode, SuggestionItem } from '../types.js';

export interface RefinePanelState {
  mode: RefinementMode;
  instruction: string;
  hasReference: boolean;
  blockReason: string | null;
  suggestions: SuggestionItem[];
  overwriteWarning: boolean;
}

export interface RefinePanelHandlers {
  onModeChange?: (mode: RefinementMode) => void;
  onInstructionInput?: (value: string) => void;
  onSubmit?: () => void;
  onApplySuggestion?: (text: string) => void;
}

const MODE_TITLES: Record<RefinementMode, string> = {
  mixed: 'Mixed',
  seed: 'Seed',
  inpaint: 'Inpainting',
  global: 'Global',
};

export function renderRefinePanel(
  container: HTMLElement,
  state: RefinePanelState,
  handlers: RefinePanelHandlers = {},
): void {
  container.replaceChildren();

  const modeRow = document.createElement('div');
  modeRow.className = 'mode-selector';
  for (const mode of REFINEMENT_MODES) {
    const button = document.createElement('button');
    button.type = 'button';
    button.className = 'mode-button';
    button.dataset.mode = mode;
    button.textContent = MODE_TITLES[mode];
    if (mode === state.mode) {
      button.classList.add('active');
    }
    button.addEventListener('click', () => handlers.onModeChange?.(mode));
    modeRow.appendChild(button);
  }
  container.appendChild(modeRow);

  const input = document.createElement('textarea');
  input.className = 'instruction-input';
  input.placeholder = 'Describe the change, or attach a reference image';
  input.value = state.instruction;
  input.addEventListener('input', () => handlers.onInstructionInput?.(input.value));
  container.appendChild(input);

  if (state.overwriteWarning) {
    const warning = document.createElement('p');
    warning.className = 'overwrite-warning';
    warning.textContent =
      'This image contains inpainted edits; regenerating from the prompt may overwrite them.';
    container.appendChild(warning);
  }

  const submit = document.createElement('button');
  submit.type = 'button';
  submit.className = 'submit-refinement';
  submit.textContent = 'Refine';
  submit.disabled = state.blockReason !== null;
  submit.addEventListener('click', () => handlers.onSubmit?.());
  container.appendChild(submit);

  if (state.blockReason !== null) {
    const hint = document.createElement('p');
    hint.className = 'rule-hint';
    hint.textContent = state.blockReason;
    container.appendChild(hint);
  }

  if (state.suggestions.length > 0) {
    const list = document.createElement('ul');
    list.className = 'suggestions';
    for (const item of state.suggestions) {
      const entry = document.createElement('li');
      entry.className = 'suggestion';
      if (item.tag) {
        entry.dataset.tag = item.tag;
      }
      const apply = document.createElement('button');
      apply.type = 'button';
      apply.textContent = item.text;
      apply.addEventListener('click', () => handlers.onApplySuggestion?.(item.text));
      entry.appendChild(apply);
      list.appendChild(entry);
    }
    container.appendChild(list);
  }
}
