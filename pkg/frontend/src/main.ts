/** Browser entry: a single input box on top of the app shell. The service
 * base URL comes from the `?api=` query parameter (default localhost:8351). */

import { ApiClient } from './api.js';
import { TraceTuneApp } from './app.js';

function bootstrap(): void {
  const params = new URLSearchParams(window.location.search);
  const api = new ApiClient(params.get('api') ?? 'http://127.0.0.1:8351');

  const shell = document.getElementById('app');
  if (!shell) {
    throw new Error('missing #app element');
  }

  const form = document.createElement('form');
  form.className = 'start-form';
  const input = document.createElement('input');
  input.type = 'text';
  input.placeholder = 'Describe the scene to design';
  input.className = 'initial-input';
  form.appendChild(input);
  const go = document.createElement('button');
  go.type = 'submit';
  go.textContent = 'Generate';
  form.appendChild(go);

  const root = document.createElement('div');
  shell.append(form, root);

  const app = new TraceTuneApp(root, api);
  form.addEventListener('submit', (event) => {
    event.preventDefault();
    if (input.value.trim()) {
      void app.start(input.value.trim());
    }
  });

  root.addEventListener('click', (event) => {
    const target = event.target as HTMLElement;
    if (target.classList.contains('main-image')) {
      const image = target as HTMLImageElement;
      const rect = image.getBoundingClientRect();
      const scaleX = image.naturalWidth / rect.width;
      const scaleY = image.naturalHeight / rect.height;
      const x = Math.floor((event.clientX - rect.left) * scaleX);
      const y = Math.floor((event.clientY - rect.top) * scaleY);
      void app.selectAt(x, y);
    }
  });
}

bootstrap();
