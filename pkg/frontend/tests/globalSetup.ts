/** Launches the Python service with the golden mock fixtures so the UI
 * contract tests run against the real API. */

import { spawn } from 'node:child_process';
import { mkdtempSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { dirname, join, resolve } from 'node:path';
import { fileURLToPath } from 'node:url';
import type { TestProject } from 'vitest/node';

export default async function setup(project: TestProject): Promise<() => void> {
  const here = dirname(fileURLToPath(import.meta.url));
  const repoRoot = resolve(here, '..', '..');
  const config = join(repoRoot, 'golden', 'config.json');
  const storeDir = mkdtempSync(join(tmpdir(), 'tracetune-ui-'));
  const port = 8400 + Math.floor(Math.random() * 500);
  const baseUrl = `http://127.0.0.1:${port}`;

  const server = spawn(
    'python3',
    ['-m', 'tracetune.service', '--config', config, '--store-dir', storeDir, '--port', String(port)],
    { cwd: repoRoot, stdio: ['ignore', 'inherit', 'inherit'] },
  );
  // never keep the runner alive on our account; teardown still holds the handle
  server.unref();

  const deadline = Date.now() + 30_000;
  for (;;) {
    try {
      const response = await fetch(`${baseUrl}/sessions/__ping__`);
      if (response.status === 404) {
        break;
      }
    } catch {
      // not up yet
    }
    if (Date.now() > deadline) {
      throw new Error('tracetune service did not come up within 30s');
    }
    await new Promise((r) => setTimeout(r, 150));
  }

  project.provide('apiUrl', baseUrl);

  return () => {
    if (!server.kill('SIGTERM')) {
      server.kill('SIGKILL');
    }
  };
}

declare module 'vitest' {
  export interface ProvidedContext {
    apiUrl: string;
  }
}
