/** App shell: three tabs sharing one API client and one state object. */

import { ApiClient } from './api.js';
import { AppState } from './state.js';
import { initExplorerView } from './views/explorer.js';
import { initMonitorView } from './views/monitor.js';
import { initSetupView } from './views/setup.js';

function apiBase(): string {
  const params = new URLSearchParams(window.location.search);
  // served from the service itself (/ui) the API lives on the same origin
  return params.get('api') ?? '';
}

function apiToken(): string | null {
  return new URLSearchParams(window.location.search).get('token');
}

function initTabs(): void {
  const buttons = Array.from(document.querySelectorAll<HTMLButtonElement>('nav button'));
  const sections = Array.from(document.querySelectorAll<HTMLElement>('main > section'));
  for (const button of buttons) {
    button.addEventListener('click', () => {
      for (const other of buttons) other.classList.toggle('active', other === button);
      for (const section of sections) {
        section.style.display = section.id === button.dataset.view ? 'block' : 'none';
      }
    });
  }
}

function main(): void {
  const api = new ApiClient({ baseUrl: apiBase(), token: apiToken() });
  const state = new AppState();
  initTabs();
  initSetupView(document.getElementById('view-setup')!, api, state);
  initExplorerView(document.getElementById('view-explorer')!, api, state);
  initMonitorView(document.getElementById('view-monitor')!, api, state);
  const status = document.getElementById('conn-status')!;
  fetch(api.url('/healthz'))
    .then((r) => {
      status.textContent = r.ok ? 'service connected' : 'service unreachable';
      status.className = r.ok ? 'ok' : 'bad';
    })
    .catch(() => {
      status.textContent = 'service unreachable (retry by reloading)';
      status.className = 'bad';
    });
}

main();
