/** Live monitor: outcome entry, zone badge, stop verdicts, what-if cards. */

import { ApiClient, ApiError } from '../api.js';
import type { AppState } from '../state.js';
import type { SessionView, WhatIfPayload } from '../types.js';
import {
  EntryGuard,
  buildSessionViewModel,
  buildWhatIfCards,
  type SessionViewModel,
} from '../viewmodel.js';

const ZONE_BADGES: Record<string, string> = {
  open: 'badge-open',
  almost_hopeless: 'badge-warn',
  hopeless: 'badge-bad',
  bankrupt: 'badge-bad',
  rejected: 'badge-good',
};

function renderRecommended(vm: SessionViewModel): string {
  if (!vm.recommended) return '—';
  if (vm.recommended.kind === 'stop') {
    return 'STOP for futility (advisory)';
  }
  const suffix = vm.recommended.overridden ? ' (stop overridden)' : '';
  return `bet ${vm.recommended.bet}${suffix}`;
}

export function initMonitorView(root: HTMLElement, api: ApiClient, state: AppState): void {
  const createButton = root.querySelector('#create-session') as HTMLButtonElement;
  const loadForm = root.querySelector('#load-session-form') as HTMLFormElement;
  const successButton = root.querySelector('#enter-success') as HTMLButtonElement;
  const failureButton = root.querySelector('#enter-failure') as HTMLButtonElement;
  const overrideButton = root.querySelector('#override-stop') as HTMLButtonElement;
  const banner = root.querySelector('#session-banner') as HTMLElement;
  const summary = root.querySelector('#session-summary') as HTMLElement;
  const whatifBox = root.querySelector('#whatif-cards') as HTMLElement;
  const pathCanvas = root.querySelector('#path-chart') as HTMLCanvasElement;
  const errorBox = root.querySelector('#monitor-error') as HTMLElement;
  const eventLog = root.querySelector('#event-log') as HTMLElement;
  const ctx = pathCanvas.getContext('2d')!;
  pathCanvas.width = 560;
  pathCanvas.height = 220;

  let guard: EntryGuard | null = null;

  function showError(exc: unknown): void {
    errorBox.textContent = exc instanceof ApiError ? exc.message : `request failed: ${exc}`;
  }

  function drawPath(vm: SessionViewModel): void {
    const { width, height } = pathCanvas;
    ctx.clearRect(0, 0, width, height);
    const points = vm.path;
    const values = points.map((p) => Math.max(p.eValueDiscrete, 1e-6));
    const logMin = Math.log(Math.min(...values, 1e-5));
    const logMax = Math.log(Math.max(...values) * 1.5);
    const xFor = (t: number) => 30 + (t / Math.max(vm.n, 1)) * (width - 40);
    const yFor = (v: number) =>
      height - 18 - ((Math.log(Math.max(v, 1e-6)) - logMin) / (logMax - logMin)) * (height - 30);
    ctx.strokeStyle = '#1565c0';
    ctx.lineWidth = 2;
    ctx.beginPath();
    points.forEach((p, i) => {
      const x = xFor(p.t);
      const y = yFor(p.eValueDiscrete);
      if (i === 0) ctx.moveTo(x, y);
      else ctx.lineTo(x, y);
    });
    ctx.stroke();
    ctx.fillStyle = '#1565c0';
    for (const p of points) {
      ctx.beginPath();
      ctx.arc(xFor(p.t), yFor(p.eValueDiscrete), 3, 0, 2 * Math.PI);
      ctx.fill();
    }
    ctx.fillStyle = '#333';
    ctx.font = '11px sans-serif';
    ctx.fillText('e-value (discrete, log scale)', 34, 12);
  }

  function renderEvents(view: SessionView): void {
    const rows = view.events
      .map((e) => {
        const action = e.action.kind === 'stop' ? 'stop' : `bet ${e.action.bet}`;
        const outcome = e.outcome === null ? '—' : String(e.outcome);
        return (
          `<tr><td>${e.seq}</td><td>${outcome}</td><td>${action}</td>` +
          `<td>${e.e_value.toPrecision(6)}</td><td>${e.zone}</td>` +
          `<td>${e.conditional_power.toFixed(4)}</td><td>${e.status}</td></tr>`
        );
      })
      .join('');
    eventLog.innerHTML =
      '<table><tr><th>#</th><th>y</th><th>action</th><th>e-value</th>' +
      '<th>zone</th><th>cond. power</th><th>status</th></tr>' +
      rows +
      '</table>';
  }

  function renderWhatIf(payload: WhatIfPayload | null): void {
    if (!payload) {
      whatifBox.innerHTML = '';
      return;
    }
    const cards = buildWhatIfCards(payload)
      .map(
        (card) => `
        <div class="card ${card.label}">
          <h4>${card.label === 'success' ? 'if success (y=1)' : 'if failure (y=0)'}</h4>
          <div>e-value → ${card.eValue.toPrecision(6)}</div>
          <div>zone → ${card.zone}</div>
          <div>conditional power → ${card.conditionalPower.toFixed(4)}</div>
        </div>`,
      )
      .join('');
    whatifBox.innerHTML =
      cards +
      `<div class="card mix">bet ${payload.bet} · current conditional power ` +
      `${payload.conditional_power_current.toFixed(4)}</div>`;
  }

  async function refreshWhatIf(view: SessionView): Promise<void> {
    if (view.status !== 'open') {
      renderWhatIf(null);
      return;
    }
    try {
      renderWhatIf(await api.whatIf(view.session_id));
    } catch {
      renderWhatIf(null);
    }
  }

  function render(view: SessionView): void {
    const vm = buildSessionViewModel(view);
    banner.className = `banner ${vm.banner.kind}`;
    banner.textContent = vm.banner.text;
    banner.style.display = vm.banner.kind === 'none' ? 'none' : 'block';
    successButton.disabled = !vm.entryEnabled;
    failureButton.disabled = !vm.entryEnabled;
    overrideButton.style.display = vm.overrideVisible ? 'inline-block' : 'none';
    const badge = ZONE_BADGES[vm.zone] ?? 'badge-open';
    summary.innerHTML = `
      <table>
        <tr><th>session</th><td>${vm.sessionId}</td></tr>
        <tr><th>status</th><td>${vm.status}</td></tr>
        <tr><th>analysis time</th><td>${vm.t} / ${vm.n}</td></tr>
        <tr><th>e-value</th><td>${vm.eValue.toPrecision(8)}
          <span class="muted">(discrete ${vm.eValueDiscrete.toPrecision(8)})</span></td></tr>
        <tr><th>zone</th><td><span class="badge ${badge}">${vm.zone}</span></td></tr>
        <tr><th>conditional power</th>
          <td><div class="gauge"><div class="gauge-fill" style="width:${(vm.conditionalPower * 100).toFixed(1)}%"></div></div>
          ${vm.conditionalPower.toFixed(4)}</td></tr>
        <tr><th>recommended action</th><td>${renderRecommended(vm)}</td></tr>
        <tr><th>overrides recorded at</th><td>${vm.overrides.length ? vm.overrides.join(', ') : '—'}</td></tr>
      </table>`;
    drawPath(vm);
    renderEvents(view);
    void refreshWhatIf(view);
  }

  async function reload(sessionId: string): Promise<void> {
    const view = await api.getSession(sessionId);
    guard = new EntryGuard(view.events.length);
    state.setSession(view);
    render(view);
  }

  createButton.addEventListener('click', async () => {
    errorBox.textContent = '';
    if (!state.design) {
      errorBox.textContent = 'create or load a design first';
      return;
    }
    try {
      const view = await api.createSession(state.design.design_id);
      guard = new EntryGuard(view.events.length);
      state.setSession(view);
      render(view);
    } catch (exc) {
      showError(exc);
    }
  });

  loadForm.addEventListener('submit', async (ev) => {
    ev.preventDefault();
    errorBox.textContent = '';
    const sessionId = (
      loadForm.elements.namedItem('session_id') as HTMLInputElement
    ).value.trim();
    try {
      await reload(sessionId);
    } catch (exc) {
      showError(exc);
    }
  });

  async function enter(y: 0 | 1): Promise<void> {
    errorBox.textContent = '';
    const session = state.session;
    if (!session || !guard) return;
    if (!guard.begin()) return; // a click is already in flight
    successButton.disabled = true;
    failureButton.disabled = true;
    try {
      const event = await api.postOutcome(session.session_id, y);
      if (!guard.complete(event.seq)) {
        // sequence mismatch (duplicate or lost ack): resynchronize
        await reload(session.session_id);
        return;
      }
      await reload(session.session_id);
    } catch (exc) {
      guard.abort();
      showError(exc);
      await reload(session.session_id).catch(() => undefined);
    }
  }

  successButton.addEventListener('click', () => void enter(1));
  failureButton.addEventListener('click', () => void enter(0));

  overrideButton.addEventListener('click', async () => {
    const session = state.session;
    if (!session) return;
    try {
      const view = await api.overrideStop(session.session_id);
      guard = new EntryGuard(view.events.length);
      state.setSession(view);
      render(view);
    } catch (exc) {
      showError(exc);
    }
  });
}
