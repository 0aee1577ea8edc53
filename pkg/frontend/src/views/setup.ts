/** Design setup view: submit a design, show the solve summary. */

import { ApiClient, ApiError } from '../api.js';
import type { AppState } from '../state.js';
import type { DesignBody, Strategy } from '../types.js';

function numberInput(form: HTMLFormElement, name: string): number {
  const raw = (form.elements.namedItem(name) as HTMLInputElement).value.trim();
  return Number(raw);
}

export function initSetupView(root: HTMLElement, api: ApiClient, state: AppState): void {
  const form = root.querySelector('#design-form') as HTMLFormElement;
  const result = root.querySelector('#design-result') as HTMLElement;
  const error = root.querySelector('#design-error') as HTMLElement;

  form.addEventListener('submit', async (ev) => {
    ev.preventDefault();
    error.textContent = '';
    result.textContent = 'solving…';
    const strategy = (form.elements.namedItem('strategy') as HTMLSelectElement)
      .value as Strategy;
    const design: DesignBody = {
      n: numberInput(form, 'n'),
      theta0: numberInput(form, 'theta0'),
      theta1: numberInput(form, 'theta1'),
      alpha: numberInput(form, 'alpha'),
    };
    const beta = (form.elements.namedItem('beta') as HTMLInputElement).value.trim();
    if (beta) design.beta = Number(beta);
    const blocks = (form.elements.namedItem('blocks') as HTMLInputElement).value.trim();
    if (blocks) design.blocks = blocks.split(/[,\s]+/).map(Number);
    try {
      const summary = await api.createDesign(design, strategy);
      state.setDesign(summary);
      const rows = [
        ['design id', summary.design_id],
        ['strategy', summary.strategy],
        ['power at theta1', summary.power.toFixed(6)],
        ['size at theta0', summary.size.toFixed(6)],
        ['ESS under theta1', summary.ess_theta1.toFixed(2)],
        ['ESS under theta0', summary.ess_theta0.toFixed(2)],
      ];
      if (summary.lambda_trace) {
        rows.push(['final multiplier', summary.lambda_trace.final_lambda.toFixed(4)]);
        rows.push(['multiplier evaluations', String(summary.lambda_trace.iterations.length)]);
      }
      result.innerHTML =
        '<table>' +
        rows.map(([k, v]) => `<tr><th>${k}</th><td>${v}</td></tr>`).join('') +
        '</table>';
    } catch (exc) {
      result.textContent = '';
      error.textContent =
        exc instanceof ApiError ? exc.message : `request failed: ${exc}`;
    }
  });
}
