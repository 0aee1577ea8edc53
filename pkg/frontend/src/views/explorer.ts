/** Policy explorer: bet heatmap with zone masks, diagnostic overlays and
 * the live session path. */

import { ApiClient, ApiError } from '../api.js';
import type { AppState } from '../state.js';
import {
  bandForValue,
  buildHeatmapModel,
  buildPath,
  cellAt,
  type HeatmapModel,
} from '../viewmodel.js';

const WIDTH = 820;
const HEIGHT = 560;
const MARGIN = { left: 46, bottom: 26, top: 8, right: 8 };

interface Layout {
  cellWidth: number;
  plotWidth: number;
  plotHeight: number;
  xFor(t: number): number;
  yFor(band: number): number; // top edge of the band's pixel row
  bandAt(y: number): number;
  stageAt(x: number): number;
}

function layoutFor(model: HeatmapModel): Layout {
  const plotWidth = WIDTH - MARGIN.left - MARGIN.right;
  const plotHeight = HEIGHT - MARGIN.top - MARGIN.bottom;
  const cellWidth = plotWidth / model.stages;
  const bandHeight = plotHeight / model.bands;
  return {
    cellWidth,
    plotWidth,
    plotHeight,
    xFor: (t) => MARGIN.left + t * cellWidth,
    yFor: (band) => MARGIN.top + plotHeight - (band + 1) * bandHeight,
    bandAt: (y) =>
      Math.max(
        0,
        Math.min(
          model.bands - 1,
          Math.floor((MARGIN.top + plotHeight - y) / bandHeight),
        ),
      ),
    stageAt: (x) =>
      Math.max(0, Math.min(model.stages - 1, Math.floor((x - MARGIN.left) / cellWidth))),
  };
}

function drawHeatmap(ctx: CanvasRenderingContext2D, model: HeatmapModel, layout: Layout): void {
  ctx.clearRect(0, 0, WIDTH, HEIGHT);
  const bandHeight = layout.plotHeight / model.bands;
  for (let t = 0; t < model.stages; t++) {
    const x = layout.xFor(t);
    for (let band = 0; band < model.bands; band++) {
      ctx.fillStyle = model.colors[t][band];
      ctx.fillRect(x, layout.yFor(band), layout.cellWidth + 0.5, bandHeight + 0.5);
    }
  }
  // y-axis reference lines at e-value 1 and the rejection boundary
  ctx.fillStyle = '#333';
  ctx.font = '11px sans-serif';
  for (const value of [model.eValues[0], 1.0, model.eValues[model.bands - 1]]) {
    const band = bandForValue(model.eValues, value);
    const y = layout.yFor(band);
    ctx.fillText(value >= 1000 ? value.toPrecision(3) : String(value), 4, y + 4);
  }
  ctx.fillText('analysis time', MARGIN.left + layout.plotWidth / 2 - 30, HEIGHT - 8);
}

function drawBounds(ctx: CanvasRenderingContext2D, model: HeatmapModel, layout: Layout): void {
  const series: [number[], string][] = [
    [model.mUpper, '#2e7d32'],
    [model.mLower, '#4527a0'],
  ];
  for (const [values, color] of series) {
    ctx.strokeStyle = color;
    ctx.lineWidth = 1.5;
    ctx.setLineDash([5, 3]);
    ctx.beginPath();
    values.forEach((value, t) => {
      if (t >= model.stages) return;
      const x = layout.xFor(t) + layout.cellWidth / 2;
      const y = layout.yFor(bandForValue(model.eValues, value));
      if (t === 0) ctx.moveTo(x, y);
      else ctx.lineTo(x, y);
    });
    ctx.stroke();
    ctx.setLineDash([]);
  }
}

function drawSessionPath(
  ctx: CanvasRenderingContext2D,
  model: HeatmapModel,
  layout: Layout,
  path: { t: number; eValueDiscrete: number }[],
): void {
  if (path.length === 0) return;
  ctx.strokeStyle = '#e65100';
  ctx.fillStyle = '#e65100';
  ctx.lineWidth = 2;
  ctx.beginPath();
  path.forEach((point, i) => {
    const x = layout.xFor(Math.min(point.t, model.stages - 1)) + layout.cellWidth / 2;
    const y = layout.yFor(bandForValue(model.eValues, point.eValueDiscrete));
    if (i === 0) ctx.moveTo(x, y);
    else ctx.lineTo(x, y);
  });
  ctx.stroke();
  for (const point of path) {
    const x = layout.xFor(Math.min(point.t, model.stages - 1)) + layout.cellWidth / 2;
    const y = layout.yFor(bandForValue(model.eValues, point.eValueDiscrete));
    ctx.beginPath();
    ctx.arc(x, y, 3, 0, 2 * Math.PI);
    ctx.fill();
  }
}

export function initExplorerView(root: HTMLElement, api: ApiClient, state: AppState): void {
  const canvas = root.querySelector('#heatmap') as HTMLCanvasElement;
  const tooltip = root.querySelector('#heatmap-tooltip') as HTMLElement;
  const empty = root.querySelector('#explorer-empty') as HTMLElement;
  const boundsToggle = root.querySelector('#toggle-bounds') as HTMLInputElement;
  const loadButton = root.querySelector('#load-policy') as HTMLButtonElement;
  const errorBox = root.querySelector('#explorer-error') as HTMLElement;
  const ctx = canvas.getContext('2d')!;
  canvas.width = WIDTH;
  canvas.height = HEIGHT;

  let model: HeatmapModel | null = null;
  let layout: Layout | null = null;

  function redraw(): void {
    if (!model || !layout) {
      ctx.clearRect(0, 0, WIDTH, HEIGHT);
      empty.style.display = 'block';
      return;
    }
    empty.style.display = 'none';
    drawHeatmap(ctx, model, layout);
    if (boundsToggle.checked) drawBounds(ctx, model, layout);
    if (state.session) drawSessionPath(ctx, model, layout, buildPath(state.session));
  }

  loadButton.addEventListener('click', async () => {
    errorBox.textContent = '';
    if (!state.design) {
      errorBox.textContent = 'create or load a design first';
      return;
    }
    try {
      const policy = await api.getPolicy(state.design.design_id);
      state.setPolicy(policy);
    } catch (exc) {
      errorBox.textContent =
        exc instanceof ApiError ? exc.message : `request failed: ${exc}`;
    }
  });

  canvas.addEventListener('mousemove', (ev) => {
    if (!model || !layout || !state.policy) {
      tooltip.textContent = '';
      return;
    }
    const rect = canvas.getBoundingClientRect();
    const x = ev.clientX - rect.left;
    const y = ev.clientY - rect.top;
    if (x < MARGIN.left || y > MARGIN.top + layout.plotHeight) {
      tooltip.textContent = '';
      return;
    }
    const cell = cellAt(state.policy, layout.stageAt(x), layout.bandAt(y));
    const action = cell.bet === null ? 'stop' : `bet ${cell.bet}`;
    tooltip.textContent =
      `t=${cell.t}  e-value=${cell.eValue.toPrecision(6)}  ${action}  zone=${cell.zone}`;
  });

  boundsToggle.addEventListener('change', redraw);
  let builtFor: object | null = null;
  state.onChange(() => {
    if (state.policy !== builtFor) {
      builtFor = state.policy;
      model = state.policy ? buildHeatmapModel(state.policy) : null;
      layout = model ? layoutFor(model) : null;
    }
    redraw();
  });
  redraw();
}
