/**
 * Pure view-model builders: everything here maps server payloads to
 * render-ready structures without computing any statistics of its own.
 */

import type {
  PolicyPayload,
  RecommendedAction,
  SessionStatus,
  SessionView,
  WhatIfPayload,
  ZoneName,
} from './types.js';

export interface PathPoint {
  t: number;
  eValue: number;
  eValueDiscrete: number;
  /** absent on the start marker once outcomes exist: the server reports
   * zones per event, and the UI never classifies states itself. */
  zone?: ZoneName;
}

export interface BannerModel {
  kind: 'none' | 'efficacy' | 'bankruptcy' | 'futility_binding' | 'futility_advisory' | 'completed' | 'stop_pending';
  text: string;
}

export interface WhatIfCard {
  label: 'success' | 'failure';
  outcome: number;
  eValue: number;
  zone: ZoneName;
  conditionalPower: number;
}

export interface SessionViewModel {
  sessionId: string;
  status: SessionStatus;
  t: number;
  n: number;
  eValue: number;
  eValueDiscrete: number;
  zone: ZoneName;
  conditionalPower: number;
  recommended: RecommendedAction | null;
  entryEnabled: boolean;
  overrideVisible: boolean;
  banner: BannerModel;
  path: PathPoint[];
  overrides: number[];
  atBlockBoundary: boolean;
}

const fmt = (x: number, digits = 4): string => {
  if (!isFinite(x)) return String(x);
  return x >= 1000 ? x.toPrecision(6) : x.toFixed(digits);
};

export function buildBanner(view: SessionView): BannerModel {
  switch (view.status) {
    case 'rejected_efficacy':
      return {
        kind: 'efficacy',
        text: `Efficacy: e-value reached ${fmt(view.e_value_discrete)} (boundary hit)`,
      };
    case 'bankrupt':
      return {
        kind: 'bankruptcy',
        text: 'Curtailment by bankruptcy: the e-value is exactly 0; no efficacy conclusion is possible.',
      };
    case 'stopped_futility':
      if (view.zone === 'hopeless') {
        return {
          kind: 'futility_binding',
          text: 'Binding futility stop: the e-value is in the hopeless zone (conditional power 0).',
        };
      }
      return {
        kind: 'futility_advisory',
        text: 'Futility stop applied: the design recommended stopping and no override was recorded.',
      };
    case 'completed':
      return {
        kind: 'completed',
        text: 'Trial completed at the horizon without a boundary hit.',
      };
    case 'open':
      if (view.stop_pending) {
        return {
          kind: 'stop_pending',
          text: 'Advisory futility stop recommended. Continue only with an explicit override (type I error control is unaffected).',
        };
      }
      return { kind: 'none', text: '' };
  }
}

/** The e-process trajectory as sent by the server (t=0 is the start state). */
export function buildPath(view: SessionView): PathPoint[] {
  const start: PathPoint = { t: 0, eValue: 1.0, eValueDiscrete: 1.0 };
  if (view.events.length === 0) start.zone = view.zone;
  const points: PathPoint[] = [start];
  for (const event of view.events) {
    if (event.action.kind === 'stop') continue; // no new state: trial froze
    points.push({
      t: points[points.length - 1].t + 1,
      eValue: event.e_value,
      eValueDiscrete: event.e_value_discrete,
      zone: event.zone,
    });
  }
  return points;
}

export function buildSessionViewModel(view: SessionView): SessionViewModel {
  const open = view.status === 'open';
  return {
    sessionId: view.session_id,
    status: view.status,
    t: view.t,
    n: view.n,
    eValue: view.e_value,
    eValueDiscrete: view.e_value_discrete,
    zone: view.zone,
    conditionalPower: view.conditional_power,
    recommended: view.recommended_action,
    entryEnabled: open,
    overrideVisible: open && view.stop_pending && !(view.recommended_action?.overridden ?? false),
    banner: buildBanner(view),
    path: buildPath(view),
    overrides: view.overrides,
    atBlockBoundary: view.at_block_boundary,
  };
}

export function buildWhatIfCards(payload: WhatIfPayload): WhatIfCard[] {
  return [
    {
      label: 'success',
      outcome: payload.success.outcome,
      eValue: payload.success.e_value_discrete,
      zone: payload.success.zone,
      conditionalPower: payload.success.conditional_power,
    },
    {
      label: 'failure',
      outcome: payload.failure.outcome,
      eValue: payload.failure.e_value_discrete,
      zone: payload.failure.zone,
      conditionalPower: payload.failure.conditional_power,
    },
  ];
}

/**
 * Double-click guard for outcome entry.
 *
 * Only one request may be in flight; the server's sequence number must echo
 * the client's expectation, otherwise the caller must resynchronize by
 * refetching the session before entering anything else.
 */
export class EntryGuard {
  private inFlight = false;
  private expectedSeq: number;

  constructor(eventCount: number) {
    this.expectedSeq = eventCount + 1;
  }

  get nextSeq(): number {
    return this.expectedSeq;
  }

  begin(): boolean {
    if (this.inFlight) return false;
    this.inFlight = true;
    return true;
  }

  /** Returns true when the server echoed the expected sequence number. */
  complete(serverSeq: number): boolean {
    this.inFlight = false;
    if (serverSeq !== this.expectedSeq) {
      return false;
    }
    this.expectedSeq += 1;
    return true;
  }

  abort(): void {
    this.inFlight = false;
  }

  resync(eventCount: number): void {
    this.inFlight = false;
    this.expectedSeq = eventCount + 1;
  }
}

// ---------------------------------------------------------------------------
// Policy heatmap
// ---------------------------------------------------------------------------

export interface HeatmapCell {
  t: number;
  band: number;
  eValue: number;
  bet: number | null;
  zone: ZoneName;
}

export interface HeatmapModel {
  stages: number;
  bands: number;
  eValues: number[];
  /** cell color per [t][band], ready for canvas fill. */
  colors: string[][];
  mUpper: number[];
  mLower: number[];
}

const ZONE_NAMES: Record<string, ZoneName> = {
  R: 'rejected',
  H: 'hopeless',
  A: 'almost_hopeless',
  O: 'open',
  B: 'bankrupt',
};

export function zoneAt(policy: PolicyPayload, t: number, band: number): ZoneName {
  return ZONE_NAMES[policy.zones[t][band]] ?? 'open';
}

/** Continuous ramp from pale yellow (bet 0) to deep blue (bet 1). */
export function betColor(bet: number): string {
  const from = [255, 248, 196];
  const to = [21, 60, 153];
  const mix = from.map((f, i) => Math.round(f + (to[i] - f) * bet));
  return `rgb(${mix[0]},${mix[1]},${mix[2]})`;
}

export const STOP_COLOR = 'rgb(106,27,154)'; // futility stop: distinct purple
export const HZ_COLOR = 'rgb(158,158,158)'; // hopeless zone: gray
export const AHZ_COLOR = 'rgb(209,196,233)'; // almost hopeless: pale violet

export function cellColor(bet: number | null, zone: ZoneName): string {
  if (zone === 'hopeless' || zone === 'bankrupt') return HZ_COLOR;
  if (bet === null) return STOP_COLOR;
  if (zone === 'almost_hopeless' && bet === 0) return AHZ_COLOR;
  return betColor(bet);
}

export function buildHeatmapModel(policy: PolicyPayload): HeatmapModel {
  const colors: string[][] = [];
  for (let t = 0; t < policy.stages; t++) {
    const row: string[] = [];
    for (let band = 0; band < policy.e_values.length; band++) {
      row.push(cellColor(policy.actions[t][band], zoneAt(policy, t, band)));
    }
    colors.push(row);
  }
  return {
    stages: policy.stages,
    bands: policy.e_values.length,
    eValues: policy.e_values,
    colors,
    mUpper: policy.m_upper,
    mLower: policy.m_lower,
  };
}

export function cellAt(policy: PolicyPayload, t: number, band: number): HeatmapCell {
  return {
    t,
    band,
    eValue: policy.e_values[band],
    bet: policy.actions[t][band],
    zone: zoneAt(policy, t, band),
  };
}

/** Band index whose e-value is the largest one <= x (display mapping only). */
export function bandForValue(eValues: number[], x: number): number {
  let lo = 0;
  let hi = eValues.length - 1;
  if (x >= eValues[hi]) return hi;
  if (x <= eValues[0]) return 0;
  while (hi - lo > 1) {
    const mid = (lo + hi) >> 1;
    if (eValues[mid] <= x) lo = mid;
    else hi = mid;
  }
  return lo;
}
