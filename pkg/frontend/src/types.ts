/**
 * Payload types mirroring the monitoring service JSON.
 *
 * Every displayed number comes from these payloads verbatim; the UI never
 * recomputes e-values, zones or conditional powers on its own.
 */

export type Strategy = 'pmax' | 'essmin' | 'constrained' | 'grow';

export type SessionStatus =
  | 'open'
  | 'rejected_efficacy'
  | 'stopped_futility'
  | 'bankrupt'
  | 'completed';

export type ZoneName = 'rejected' | 'hopeless' | 'almost_hopeless' | 'open' | 'bankrupt';

export interface DesignBody {
  n: number;
  theta0: number;
  theta1: number;
  alpha: number;
  beta?: number | null;
  blocks?: number[] | null;
}

export interface DesignSummary {
  design_id: string;
  strategy: Strategy;
  design: DesignBody;
  power: number;
  size: number;
  ess_theta1: number;
  ess_theta0: number;
  policy_id: string;
  lambda_trace?: {
    final_lambda: number;
    eps_newton: number;
    iterations: { lam: number; power: number; ess: number }[];
  };
}

/** Zone code per heatmap cell, one character per e-grid band. */
export type ZoneCode = 'R' | 'H' | 'A' | 'O' | 'B';

export interface PolicyPayload {
  design_id: string;
  stages: number;
  e_values: number[];
  /** actions[t][band]: bet fraction, or null for a futility stop. */
  actions: (number | null)[][];
  /** zones[t]: string of one ZoneCode per band. */
  zones: string[];
  m_upper: number[];
  m_lower: number[];
  analysis_points: number[];
}

export interface OcPayload {
  design_id: string;
  theta: number;
  cumulative_rejection: number[];
  cumulative_futility: number[];
  ahz_occupancy: number[];
  ess: number;
  analysis_points: number[];
}

export interface RecommendedAction {
  kind: 'bet' | 'stop';
  bet?: number;
  advisory: boolean;
  overridden: boolean;
}

export interface SessionEvent {
  session_id: string;
  seq: number;
  outcome: number | null;
  action: { kind: 'bet' | 'stop'; bet: number | null };
  e_value: number;
  e_value_discrete: number;
  zone: ZoneName;
  conditional_power: number;
  status: SessionStatus;
  override_used: boolean;
}

export interface SessionView {
  session_id: string;
  design_id: string;
  strategy: Strategy;
  status: SessionStatus;
  t: number;
  n: number;
  e_value: number;
  e_value_discrete: number;
  zone: ZoneName;
  conditional_power: number;
  recommended_action: RecommendedAction | null;
  stop_pending: boolean;
  at_block_boundary: boolean;
  overrides: number[];
  events: SessionEvent[];
  outcomes: number[];
}

export interface WhatIfBranch {
  outcome: number;
  e_value_discrete: number;
  zone: ZoneName;
  conditional_power: number;
}

export interface WhatIfPayload {
  session_id: string;
  bet: number;
  stop_pending: boolean;
  success: WhatIfBranch;
  failure: WhatIfBranch;
  conditional_power_current: number;
  conditional_power_policy: number;
}
