/** Typed client for the monitoring service. */

import type {
  DesignBody,
  DesignSummary,
  OcPayload,
  PolicyPayload,
  SessionView,
  SessionEvent,
  Strategy,
  WhatIfPayload,
} from './types.js';

export class ApiError extends Error {
  constructor(
    public status: number,
    public detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

export interface ApiOptions {
  baseUrl?: string;
  token?: string | null;
  fetchImpl?: typeof fetch;
}

export class ApiClient {
  readonly baseUrl: string;
  private token: string | null;
  private fetchImpl: typeof fetch;

  constructor(options: ApiOptions = {}) {
    this.baseUrl = (options.baseUrl ?? '').replace(/\/+$/, '');
    this.token = options.token ?? null;
    this.fetchImpl = options.fetchImpl ?? fetch.bind(globalThis);
  }

  headers(): Record<string, string> {
    const headers: Record<string, string> = { 'Content-Type': 'application/json' };
    if (this.token) headers['Authorization'] = `Bearer ${this.token}`;
    return headers;
  }

  url(path: string): string {
    return `${this.baseUrl}${path}`;
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchImpl(this.url(path), {
      ...init,
      headers: { ...this.headers(), ...(init?.headers ?? {}) },
    });
    if (!resp.ok) {
      let detail = resp.statusText;
      try {
        const body = await resp.json();
        if (body && typeof body.detail === 'string') detail = body.detail;
      } catch {
        /* non-JSON error body */
      }
      throw new ApiError(resp.status, detail);
    }
    return (await resp.json()) as T;
  }

  createDesign(
    design: DesignBody,
    strategy: Strategy,
    epsNewton = 0.01,
  ): Promise<DesignSummary> {
    return this.request<DesignSummary>('/designs', {
      method: 'POST',
      body: JSON.stringify({ design, strategy, eps_newton: epsNewton }),
    });
  }

  getDesign(designId: string): Promise<DesignSummary> {
    return this.request<DesignSummary>(`/designs/${designId}`);
  }

  getPolicy(designId: string): Promise<PolicyPayload> {
    return this.request<PolicyPayload>(`/designs/${designId}/policy`);
  }

  getOc(designId: string, theta: number): Promise<OcPayload> {
    return this.request<OcPayload>(`/designs/${designId}/oc?theta=${theta}`);
  }

  createSession(designId: string): Promise<SessionView> {
    return this.request<SessionView>('/sessions', {
      method: 'POST',
      body: JSON.stringify({ design_id: designId }),
    });
  }

  getSession(sessionId: string): Promise<SessionView> {
    return this.request<SessionView>(`/sessions/${sessionId}`);
  }

  postOutcome(sessionId: string, y: 0 | 1): Promise<SessionEvent> {
    return this.request<SessionEvent>(`/sessions/${sessionId}/outcomes`, {
      method: 'POST',
      body: JSON.stringify({ y }),
    });
  }

  whatIf(sessionId: string): Promise<WhatIfPayload> {
    return this.request<WhatIfPayload>(`/sessions/${sessionId}/whatif`);
  }

  overrideStop(sessionId: string): Promise<SessionView> {
    return this.request<SessionView>(`/sessions/${sessionId}/override-stop`, {
      method: 'POST',
    });
  }
}
