import { describe, expect, it, vi } from 'vitest';

import { ApiClient, ApiError } from '../src/api.js';

function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { 'Content-Type': 'application/json' },
  });
}

describe('ApiClient', () => {
  it('builds URLs against the configured base', async () => {
    const fetchImpl = vi.fn(async () => jsonResponse(200, { ok: true }));
    const api = new ApiClient({ baseUrl: 'http://svc:8008/', fetchImpl });
    await api.getSession('abc');
    expect(fetchImpl).toHaveBeenCalledWith(
      'http://svc:8008/sessions/abc',
      expect.anything(),
    );
  });

  it('sends the bearer token when configured', async () => {
    const fetchImpl = vi.fn(async () => jsonResponse(200, {}));
    const api = new ApiClient({ token: 'sekrit', fetchImpl });
    await api.getDesign('d1');
    const init = fetchImpl.mock.calls[0][1] as RequestInit;
    expect((init.headers as Record<string, string>)['Authorization']).toBe('Bearer sekrit');
  });

  it('posts outcomes with the expected body', async () => {
    const fetchImpl = vi.fn(async () => jsonResponse(200, { seq: 1 }));
    const api = new ApiClient({ fetchImpl });
    await api.postOutcome('s1', 1);
    const [url, init] = fetchImpl.mock.calls[0] as [string, RequestInit];
    expect(url).toBe('/sessions/s1/outcomes');
    expect(init.method).toBe('POST');
    expect(JSON.parse(init.body as string)).toEqual({ y: 1 });
  });

  it('maps error bodies onto ApiError with the server detail', async () => {
    const fetchImpl = vi.fn(async () =>
      jsonResponse(409, { detail: 'session is bankrupt' }),
    );
    const api = new ApiClient({ fetchImpl });
    await expect(api.postOutcome('s1', 0)).rejects.toThrowError(ApiError);
    await api.postOutcome('s1', 0).catch((exc: ApiError) => {
      expect(exc.status).toBe(409);
      expect(exc.detail).toBe('session is bankrupt');
    });
  });
});
