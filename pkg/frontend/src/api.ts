import type {
  CampaignState,
  CompassDoc,
  FinalizeResponse,
  InsightsResponse,
  ObserveResponse,
  ReportResponse,
  SuggestResponse,
} from './types.js';

// Minimal structural view of fetch so tests can swap in a mock transport.
export type FetchLike = (
  url: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string },
) => Promise<{ status: number; json(): Promise<unknown> }>;

/** Error responses carry {detail} and a status; 409 means duplicate/conflict. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }

  get isConflict(): boolean {
    return this.status === 409;
  }
}

/** Transport problems (DNS, refused, dropped) as opposed to API rejections. */
export class NetworkError extends Error {
  constructor(cause: unknown) {
    super(`request failed: ${String(cause)}`);
  }
}

export class ConsoleApi {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike,
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    let response;
    try {
      response = await this.fetchImpl(this.baseUrl + path, {
        method,
        headers: body === undefined ? undefined : { 'content-type': 'application/json' },
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (cause) {
      throw new NetworkError(cause);
    }
    const payload: unknown = await response.json();
    if (response.status >= 400) {
      const detail =
        payload && typeof payload === 'object' && 'detail' in payload
          ? String((payload as { detail: unknown }).detail)
          : `unexpected status ${response.status}`;
      throw new ApiError(response.status, detail);
    }
    return payload as T;
  }

  health(): Promise<{ status: string; campaigns: number }> {
    return this.request('GET', '/v1/health');
  }

  listCampaigns(): Promise<{ campaigns: { id: string; title: string; status: string }[] }> {
    return this.request('GET', '/v1/campaigns');
  }

  createCampaign(compass: CompassDoc, seed: number): Promise<{ id: string; title: string }> {
    return this.request('POST', '/v1/campaigns', { compass, seed });
  }

  getCampaign(id: string): Promise<CampaignState> {
    return this.request('GET', `/v1/campaigns/${id}`);
  }

  suggest(id: string): Promise<SuggestResponse> {
    return this.request('POST', `/v1/campaigns/${id}/suggest`);
  }

  observe(id: string, trialId: string, value: number): Promise<ObserveResponse> {
    return this.request('POST', `/v1/campaigns/${id}/observe`, {
      trial_id: trialId,
      value,
    });
  }

  insights(id: string): Promise<InsightsResponse> {
    return this.request('GET', `/v1/campaigns/${id}/insights`);
  }

  report(id: string): Promise<ReportResponse> {
    return this.request('GET', `/v1/campaigns/${id}/report`);
  }

  finalize(id: string): Promise<FinalizeResponse> {
    return this.request('POST', `/v1/campaigns/${id}/finalize`);
  }
}
