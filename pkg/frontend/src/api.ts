/** Thin typed client over the service API; fetch is injectable for tests. */

import type {
  AnomalyDoc,
  AreaDoc,
  IntervalsDoc,
  NextItemDoc,
  RolesDoc,
  SealDoc,
  SemanticClassDoc,
  SessionDoc,
  ValuesDoc,
  WhatIfDoc,
  WorkbookDoc,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

export class ApiClient {
  constructor(
    private readonly base: string = "",
    private readonly fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchImpl(this.base + path, init);
    } catch (err) {
      throw new ApiError(0, `service unreachable: ${String(err)}`);
    }
    const body = await response.text();
    if (!response.ok) {
      let message = body;
      try {
        message = (JSON.parse(body) as { error?: string }).error ?? body;
      } catch {
        /* not JSON, keep raw text */
      }
      throw new ApiError(response.status, message);
    }
    return JSON.parse(body) as T;
  }

  private post<T>(path: string, payload: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  workbook(): Promise<WorkbookDoc> {
    return this.request("/api/workbook");
  }

  values(): Promise<ValuesDoc> {
    return this.request("/api/values");
  }

  areas(level: string): Promise<{ areas: AreaDoc[] }> {
    return this.request(`/api/areas?level=${encodeURIComponent(level)}`);
  }

  anomalies(): Promise<{ anomalies: AnomalyDoc[] }> {
    return this.request("/api/anomalies");
  }

  classes(): Promise<{ classes: SemanticClassDoc[] }> {
    return this.request("/api/classes");
  }

  intervals(): Promise<IntervalsDoc> {
    return this.request("/api/intervals");
  }

  roles(): Promise<RolesDoc> {
    return this.request("/api/roles");
  }

  seal(): Promise<SealDoc> {
    return this.request("/api/seal");
  }

  createSession(strategy: string, budgetMinutes: number): Promise<SessionDoc> {
    return this.post("/api/sessions", { strategy, budget_minutes: budgetMinutes });
  }

  session(id: string): Promise<SessionDoc> {
    return this.request(`/api/sessions/${encodeURIComponent(id)}`);
  }

  nextItem(id: string): Promise<NextItemDoc> {
    return this.request(`/api/sessions/${encodeURIComponent(id)}/next`);
  }

  markItem(
    sessionId: string,
    itemId: number,
    state: "CHECKED" | "SUSPECT",
    note: string,
    elapsedMinutes: number,
  ): Promise<SessionDoc> {
    return this.post(`/api/sessions/${encodeURIComponent(sessionId)}/items/${itemId}/mark`, {
      state,
      note,
      elapsed_minutes: elapsedMinutes,
    });
  }

  whatIf(inputs: Record<string, number | string | boolean>): Promise<WhatIfDoc> {
    return this.post("/api/whatif", { inputs });
  }
}
