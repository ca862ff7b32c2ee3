/** Typed client for the four service endpoints. */

import type {
  DistributionKind,
  FamilyName,
  FitResult,
  Preview,
  QuantityName,
  Quartiles,
  ServiceError,
} from "./types.js";

export class ApiError extends Error {
  readonly status: number;
  readonly code: string;
  readonly field?: string;
  readonly constraint?: string;

  constructor(status: number, body: ServiceError) {
    super(body.message);
    this.status = status;
    this.code = body.code;
    this.field = body.field;
    this.constraint = body.constraint;
  }
}

async function asError(resp: Response): Promise<ApiError> {
  let body: ServiceError;
  try {
    body = (await resp.json()) as ServiceError;
  } catch {
    body = { code: "http_error", message: `HTTP ${resp.status}` };
  }
  return new ApiError(resp.status, body);
}

export class Api {
  constructor(private readonly base: string = "") {}

  private async request<T>(
    path: string,
    init?: RequestInit,
  ): Promise<T> {
    const resp = await fetch(this.base + path, {
      headers: { "content-type": "application/json" },
      ...init,
    });
    if (!resp.ok) throw await asError(resp);
    return (await resp.json()) as T;
  }

  createSession(t0 = 5.0, t1 = 10.0): Promise<{ id: string; t0: number; t1: number }> {
    return this.request("/sessions", {
      method: "POST",
      body: JSON.stringify({ t0, t1 }),
    });
  }

  putQuantity(
    sessionId: string,
    name: QuantityName,
    quartiles: Quartiles,
    kind: DistributionKind,
    support?: [number, number],
  ): Promise<FitResult> {
    return this.request(`/sessions/${sessionId}/quantities/${name}`, {
      method: "PUT",
      body: JSON.stringify({ ...quartiles, kind, support }),
    });
  }

  getPreview(
    sessionId: string,
    family: FamilyName,
    seed: number,
    nPreview: number,
    signal?: AbortSignal,
  ): Promise<Preview> {
    const params = new URLSearchParams({
      family,
      seed: String(seed),
      n: String(nPreview),
    });
    return this.request(`/sessions/${sessionId}/preview?${params}`, { signal });
  }

  exportConfig(sessionId: string): Promise<Record<string, unknown>> {
    return this.request(`/sessions/${sessionId}/export`);
  }
}
