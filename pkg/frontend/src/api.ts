/** Thin typed client over the service's JSON API. */

import type {
  EventRecord,
  ExplainRequest,
  ExplanationResponse,
  Scalar,
  UserProfile,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly code: string,
    message: string,
    readonly status: number,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

type FetchLike = typeof fetch;

async function toApiError(response: Response): Promise<ApiError> {
  let code = `http_${response.status}`;
  let message = response.statusText;
  try {
    const body = (await response.json()) as { code?: string; message?: string };
    if (body.code) code = body.code;
    if (body.message) message = body.message;
  } catch {
    // non-JSON error body; keep the status text
  }
  return new ApiError(code, message, response.status);
}

export class WhyhubClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = fetch,
  ) {}

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
    signal?: AbortSignal,
  ): Promise<T> {
    const response = await this.fetchImpl(this.baseUrl + path, {
      method,
      headers: body === undefined ? undefined : { "content-type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
      signal,
    });
    if (!response.ok) {
      throw await toApiError(response);
    }
    return (await response.json()) as T;
  }

  health(): Promise<{ status: string }> {
    return this.request("GET", "/health");
  }

  users(): Promise<UserProfile[]> {
    return this.request<{ users: UserProfile[] }>("GET", "/users").then((r) => r.users);
  }

  events(fromIso?: string, toIso?: string): Promise<EventRecord[]> {
    const params = new URLSearchParams();
    if (fromIso) params.set("from", fromIso);
    if (toIso) params.set("to", toIso);
    const query = params.size ? `?${params.toString()}` : "";
    return this.request<{ events: EventRecord[] }>("GET", `/events${query}`).then(
      (r) => r.events,
    );
  }

  postEvent(event: {
    entity: string;
    name: string;
    value: Scalar;
    kind?: EventRecord["kind"];
    caused_by?: string;
    ts?: string;
  }): Promise<{ seq: number; fired_rules: string[] }> {
    return this.request("POST", "/events", {
      ts: event.ts ?? new Date().toISOString(),
      entity: event.entity,
      kind: event.kind ?? "property_change",
      name: event.name,
      value: event.value,
      caused_by: event.caused_by ?? "none",
    });
  }

  explain(request: ExplainRequest, signal?: AbortSignal): Promise<ExplanationResponse> {
    return this.request("POST", "/explanations", request, signal);
  }
}
