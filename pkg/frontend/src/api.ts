/** Thin client for the four service endpoints. No framework, just fetch. */

import type {
  ErrorPayload,
  HealthPayload,
  QueryResponse,
  SessionPayload,
} from "./types.js";

/** The server answered with an error body (4xx/5xx). */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

/** The server could not be reached at all (offline, refused, DNS). */
export class NetworkError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "NetworkError";
  }
}

export class ApiClient {
  constructor(readonly baseUrl: string) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await fetch(this.baseUrl + path, init);
    } catch (err) {
      throw new NetworkError(`cannot reach ${this.baseUrl}: ${String(err)}`);
    }
    const body = (await response.json().catch(() => null)) as unknown;
    if (!response.ok) {
      const payload = (body ?? {}) as Partial<ErrorPayload>;
      throw new ApiError(
        response.status,
        payload.error ?? "Unknown",
        payload.message ?? response.statusText,
      );
    }
    return body as T;
  }

  private post<T>(path: string, payload: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  query(sessionId: string, text: string): Promise<QueryResponse> {
    return this.post<QueryResponse>("/v1/query", { session_id: sessionId, text });
  }

  clarifyOption(sessionId: string, optionId: string): Promise<QueryResponse> {
    return this.post<QueryResponse>("/v1/clarify", {
      session_id: sessionId,
      option_id: optionId,
    });
  }

  clarifyText(sessionId: string, answerText: string): Promise<QueryResponse> {
    return this.post<QueryResponse>("/v1/clarify", {
      session_id: sessionId,
      answer_text: answerText,
    });
  }

  /** Resolves to null when the session does not exist (404). */
  async session(sessionId: string): Promise<SessionPayload | null> {
    try {
      return await this.request<SessionPayload>(`/v1/session/${encodeURIComponent(sessionId)}`);
    } catch (err) {
      if (err instanceof ApiError && err.status === 404) {
        return null;
      }
      throw err;
    }
  }

  health(): Promise<HealthPayload> {
    return this.request<HealthPayload>("/v1/health");
  }
}
