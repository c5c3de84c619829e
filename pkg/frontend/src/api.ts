/** Typed client for the annotation service HTTP API.
 *
 * Talks to exactly five routes: POST /sessions, GET /sessions/{id}/next,
 * POST /sessions/{id}/votes, GET /export?task=..., GET /healthz.
 */

export interface SessionInfo {
  session_id: string;
  task: string;
  rater_id: string;
  queue: string[];
}

export interface PairPayload {
  pair_id: string;
  task: string;
  progress: { done: number; total: number };
  series_a: Record<string, number[]>;
  series_b: Record<string, number[]>;
  observation: Record<string, number[]>;
}

export interface Preference {
  pair_id: string;
  rater_id: string;
  task: string;
  choice: "A" | "B";
  timestamp: number;
}

export interface ExportPayload {
  task: string;
  preferences: Preference[];
  pairs: unknown[];
  report: { pair_count: number; vote_count: number; fleiss_kappa: number | null };
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
    this.name = "ApiError";
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private baseUrl: string,
    private token: string | null = null,
    private fetchImpl: FetchLike = (...args) => fetch(...args),
  ) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  private headers(): Record<string, string> {
    const h: Record<string, string> = { "Content-Type": "application/json" };
    if (this.token) h["X-Apef-Token"] = this.token;
    return h;
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchImpl(this.baseUrl + path, {
      ...init,
      headers: { ...this.headers(), ...(init?.headers ?? {}) },
    });
    if (!resp.ok) {
      let detail = resp.statusText;
      try {
        const body = await resp.json();
        if (body && typeof body.detail === "string") detail = body.detail;
      } catch {
        /* non-JSON error body */
      }
      throw new ApiError(resp.status, detail);
    }
    return (await resp.json()) as T;
  }

  createSession(raterId: string, task: string): Promise<SessionInfo> {
    return this.request<SessionInfo>("/sessions", {
      method: "POST",
      body: JSON.stringify({ rater_id: raterId, task }),
    });
  }

  /** Next unvoted pair, or null when the session queue is exhausted. */
  async nextPair(sessionId: string): Promise<PairPayload | null> {
    const body = await this.request<PairPayload | { done: boolean }>(
      `/sessions/${sessionId}/next`,
    );
    if ("done" in body && body.done === true) return null;
    return body as PairPayload;
  }

  submitVote(sessionId: string, pairId: string, choice: "A" | "B"): Promise<Preference> {
    return this.request<Preference>(`/sessions/${sessionId}/votes`, {
      method: "POST",
      body: JSON.stringify({ pair_id: pairId, choice }),
    });
  }

  exportAnnotations(task: string): Promise<ExportPayload> {
    return this.request<ExportPayload>(`/export?task=${encodeURIComponent(task)}`);
  }

  async healthy(): Promise<boolean> {
    try {
      const resp = await this.fetchImpl(this.baseUrl + "/healthz");
      return resp.ok;
    } catch {
      return false;
    }
  }
}
