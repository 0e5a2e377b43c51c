// Typed client for the ctxal labeling service. Every payload shape here
// mirrors the server exactly; nothing is recomputed on this side.

export interface SessionInfo {
  version: number;
  round: number;
  seen: number;
  total: number;
  class_count: number;
  batch_size: number;
  strategy: string;
  mode: string;
  strong_labels: number;
  weak_labels: number;
  pending: boolean;
  done: boolean;
}

export interface Neighbor {
  id: string;
  mi: number;
}

export interface Query {
  id: string;
  entropy: number;
  marginal: number[];
  neighbors: Neighbor[];
}

export interface QueriesPayload {
  version: number;
  round: number;
  done: boolean;
  queries: Query[];
}

export interface AbortPayload {
  version: number;
  round: number;
  aborted: boolean;
}

export interface LabelsResult {
  version: number;
  round: number;
  entropies: Record<string, number>;
  strong_labels: number;
  weak_labels: number;
  done: boolean;
}

export interface GraphNode {
  id: string;
  entropy: number;
  marginal: number[] | null;
  queried: boolean;
}

export interface GraphEdge {
  source: string;
  target: string;
  mi: number;
}

export interface GraphPayload {
  version: number;
  round: number;
  pending: boolean;
  nodes: GraphNode[];
  edges: GraphEdge[];
}

export interface CurvePoint {
  round: number;
  seen: number;
  strong_labels: number;
  weak_labels: number;
  accuracy: number | null;
}

export interface CurvePayload {
  version: number;
  points: CurvePoint[];
}

/** The server answered with a non-2xx status. Not retried. */
export class ApiError extends Error {
  constructor(readonly status: number, readonly detail: string) {
    super(`${status}: ${detail}`);
    this.name = "ApiError";
  }
}

export type FetchLike = (
  input: string,
  init?: RequestInit,
) => Promise<Response>;

export interface RetryStatus {
  attempt: number;
  waitMs: number;
  error: unknown;
}

const LABEL_RETRIES = 5;

export class ApiClient {
  constructor(
    private readonly base: string = "",
    private readonly fetchImpl: FetchLike = (input, init) =>
      fetch(input, init),
    private readonly retryDelayMs: number = 600,
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchImpl(this.base + path, init);
    if (!resp.ok) {
      let detail = resp.statusText;
      try {
        const body = (await resp.json()) as { detail?: string };
        if (typeof body.detail === "string") detail = body.detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(resp.status, detail);
    }
    return (await resp.json()) as T;
  }

  session(): Promise<SessionInfo> {
    return this.request<SessionInfo>("/session");
  }

  queries(): Promise<QueriesPayload> {
    return this.request<QueriesPayload>("/queries");
  }

  abortRound(): Promise<AbortPayload> {
    return this.request<AbortPayload>("/queries", { method: "DELETE" });
  }

  graph(): Promise<GraphPayload> {
    return this.request<GraphPayload>("/graph");
  }

  curve(): Promise<CurvePayload> {
    return this.request<CurvePayload>("/curve");
  }

  /**
   * Post the round's labels. Network failures retry with backoff and a
   * visible status callback; the promise only settles once the server
   * answered, so a label is never dropped silently. Server rejections
   * (4xx) are final and surface as ApiError immediately.
   */
  async postLabels(
    labels: Record<string, number>,
    onRetry?: (status: RetryStatus) => void,
  ): Promise<LabelsResult> {
    const init: RequestInit = {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ labels }),
    };
    let lastError: unknown;
    for (let attempt = 0; attempt <= LABEL_RETRIES; attempt++) {
      if (attempt > 0) {
        const waitMs = this.retryDelayMs * attempt;
        onRetry?.({ attempt, waitMs, error: lastError });
        await new Promise((resolve) => setTimeout(resolve, waitMs));
      }
      try {
        return await this.request<LabelsResult>("/labels", init);
      } catch (err) {
        if (err instanceof ApiError) throw err;
        lastError = err; // transport failure: the server never answered
      }
    }
    throw lastError;
  }
}
