import type { AssistantResponse, Health, Thread, ThreadSummary } from "./types.js";

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

/** The service answers 503 on every endpoint while its indexes build. */
export class ServiceWarmingUp extends ApiError {
  constructor(message = "service warming up") {
    super(503, message);
    this.name = "ServiceWarmingUp";
  }
}

export class ApiClient {
  private readonly baseUrl: string;

  constructor(baseUrl: string) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await fetch(`${this.baseUrl}${path}`, {
        headers: { "Content-Type": "application/json" },
        ...init,
      });
    } catch (err) {
      throw new ApiError(0, `network error: ${String(err)}`);
    }
    if (response.status === 503) {
      throw new ServiceWarmingUp();
    }
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const body = (await response.json()) as { detail?: string };
        if (body.detail) detail = body.detail;
      } catch {
        /* non-JSON error body; keep the status text */
      }
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  health(): Promise<Health> {
    return this.request<Health>("/health");
  }

  listThreads(): Promise<ThreadSummary[]> {
    return this.request<ThreadSummary[]>("/threads");
  }

  getThread(threadId: string): Promise<Thread> {
    return this.request<Thread>(`/threads/${encodeURIComponent(threadId)}`);
  }

  async createThread(title: string): Promise<string> {
    const body = await this.request<{ thread_id: string }>("/threads", {
      method: "POST",
      body: JSON.stringify({ title }),
    });
    return body.thread_id;
  }

  sendMessage(threadId: string, question: string): Promise<AssistantResponse> {
    return this.request<AssistantResponse>(
      `/threads/${encodeURIComponent(threadId)}/messages`,
      { method: "POST", body: JSON.stringify({ question }) },
    );
  }
}
