import { vi } from "vitest";

import type { Thread, ThreadSummary, TurnPair } from "../src/types.js";

export function makeTurn(overrides: Partial<TurnPair> = {}): TurnPair {
  return {
    question: "What is clock tree synthesis?",
    rephrased_question: "What is clock tree synthesis?",
    answer: "Clock tree synthesis balances clock skew.",
    citations: ["https://docs.example.com/cts"],
    tools_used: ["docs"],
    degraded: false,
    latency: 0.4,
    ...overrides,
  };
}

export function makeThread(overrides: Partial<Thread> = {}): Thread {
  return {
    thread_id: "t1",
    title: "First thread",
    turns: [makeTurn()],
    created_at: 1,
    updated_at: 2,
    ...overrides,
  };
}

export function makeSummary(overrides: Partial<ThreadSummary> = {}): ThreadSummary {
  return {
    thread_id: "t1",
    title: "First thread",
    created_at: 1,
    updated_at: 2,
    turn_count: 1,
    ...overrides,
  };
}

export function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

/** Route-table fetch mock: maps "METHOD path" to a response factory. */
export function mockFetchRoutes(
  routes: Record<string, (body?: unknown) => Response>,
) {
  const fetchMock = vi.fn(async (input: RequestInfo | URL, init?: RequestInit) => {
    const url = new URL(String(input));
    const method = init?.method ?? "GET";
    const key = `${method} ${url.pathname}`;
    const handler = routes[key];
    if (!handler) {
      throw new Error(`no mock route for ${key}`);
    }
    const body = init?.body ? JSON.parse(String(init.body)) : undefined;
    return handler(body);
  });
  vi.stubGlobal("fetch", fetchMock);
  return fetchMock;
}
