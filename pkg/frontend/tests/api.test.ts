import { afterEach, describe, expect, it, vi } from "vitest";

import { ApiClient, ApiError, ServiceWarmingUp } from "../src/api.js";
import { jsonResponse, mockFetchRoutes } from "./helpers.js";

afterEach(() => {
  vi.unstubAllGlobals();
});

describe("ApiClient", () => {
  it("creates a thread and returns its id", async () => {
    const fetchMock = mockFetchRoutes({
      "POST /threads": (body) => {
        expect(body).toEqual({ title: "My thread" });
        return jsonResponse({ thread_id: "abc123" }, 201);
      },
    });
    const api = new ApiClient("http://svc.test/");
    expect(await api.createThread("My thread")).toBe("abc123");
    expect(fetchMock).toHaveBeenCalledOnce();
    expect(String(fetchMock.mock.calls[0][0])).toBe("http://svc.test/threads");
  });

  it("sends a message to the right thread", async () => {
    mockFetchRoutes({
      "POST /threads/t9/messages": (body) => {
        expect(body).toEqual({ question: "what is skew?" });
        return jsonResponse({
          answer: "a",
          citations: [],
          tools_used: [],
          retrieval: {},
          degraded: false,
          latency: 0.1,
        });
      },
    });
    const api = new ApiClient("http://svc.test");
    const response = await api.sendMessage("t9", "what is skew?");
    expect(response.answer).toBe("a");
  });

  it("maps 503 to ServiceWarmingUp", async () => {
    mockFetchRoutes({
      "GET /threads": () => jsonResponse({ detail: "indexes are still building" }, 503),
    });
    const api = new ApiClient("http://svc.test");
    await expect(api.listThreads()).rejects.toBeInstanceOf(ServiceWarmingUp);
  });

  it("maps other errors to ApiError with the detail message", async () => {
    mockFetchRoutes({
      "GET /threads/missing": () => jsonResponse({ detail: "unknown thread" }, 404),
    });
    const api = new ApiClient("http://svc.test");
    const failure = api.getThread("missing");
    await expect(failure).rejects.toBeInstanceOf(ApiError);
    await expect(failure).rejects.toMatchObject({ status: 404, message: "unknown thread" });
  });

  it("wraps network failures", async () => {
    vi.stubGlobal("fetch", vi.fn(async () => {
      throw new TypeError("connection refused");
    }));
    const api = new ApiClient("http://svc.test");
    await expect(api.health()).rejects.toMatchObject({ status: 0 });
  });
});
