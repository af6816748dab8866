import { beforeEach, describe, expect, it, vi } from "vitest";

import { MessageView } from "../src/components/messages.js";
import { makeThread, makeTurn } from "./helpers.js";

let root: HTMLElement;
let view: MessageView;

beforeEach(() => {
  document.body.innerHTML = "";
  root = document.createElement("div");
  document.body.append(root);
  view = new MessageView(root);
});

describe("MessageView", () => {
  it("renders one user and one assistant bubble per turn", () => {
    view.renderThread(makeThread({ turns: [makeTurn(), makeTurn()] }));
    expect(root.querySelectorAll(".bubble.user")).toHaveLength(2);
    expect(root.querySelectorAll(".bubble.assistant")).toHaveLength(2);
  });

  it("citation anchors equal the API urls byte for byte", () => {
    const urls = [
      "https://docs.example.com/cts?a=1&b=%20x",
      "https://forum.example.com/d1#answer",
    ];
    view.renderThread(makeThread({ turns: [makeTurn({ citations: urls })] }));
    const anchors = [...root.querySelectorAll(".citations a")] as HTMLAnchorElement[];
    expect(anchors.map((a) => a.getAttribute("href"))).toEqual(urls);
    expect(anchors.map((a) => a.textContent)).toEqual(urls);
  });

  it("citations appear in rank order", () => {
    const urls = ["https://e.com/2", "https://e.com/1", "https://e.com/3"];
    view.renderThread(makeThread({ turns: [makeTurn({ citations: urls })] }));
    const rendered = [...root.querySelectorAll(".citations a")].map((a) => a.textContent);
    expect(rendered).toEqual(urls);
  });

  it("shows a badge per tool used", () => {
    view.renderThread(makeThread({ turns: [makeTurn({ tools_used: ["docs", "discussions"] })] }));
    const badges = [...root.querySelectorAll(".tool-badge")].map((el) => el.textContent);
    expect(badges).toEqual(["docs", "discussions"]);
  });

  it("shows the degraded warning only when degraded", () => {
    view.renderThread(makeThread({ turns: [makeTurn({ degraded: false })] }));
    expect(root.querySelector(".degraded-warning")).toBeNull();
    view.renderThread(makeThread({ turns: [makeTurn({ degraded: true })] }));
    expect(root.querySelector(".degraded-warning")).not.toBeNull();
  });

  it("renders the answer as sanitized markdown", () => {
    view.renderThread(makeThread({
      turns: [makeTurn({ answer: "run `global_route` <img src=x onerror=alert(1)>" })],
    }));
    const answer = root.querySelector(".answer") as HTMLElement;
    expect(answer.querySelector("code")?.textContent).toBe("global_route");
    expect(answer.querySelector("img")).toBeNull();
  });

  it("pending bubble appears after the question", () => {
    view.renderThread(makeThread({ turns: [] }));
    view.showPending("new question");
    const bubbles = [...root.querySelectorAll(".bubble")];
    expect(bubbles[0].textContent).toBe("new question");
    expect(bubbles[1].classList.contains("pending")).toBe(true);
  });

  it("error bubble replaces the pending bubble and retries", () => {
    view.renderThread(makeThread({ turns: [] }));
    view.showPending("q");
    const onRetry = vi.fn();
    view.showError("Request failed: boom", onRetry);
    expect(root.querySelector(".bubble.pending")).toBeNull();
    const error = root.querySelector(".bubble.error") as HTMLElement;
    expect(error.textContent).toContain("Request failed: boom");
    (error.querySelector("button.retry") as HTMLElement).click();
    expect(onRetry).toHaveBeenCalledOnce();
  });
});
