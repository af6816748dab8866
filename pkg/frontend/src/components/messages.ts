import { renderMarkdown } from "../markdown.js";
import type { Thread, TurnPair } from "../types.js";

/** Message view for one thread: question/answer bubbles, citation links,
 * tools badge, degraded warning, plus transient pending and error bubbles.
 *
 * Citation anchors use the API-provided url verbatim for both href and text;
 * the client never synthesizes or rewrites links. */
export class MessageView {
  constructor(private readonly root: HTMLElement) {
    this.root.classList.add("message-view");
  }

  renderThread(thread: Thread): void {
    this.root.replaceChildren();
    for (const turn of thread.turns) {
      this.root.append(this.questionBubble(turn.question), this.answerBubble(turn));
    }
  }

  showPending(question: string): void {
    this.root.append(this.questionBubble(question));
    const bubble = document.createElement("div");
    bubble.className = "bubble assistant pending";
    bubble.textContent = "Thinking…";
    this.root.append(bubble);
  }

  showError(message: string, onRetry: () => void): void {
    const pending = this.root.querySelector(".bubble.pending");
    const bubble = document.createElement("div");
    bubble.className = "bubble assistant error";
    const text = document.createElement("span");
    text.textContent = message;
    const retry = document.createElement("button");
    retry.className = "retry";
    retry.textContent = "Retry";
    retry.addEventListener("click", onRetry);
    bubble.append(text, retry);
    if (pending) {
      pending.replaceWith(bubble);
    } else {
      this.root.append(bubble);
    }
  }

  private questionBubble(question: string): HTMLElement {
    const bubble = document.createElement("div");
    bubble.className = "bubble user";
    bubble.textContent = question;
    return bubble;
  }

  private answerBubble(turn: TurnPair): HTMLElement {
    const bubble = document.createElement("div");
    bubble.className = "bubble assistant";

    const answer = document.createElement("div");
    answer.className = "answer";
    answer.innerHTML = renderMarkdown(turn.answer);
    bubble.append(answer);

    if (turn.degraded) {
      const warning = document.createElement("div");
      warning.className = "degraded-warning";
      warning.textContent = "Degraded answer: a retrieval or model fallback was used.";
      bubble.append(warning);
    }

    if (turn.tools_used.length > 0) {
      const badges = document.createElement("div");
      badges.className = "tools-used";
      for (const tool of turn.tools_used) {
        const badge = document.createElement("span");
        badge.className = "tool-badge";
        badge.textContent = tool;
        badges.append(badge);
      }
      bubble.append(badges);
    }

    if (turn.citations.length > 0) {
      const list = document.createElement("ol");
      list.className = "citations";
      for (const url of turn.citations) {
        const item = document.createElement("li");
        const anchor = document.createElement("a");
        anchor.href = url;
        anchor.textContent = url;
        anchor.target = "_blank";
        anchor.rel = "noopener noreferrer";
        item.append(anchor);
        list.append(item);
      }
      bubble.append(list);
    }
    return bubble;
  }
}
