import type { ThreadSummary } from "../types.js";

export interface SidebarCallbacks {
  onSelect: (threadId: string) => void;
  onCreate: () => void;
}

/** Thread list with a create button; renders summaries in the order the API
 * returns them (newest activity first). */
export class ThreadSidebar {
  private readonly list: HTMLUListElement;

  constructor(
    private readonly root: HTMLElement,
    private readonly callbacks: SidebarCallbacks,
  ) {
    this.root.classList.add("thread-sidebar");
    const createButton = document.createElement("button");
    createButton.className = "new-thread";
    createButton.textContent = "New thread";
    createButton.addEventListener("click", () => this.callbacks.onCreate());
    this.list = document.createElement("ul");
    this.list.className = "thread-list";
    this.root.append(createButton, this.list);
  }

  render(threads: ThreadSummary[], activeId: string | null): void {
    this.list.replaceChildren();
    for (const thread of threads) {
      const item = document.createElement("li");
      item.className = "thread-item";
      item.dataset.threadId = thread.thread_id;
      if (thread.thread_id === activeId) item.classList.add("active");
      const title = document.createElement("span");
      title.className = "thread-title";
      title.textContent = thread.title;
      const count = document.createElement("span");
      count.className = "thread-count";
      count.textContent = String(thread.turn_count);
      item.append(title, count);
      item.addEventListener("click", () => this.callbacks.onSelect(thread.thread_id));
      this.list.append(item);
    }
  }
}
