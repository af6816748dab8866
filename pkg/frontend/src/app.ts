import { ApiClient, ServiceWarmingUp } from "./api.js";
import { MessageView } from "./components/messages.js";
import { ThreadSidebar } from "./components/sidebar.js";

/** Wires the sidebar, message view and composer over the service API.
 *
 * All state is refetched from the API after every mutation; the view is a
 * pure function of the last responses. One in-flight message per thread. */
export class App {
  readonly sidebar: ThreadSidebar;
  readonly messages: MessageView;
  private readonly banner: HTMLElement;
  private readonly form: HTMLFormElement;
  private readonly input: HTMLInputElement;
  private readonly send: HTMLButtonElement;
  activeThreadId: string | null = null;
  private readonly inflight = new Set<string>();

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
  ) {
    this.banner = document.createElement("div");
    this.banner.className = "warmup-banner";
    this.banner.hidden = true;
    this.banner.textContent = "service warming up";

    const layout = document.createElement("div");
    layout.className = "layout";
    const sidebarRoot = document.createElement("aside");
    const main = document.createElement("main");
    const messagesRoot = document.createElement("div");

    this.form = document.createElement("form");
    this.form.className = "composer";
    this.input = document.createElement("input");
    this.input.type = "text";
    this.input.placeholder = "Ask about the documentation…";
    this.send = document.createElement("button");
    this.send.type = "submit";
    this.send.textContent = "Send";
    this.form.append(this.input, this.send);
    this.form.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.sendCurrent();
    });

    main.append(messagesRoot, this.form);
    layout.append(sidebarRoot, main);
    this.root.append(this.banner, layout);

    this.sidebar = new ThreadSidebar(sidebarRoot, {
      onSelect: (threadId) => void this.selectThread(threadId),
      onCreate: () => void this.createThread(),
    });
    this.messages = new MessageView(messagesRoot);
  }

  async init(): Promise<void> {
    try {
      const health = await this.api.health();
      if (health.status !== "ok") {
        this.showWarmup();
        return;
      }
      this.banner.hidden = true;
      await this.refreshSidebar();
    } catch (err) {
      if (err instanceof ServiceWarmingUp) {
        this.showWarmup();
        return;
      }
      throw err;
    }
  }

  private showWarmup(): void {
    this.banner.hidden = false;
    if (!this.banner.querySelector("button")) {
      const retry = document.createElement("button");
      retry.textContent = "Retry";
      retry.addEventListener("click", () => void this.init());
      this.banner.append(retry);
    }
  }

  async refreshSidebar(): Promise<void> {
    const threads = await this.api.listThreads();
    this.sidebar.render(threads, this.activeThreadId);
  }

  async selectThread(threadId: string): Promise<void> {
    this.activeThreadId = threadId;
    const thread = await this.api.getThread(threadId);
    this.messages.renderThread(thread);
    await this.refreshSidebar();
    this.setComposerEnabled(!this.inflight.has(threadId));
  }

  async createThread(): Promise<void> {
    const threadId = await this.api.createThread("New thread");
    await this.selectThread(threadId);
  }

  private setComposerEnabled(enabled: boolean): void {
    this.input.disabled = !enabled;
    this.send.disabled = !enabled;
  }

  private async sendCurrent(): Promise<void> {
    const question = this.input.value.trim();
    if (!question || !this.activeThreadId) return;
    await this.sendMessage(this.activeThreadId, question);
  }

  async sendMessage(threadId: string, question: string): Promise<void> {
    if (this.inflight.has(threadId)) return;
    this.inflight.add(threadId);
    this.setComposerEnabled(false);
    this.messages.showPending(question);
    this.input.value = "";
    try {
      await this.api.sendMessage(threadId, question);
      // Refetch rather than patching local state: the rendered view is
      // exactly what the API reports.
      if (this.activeThreadId === threadId) {
        const thread = await this.api.getThread(threadId);
        this.messages.renderThread(thread);
      }
      await this.refreshSidebar();
    } catch (err) {
      const message = err instanceof Error ? err.message : String(err);
      this.messages.showError(`Request failed: ${message}`, () => {
        void this.sendMessage(threadId, question);
      });
    } finally {
      this.inflight.delete(threadId);
      if (this.activeThreadId === threadId) this.setComposerEnabled(true);
    }
  }
}

export function mount(root: HTMLElement, baseUrl: string): App {
  return new App(root, new ApiClient(baseUrl));
}
