/** Chat controller: one in-flight request per session, server-driven state.
 *
 * Every mutation (query, clarify) is followed by a session refetch, so the
 * rendered thread always equals threadFromSession(server transcript) and a
 * page reload reproduces it exactly.
 */

import { ApiClient, ApiError, NetworkError } from "./api.js";
import { countPending, threadFromSession, type ThreadItem } from "./state.js";
import type { QueryResponse } from "./types.js";

export interface RetryableError {
  message: string;
  retry: () => Promise<void>;
}

export class ChatController {
  items: ThreadItem[] = [];
  busy = false;
  toast: string | null = null;
  error: RetryableError | null = null;

  private listeners: Array<() => void> = [];

  constructor(
    private readonly api: ApiClient,
    readonly sessionId: string,
  ) {}

  onChange(listener: () => void): void {
    this.listeners.push(listener);
  }

  private emit(): void {
    for (const listener of this.listeners) listener();
  }

  hasPending(): boolean {
    return countPending(this.items) > 0;
  }

  /** Rebuild the thread from the server transcript (also used on page load). */
  async refresh(): Promise<void> {
    const session = await this.api.session(this.sessionId);
    this.items = session ? threadFromSession(session) : [];
    if (countPending(this.items) > 1) {
      throw new Error("invariant violated: more than one pending clarification");
    }
    this.emit();
  }

  async sendQuery(text: string): Promise<void> {
    const trimmed = text.trim();
    if (!trimmed) return;
    await this.mutate(
      () => this.api.query(this.sessionId, trimmed),
      () => this.sendQuery(trimmed),
    );
  }

  async clickOption(optionId: string): Promise<void> {
    await this.mutate(
      () => this.api.clarifyOption(this.sessionId, optionId),
      () => this.clickOption(optionId),
    );
  }

  async clarifyWithText(text: string): Promise<void> {
    const trimmed = text.trim();
    if (!trimmed) return;
    await this.mutate(
      () => this.api.clarifyText(this.sessionId, trimmed),
      () => this.clarifyWithText(trimmed),
    );
  }

  /** Free text goes to the pending clarification if one exists, else it is a query. */
  async submitText(text: string): Promise<void> {
    if (this.hasPending()) {
      await this.clarifyWithText(text);
    } else {
      await this.sendQuery(text);
    }
  }

  private async mutate(
    call: () => Promise<QueryResponse>,
    retry: () => Promise<void>,
  ): Promise<void> {
    if (this.busy) return; // one in-flight request per session
    this.busy = true;
    this.error = null;
    this.toast = null;
    this.emit();
    try {
      const response = await call();
      await this.refresh();
      this.applyNotice(response);
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        this.toast = "Already resolved - refreshing the thread.";
        await this.refresh().catch(() => undefined);
      } else if (err instanceof NetworkError) {
        this.error = { message: err.message, retry };
      } else if (err instanceof ApiError) {
        this.error = { message: `${err.code}: ${err.message}`, retry };
      } else {
        this.error = { message: String(err), retry };
      }
    } finally {
      this.busy = false;
      this.emit();
    }
  }

  /** Mark the answer of an answer-first response so the banner can render. */
  private applyNotice(response: QueryResponse): void {
    if (response.kind !== "answer_with_notice" || !response.answer_text) return;
    for (let i = this.items.length - 1; i >= 0; i--) {
      const item = this.items[i];
      if (item && item.role === "assistant" && item.text === response.answer_text) {
        this.items[i] = {
          ...item,
          notice: "This answer assumed one interpretation - a follow-up question is below.",
        };
        break;
      }
    }
    this.emit();
  }

  async retryLast(): Promise<void> {
    const failed = this.error;
    if (!failed) return;
    this.error = null;
    await failed.retry();
  }
}
