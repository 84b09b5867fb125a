/** Thread state derived from the server transcript.
 *
 * Rendering is a pure function of the session fetched from the server:
 * replaying GET /v1/session reproduces the identical thread. Option labels
 * come verbatim from the server; the UI never synthesizes them.
 */

import type { ClarificationOption, SessionPayload } from "./types.js";

export type ThreadItemState = "pending" | "answered" | "resolved";

export interface ThreadItem {
  role: "user" | "assistant";
  text: string;
  options: ClarificationOption[];
  state: ThreadItemState;
  /** Transient accent for answer-first responses; not part of the transcript. */
  notice: string | null;
}

export function threadFromSession(session: SessionPayload): ThreadItem[] {
  const items: ThreadItem[] = session.turns.map((turn) => ({
    role: turn.role,
    text: turn.text,
    options: [],
    state: "answered",
    notice: null,
  }));
  const pending = session.pending;
  if (pending) {
    // The pending question is the newest assistant turn carrying its text.
    for (let i = items.length - 1; i >= 0; i--) {
      const item = items[i];
      if (item && item.role === "assistant" && item.text === pending.question) {
        items[i] = { ...item, options: pending.options, state: "pending" };
        break;
      }
    }
  }
  return items;
}

export function pendingItem(items: ThreadItem[]): ThreadItem | null {
  return items.find((item) => item.state === "pending") ?? null;
}

export function countPending(items: ThreadItem[]): number {
  return items.filter((item) => item.state === "pending").length;
}
