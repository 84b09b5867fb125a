/** DOM rendering: a pure projection of the controller state.
 *
 * Content is set via textContent only. Options render as buttons solely while
 * their item is pending; clicking disables the whole group until the server
 * answers.
 */

import type { ChatController } from "./controller.js";
import type { ThreadItem } from "./state.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function renderItem(item: ThreadItem, controller: ChatController): HTMLElement {
  const row = el("div", `msg msg-${item.role} msg-${item.state}`);
  row.dataset.state = item.state;

  if (item.notice) {
    const banner = el("div", "notice", item.notice);
    banner.dataset.testid = "notice";
    row.appendChild(banner);
  }

  row.appendChild(el("div", "msg-text", item.text));

  if (item.options.length > 0) {
    const group = el("div", "options");
    group.dataset.testid = "options";
    for (const option of item.options) {
      const button = el("button", "option", option.label);
      button.type = "button";
      button.dataset.optionId = option.option_id;
      button.disabled = item.state !== "pending" || controller.busy;
      button.addEventListener("click", () => {
        void controller.clickOption(option.option_id);
      });
      group.appendChild(button);
    }
    row.appendChild(group);
  }
  return row;
}

export function render(root: HTMLElement, controller: ChatController): void {
  root.textContent = "";

  const thread = el("div", "thread");
  thread.dataset.testid = "thread";
  for (const item of controller.items) {
    thread.appendChild(renderItem(item, controller));
  }

  if (controller.error) {
    const row = el("div", "msg msg-error");
    row.dataset.testid = "error";
    row.appendChild(el("div", "msg-text", controller.error.message));
    const retry = el("button", "retry", "Retry");
    retry.type = "button";
    retry.addEventListener("click", () => {
      void controller.retryLast();
    });
    row.appendChild(retry);
    thread.appendChild(row);
  }
  root.appendChild(thread);

  if (controller.toast) {
    const toast = el("div", "toast", controller.toast);
    toast.dataset.testid = "toast";
    root.appendChild(toast);
  }

  const form = el("form", "composer");
  const input = el("input");
  input.type = "text";
  input.placeholder = controller.hasPending()
    ? "Answer the clarification question…"
    : "Ask something…";
  input.disabled = controller.busy;
  input.dataset.testid = "input";
  const send = el("button", "send", "Send");
  send.type = "submit";
  send.disabled = controller.busy;
  form.append(input, send);
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const text = input.value;
    input.value = "";
    void controller.submitText(text);
  });
  root.appendChild(form);
}

/** Wire controller changes to re-renders; returns the initial render. */
export function mount(root: HTMLElement, controller: ChatController): void {
  controller.onChange(() => render(root, controller));
  render(root, controller);
}
