/** Entry point: resolve the server base URL and session id, mount the app. */

import { ApiClient } from "./api.js";
import { ChatController } from "./controller.js";
import { mount } from "./ui.js";

function resolveBaseUrl(): string {
  const params = new URLSearchParams(window.location.search);
  return (
    params.get("api") ??
    (window as { DISAMBIG_API?: string }).DISAMBIG_API ??
    "http://127.0.0.1:8080"
  );
}

function resolveSessionId(): string {
  const key = "disambig.session_id";
  let sessionId = window.localStorage.getItem(key);
  if (!sessionId) {
    sessionId = `web-${Math.random().toString(36).slice(2, 10)}`;
    window.localStorage.setItem(key, sessionId);
  }
  return sessionId;
}

const root = document.getElementById("app");
if (!root) {
  throw new Error("missing #app container");
}

const controller = new ChatController(new ApiClient(resolveBaseUrl()), resolveSessionId());
mount(root, controller);
// Replay the transcript so a reload shows the identical thread.
void controller.refresh().catch((err) => {
  root.textContent = `Cannot load the session: ${String(err)}`;
});
