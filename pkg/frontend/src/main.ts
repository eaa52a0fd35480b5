/** Browser entry point: mounts a session for `?annotator=<id>` against
 * the same origin that served this page. */

import { SessionApp } from "./app.js";
import { SessionClient } from "./client.js";

function mount(): void {
  const root = document.getElementById("app");
  if (!root) {
    return;
  }
  const annotatorId = new URLSearchParams(window.location.search).get("annotator");
  if (!annotatorId) {
    root.textContent = "Add ?annotator=<your id> to the URL to start a session.";
    return;
  }
  const client = new SessionClient({ baseUrl: "", annotatorId });
  const app = new SessionApp({ client, root });
  void app.start().catch((failure) => {
    root.textContent = failure instanceof Error ? failure.message : String(failure);
  });
}

mount();
