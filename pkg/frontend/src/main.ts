// Minimal browser shell wiring the view modules to the DOM. The test
// suite exercises the view modules directly; this file is only glue.

import { ApiClient, ChatResponse } from "./api";
import { renderReport } from "./analyticsView";
import { renderTurn, submitFlag } from "./chatView";
import { RouteId, navigate, renderDenied, viewForError, visibleRoutes } from "./nav";
import { Session, signIn } from "./session";
import { renderDetail, renderQueueRow } from "./ticketView";

const client = new ApiClient(
  (globalThis as { QMS_GATEWAY_URL?: string }).QMS_GATEWAY_URL ?? "",
);

let session: Session | null = null;
let conversationId: string | undefined;

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node;
}

async function showRoute(route: RouteId): Promise<void> {
  if (!session) return;
  const view = navigate(route, session);
  const main = el("main");
  if (view.kind === "denied") {
    main.innerHTML = renderDenied(view);
    return;
  }
  try {
    if (route === "tickets") {
      const { tickets } = await client.listTickets();
      main.innerHTML = `<table>${tickets.map(renderQueueRow).join("")}</table>`;
    } else if (route === "analytics") {
      main.innerHTML = renderReport(await client.analyticsReport());
    } else {
      main.innerHTML = `<div id="turns"></div>`;
    }
  } catch (error) {
    const denied = viewForError(route, error);
    if (denied && denied.kind === "denied") main.innerHTML = renderDenied(denied);
    else throw error;
  }
}

function renderNav(): void {
  if (!session) return;
  el("nav").innerHTML = visibleRoutes(session)
    .map((r) => `<a href="#${r.id}">${r.label}</a>`)
    .join(" ");
}

async function sendMessage(text: string): Promise<void> {
  if (!session) return;
  const res: ChatResponse = await client.chat(text, conversationId);
  conversationId = res.conversation_id;
  el("turns").insertAdjacentHTML("beforeend", renderTurn(res.turn, session));
}

export async function boot(userId: string, credential: string): Promise<void> {
  session = await signIn(client, userId, credential);
  renderNav();
  await showRoute("chat");
  window.addEventListener("hashchange", () => {
    void showRoute((location.hash.slice(1) || "chat") as RouteId);
  });
  el("main").addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    if (target.matches("button.flag") && conversationId) {
      void submitFlag(
        client,
        conversationId,
        Number(target.dataset.turn),
        target.dataset.flag as "insufficient" | "extend",
      );
    }
  });
  el("composer").addEventListener("submit", (event) => {
    event.preventDefault();
    const input = el("message") as HTMLInputElement;
    if (input.value.trim()) void sendMessage(input.value.trim());
    input.value = "";
  });
  el("ticket-detail-host").addEventListener("ticket-selected", async (event) => {
    const ticketId = (event as CustomEvent<string>).detail;
    const { ticket } = await client.getTicket(ticketId);
    if (session) el("ticket-detail-host").innerHTML = renderDetail(ticket, session);
  });
}
