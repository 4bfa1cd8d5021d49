// Ticket queue and detail views. Which affordances appear depends on
// both the ticket's state and the session's capabilities; the server
// re-checks everything, so the view only mirrors what it may do.

import { CheckResult, Ticket, TicketState } from "./api";
import { Session, can } from "./session";

export type TicketAction = "revise" | "run_checks" | "integrate" | "reject";

const STATE_BADGES: Record<TicketState, string> = {
  OPEN: "open",
  IN_REVISION: "in revision",
  PENDING_CHECKS: "pending checks",
  APPROVED: "approved",
  INTEGRATED: "integrated",
  REJECTED: "rejected",
};

export function availableActions(ticket: Ticket, session: Session): TicketAction[] {
  const actions: TicketAction[] = [];
  if (can(session, "rewrite_ticket")) {
    if (ticket.state === "OPEN" || ticket.state === "IN_REVISION") actions.push("revise");
    if (ticket.state === "IN_REVISION") actions.push("run_checks");
  }
  if (can(session, "approve_ticket")) {
    if (ticket.state === "APPROVED") actions.push("integrate");
    if (ticket.state !== "INTEGRATED" && ticket.state !== "REJECTED") {
      actions.push("reject");
    }
  }
  return actions;
}

export function renderQueueRow(ticket: Ticket): string {
  return (
    `<tr data-ticket="${ticket.ticket_id}">` +
    `<td>${ticket.ticket_id}</td>` +
    `<td><span class="badge state-${ticket.state.toLowerCase()}">` +
    `${STATE_BADGES[ticket.state]}</span></td>` +
    `<td>${ticket.flag}</td>` +
    `<td>${ticket.created_at}</td>` +
    `</tr>`
  );
}

export function renderChecks(results: CheckResult[]): string {
  if (results.length === 0) return `<p class="checks empty">No checks run yet.</p>`;
  const rows = results
    .map(
      (c) =>
        `<li class="check ${c.outcome}">${c.check_kind}: ${c.outcome}` +
        ` (score ${c.score.toFixed(3)})</li>`,
    )
    .join("");
  return `<ul class="checks">${rows}</ul>`;
}

export function renderDetail(ticket: Ticket, session: Session): string {
  const actions = availableActions(ticket, session)
    .map((a) => `<button class="action" data-action="${a}">${a.replace("_", " ")}</button>`)
    .join("");
  const editor =
    availableActions(ticket, session).includes("revise")
      ? `<textarea class="revision-editor">${ticket.revision ?? ""}</textarea>`
      : "";
  return [
    `<section class="ticket" data-state="${ticket.state}">`,
    `<h2>${ticket.ticket_id} — ${STATE_BADGES[ticket.state]}</h2>`,
    `<p class="question">${ticket.original_question}</p>`,
    `<p class="answer">${ticket.original_answer}</p>`,
    editor,
    renderChecks(ticket.check_results),
    `<div class="actions">${actions}</div>`,
    `</section>`,
  ]
    .filter(Boolean)
    .join("\n");
}
