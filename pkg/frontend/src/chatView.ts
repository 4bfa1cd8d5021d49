// Chat view: renders dialog turns with their provenance citations and
// offers the two answer-flag buttons when the session may flag answers.

import { ApiClient, DialogTurn, Ticket, TicketFlag } from "./api";
import { Session, can } from "./session";

export interface FlagButton {
  flag: TicketFlag;
  label: string;
}

const FLAG_BUTTONS: FlagButton[] = [
  { flag: "insufficient", label: "Flag as insufficient" },
  { flag: "extend", label: "Flag as extend" },
];

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** One citation chip per cited chunk, e.g. "manual v1 · c0000". */
export function renderProvenance(turn: DialogTurn): string {
  if (turn.provenance.length === 0) return "";
  const chips = turn.provenance
    .map(
      (p) =>
        `<span class="citation" data-chunk="${escapeHtml(p.chunk_id)}">` +
        `${escapeHtml(p.doc_id)} v${p.version}</span>`,
    )
    .join("");
  return `<div class="provenance">${chips}</div>`;
}

export function renderTurn(turn: DialogTurn, session: Session): string {
  const blocked = turn.guard_flags.some((f) => f.decision === "block");
  const buttons = flagButtonsFor(session)
    .map(
      (b) =>
        `<button class="flag" data-turn="${turn.turn_index}" data-flag="${b.flag}">` +
        `${b.label}</button>`,
    )
    .join("");
  return [
    `<article class="turn${blocked ? " refused" : ""}" data-index="${turn.turn_index}">`,
    `<p class="user">${escapeHtml(turn.user_text)}</p>`,
    `<p class="assistant">${escapeHtml(turn.assistant_text)}</p>`,
    renderProvenance(turn),
    blocked ? "" : `<div class="actions">${buttons}</div>`,
    `</article>`,
  ]
    .filter(Boolean)
    .join("\n");
}

export function flagButtonsFor(session: Session): FlagButton[] {
  return can(session, "flag_answer") ? FLAG_BUTTONS : [];
}

/** Wire-up for a flag button press: one create-ticket call, nothing else. */
export async function submitFlag(
  client: ApiClient,
  conversationId: string,
  turnIndex: number,
  flag: TicketFlag,
): Promise<Ticket> {
  const res = await client.createTicket(conversationId, turnIndex, flag);
  return res.ticket;
}
