// Capability-gated navigation. A route the session cannot use is simply
// not offered; navigating there anyway (deep link) shows the access-denied
// view. A server 403 on any call lands in the same place, so UI gating
// and server enforcement can never disagree for long.

import { ApiError } from "./api";
import { Session, can } from "./session";

export type RouteId = "chat" | "tickets" | "analytics";

export interface Route {
  id: RouteId;
  label: string;
  requires: string;
}

export const ROUTES: Route[] = [
  { id: "chat", label: "Chat", requires: "chat" },
  { id: "tickets", label: "Ticket queue", requires: "rewrite_ticket" },
  { id: "analytics", label: "Analytics", requires: "read_ticket_analytics" },
];

export type View =
  | { kind: "route"; route: RouteId }
  | { kind: "denied"; route: RouteId; reason: string };

export function visibleRoutes(session: Session): Route[] {
  return ROUTES.filter((r) => can(session, r.requires));
}

export function navigate(route: RouteId, session: Session): View {
  const def = ROUTES.find((r) => r.id === route);
  if (!def || !can(session, def.requires)) {
    return { kind: "denied", route, reason: "missing capability" };
  }
  return { kind: "route", route };
}

/** Map a failed API call onto a view; 403 means the denied screen. */
export function viewForError(route: RouteId, error: unknown): View | null {
  if (error instanceof ApiError && error.status === 403) {
    return { kind: "denied", route, reason: error.message };
  }
  return null;
}

export function renderDenied(view: Extract<View, { kind: "denied" }>): string {
  return (
    `<section class="access-denied" data-route="${view.route}">` +
    `<h2>Access denied</h2>` +
    `<p>You do not have permission to view this page.</p>` +
    `</section>`
  );
}
