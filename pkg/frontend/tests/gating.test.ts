// Capability gating: an operator session must see no approval or
// analytics affordances, and deep links land on the access-denied view
// that the server's own 403 backs up.

import { afterAll, describe, expect, it } from "vitest";

import { ApiClient, Ticket } from "../src/api";
import { availableActions, renderDetail } from "../src/ticketView";
import { navigate, renderDenied, viewForError, visibleRoutes } from "../src/nav";
import { sessionFrom } from "../src/session";
import { FetchStub, loginFixture, recorded } from "./helpers";

const operator = sessionFrom(loginFixture("op1"));
const manager = sessionFrom(loginFixture("admin"));
const approvedTicket = (recorded["ticket_checks"]!.body as { ticket: Ticket }).ticket;

let ok = false;

afterAll(() => {
  console.log(`\nACCEPTANCE 13 capability-gating: ${ok ? "PASS" : "FAIL"}`);
});

describe("capability gating", () => {
  it("hides ticket queue and analytics from an operator", () => {
    expect(visibleRoutes(operator).map((r) => r.id)).toEqual(["chat"]);
    expect(visibleRoutes(manager).map((r) => r.id)).toEqual([
      "chat",
      "tickets",
      "analytics",
    ]);
  });

  it("offers an operator no approval affordances on any ticket", () => {
    expect(availableActions(approvedTicket, operator)).toEqual([]);
    const html = renderDetail(approvedTicket, operator);
    expect(html).not.toContain("data-action=");
    expect(html).not.toContain("revision-editor");
  });

  it("routes a deep link straight to the access-denied view", () => {
    const view = navigate("analytics", operator);
    expect(view.kind).toBe("denied");
    if (view.kind === "denied") {
      expect(renderDenied(view)).toContain("Access denied");
    }
  });

  it("lands on the denied view when the server answers 403", async () => {
    const stub = new FetchStub()
      .on("GET", "/analytics/report", "analytics_denied")
      .on("GET", "/tickets", "tickets_denied")
      .on("POST", `/tickets/${approvedTicket.ticket_id}/integrate`, "integrate_denied");
    stub.install();
    const client = new ApiClient();
    client.setToken(operator.token);

    for (const [route, call] of [
      ["analytics", () => client.analyticsReport()],
      ["tickets", () => client.listTickets()],
      ["tickets", () => client.integrateTicket(approvedTicket.ticket_id)],
    ] as const) {
      const err = await call().catch((e) => e);
      const view = viewForError(route, err);
      expect(view?.kind).toBe("denied");
    }
    ok = true;
  });
});
