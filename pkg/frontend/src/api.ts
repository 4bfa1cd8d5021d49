// Typed client for the assistant gateway JSON API. The console never
// talks to anything but this surface.

export interface Provenance {
  doc_id: string;
  version: number;
  chunk_id: string;
}

export interface GuardFlag {
  decision: "pass" | "block";
  category: string;
  stage: "input" | "output";
  matched_rule: string | null;
}

export interface DialogTurn {
  turn_index: number;
  user_text: string;
  assistant_text: string;
  provenance: Provenance[];
  tool_calls: unknown[];
  guard_flags: GuardFlag[];
  created_at: string;
}

export interface ChatResponse {
  conversation_id: string;
  turn: DialogTurn;
  output: { modality: string; payload: string; downgraded: boolean };
}

export type TicketFlag = "insufficient" | "extend";
export type TicketState =
  | "OPEN"
  | "IN_REVISION"
  | "PENDING_CHECKS"
  | "APPROVED"
  | "INTEGRATED"
  | "REJECTED";

export interface CheckResult {
  check_kind: "jailbreak" | "fact";
  outcome: "pass" | "fail";
  score: number;
  evidence: string;
  checked_by: string;
  timestamp: string;
}

export interface Ticket {
  ticket_id: string;
  conversation_id: string;
  turn_index: number;
  flag: TicketFlag;
  original_question: string;
  original_answer: string;
  original_context: string[];
  revision: string | null;
  state: TicketState;
  check_results: CheckResult[];
  created_at: string;
}

export interface AnalyticsReport {
  range: { from: string; to: string };
  total_tickets: number;
  counts_by_flag: Record<TicketFlag, number>;
  counts_by_state: Record<TicketState, number>;
  assistant_turns: number;
  rate_of_incomplete_answers: number;
}

export interface LoginResponse {
  token: string;
  user_id: string;
  expires_at: string;
  capabilities: string[];
}

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    detail: string,
  ) {
    super(detail);
  }
}

export class ApiClient {
  private token: string | null = null;

  constructor(private readonly baseUrl: string = "") {}

  setToken(token: string | null): void {
    this.token = token;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = {};
    if (body !== undefined) headers["Content-Type"] = "application/json";
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    const res = await fetch(`${this.baseUrl}${path}`, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const data = await res.json();
    if (!res.ok) {
      throw new ApiError(res.status, data.error ?? "UnknownError", data.detail ?? "");
    }
    return data as T;
  }

  login(userId: string, credential: string): Promise<LoginResponse> {
    return this.request("POST", "/login", { user_id: userId, credential });
  }

  chat(payload: string, conversationId?: string): Promise<ChatResponse> {
    return this.request("POST", "/chat", {
      conversation_id: conversationId ?? null,
      payload,
    });
  }

  createTicket(
    conversationId: string,
    turnIndex: number,
    flag: TicketFlag,
  ): Promise<{ ticket: Ticket }> {
    return this.request("POST", "/tickets", {
      conversation_id: conversationId,
      turn_index: turnIndex,
      flag,
    });
  }

  listTickets(state?: TicketState): Promise<{ tickets: Ticket[] }> {
    const qs = state ? `?state=${state}` : "";
    return this.request("GET", `/tickets${qs}`);
  }

  getTicket(ticketId: string): Promise<{ ticket: Ticket }> {
    return this.request("GET", `/tickets/${ticketId}`);
  }

  reviseTicket(ticketId: string, revision: string): Promise<{ ticket: Ticket }> {
    return this.request("POST", `/tickets/${ticketId}/revision`, { revision });
  }

  runChecks(
    ticketId: string,
  ): Promise<{ jailbreak: CheckResult; fact: CheckResult; ticket: Ticket }> {
    return this.request("POST", `/tickets/${ticketId}/checks`);
  }

  integrateTicket(
    ticketId: string,
  ): Promise<{ document: { doc_id: string; version: number }; ticket: Ticket }> {
    return this.request("POST", `/tickets/${ticketId}/integrate`);
  }

  rejectTicket(ticketId: string, reason: string): Promise<{ ticket: Ticket }> {
    return this.request("POST", `/tickets/${ticketId}/reject`, { reason });
  }

  analyticsReport(): Promise<AnalyticsReport> {
    return this.request("GET", "/analytics/report");
  }
}
