// Shared test plumbing: a fetch stub that replays recorded gateway
// responses (captured from a live server run) and logs every request.

import recordedJson from "./fixtures/recorded.json";

export interface RecordedResponse {
  status: number;
  body: unknown;
}

export const recorded = recordedJson as unknown as Record<string, RecordedResponse>;

export interface CapturedRequest {
  method: string;
  path: string;
  body: unknown;
  headers: Record<string, string>;
}

export class FetchStub {
  readonly calls: CapturedRequest[] = [];
  private routes = new Map<string, RecordedResponse[]>();

  /** Serve `fixture` for `METHOD /path`; repeated adds queue in order. */
  on(method: string, path: string, fixtureName: string): this {
    const key = `${method} ${path}`;
    const queue = this.routes.get(key) ?? [];
    const fixture = recorded[fixtureName];
    if (!fixture) throw new Error(`no recorded fixture named ${fixtureName}`);
    queue.push(fixture);
    this.routes.set(key, queue);
    return this;
  }

  install(): void {
    globalThis.fetch = (async (url: string, init?: RequestInit) => {
      const method = init?.method ?? "GET";
      const path = String(url);
      this.calls.push({
        method,
        path,
        body: init?.body ? JSON.parse(String(init.body)) : undefined,
        headers: (init?.headers as Record<string, string>) ?? {},
      });
      const queue = this.routes.get(`${method} ${path}`);
      if (!queue || queue.length === 0) {
        throw new Error(`unexpected request: ${method} ${path}`);
      }
      const fixture = queue.length > 1 ? queue.shift()! : queue[0]!;
      return {
        ok: fixture.status >= 200 && fixture.status < 300,
        status: fixture.status,
        json: async () => fixture.body,
      } as Response;
    }) as typeof fetch;
  }
}

export function loginFixture(userId: string): {
  token: string;
  user_id: string;
  expires_at: string;
  capabilities: string[];
} {
  return recorded[`login_${userId}`]!.body as ReturnType<typeof loginFixture>;
}
