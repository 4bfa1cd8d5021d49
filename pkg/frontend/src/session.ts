import { ApiClient, LoginResponse } from "./api";

export interface Session {
  userId: string;
  token: string;
  expiresAt: string;
  capabilities: ReadonlySet<string>;
}

export function sessionFrom(login: LoginResponse): Session {
  return {
    userId: login.user_id,
    token: login.token,
    expiresAt: login.expires_at,
    capabilities: new Set(login.capabilities),
  };
}

export async function signIn(
  client: ApiClient,
  userId: string,
  credential: string,
): Promise<Session> {
  const login = await client.login(userId, credential);
  client.setToken(login.token);
  return sessionFrom(login);
}

/** Capability check: the server is authoritative, this only gates UI. */
export function can(session: Session, capability: string): boolean {
  return session.capabilities.has(capability);
}
