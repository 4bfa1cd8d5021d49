"""HTTP gateway: the single external API surface.

JSON resource routes per bounded context (/chat, /tickets, /conversations,
/corpus, /analytics, /admin, /audit). The gateway authenticates sessions,
authorizes through the ACL, dispatches to the owning module, and maps
domain error kinds to stable HTTP codes via one total mapping. Domain
modules emit the audit events for their own state changes; the gateway
adds a request id header for log correlation.
"""

from __future__ import annotations

import datetime as dt
import secrets
import threading
import uuid
from dataclasses import dataclass
from typing import Optional

from fastapi import Depends, FastAPI, Header, Request
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import BaseModel

from .app import Application
from .conversational import ModalityInput
from .errors import (
    AgentLoopExhaustedError,
    AssistantError,
    AuthenticationError,
    BackendUnreachableError,
    ConfigurationError,
    IllegalStateError,
    NotFoundError,
    OrderingViolationError,
    StorageError,
    UnauthorizedError,
    UnknownPrincipalError,
    ValidationError,
)

# Total mapping from domain error kind to HTTP status. Exhaustively tested.
ERROR_STATUS = {
    AuthenticationError: 401,
    UnauthorizedError: 403,
    UnknownPrincipalError: 404,
    NotFoundError: 404,
    IllegalStateError: 409,
    OrderingViolationError: 409,
    ValidationError: 422,
    ConfigurationError: 422,
    BackendUnreachableError: 502,
    AgentLoopExhaustedError: 502,
    StorageError: 500,
}

# Route table: every endpoint is either public or tied to one permission.
# A scan test asserts no authenticated route is missing from this table.
ROUTE_PERMISSIONS: dict[tuple[str, str], Optional[str]] = {
    ("POST", "/login"): None,
    ("GET", "/health"): None,
    ("POST", "/chat"): "chat",
    ("GET", "/conversations"): "chat",
    ("GET", "/conversations/{conversation_id}"): "chat",
    ("GET", "/conversations/{conversation_id}/export"): "chat",
    ("GET", "/corpus/search"): "chat",
    ("POST", "/tickets"): "flag_answer",
    ("GET", "/tickets"): "rewrite_ticket",
    ("GET", "/tickets/export"): "read_audit",
    ("GET", "/tickets/{ticket_id}"): "rewrite_ticket",
    ("POST", "/tickets/{ticket_id}/revision"): "rewrite_ticket",
    ("POST", "/tickets/{ticket_id}/checks"): "rewrite_ticket",
    ("POST", "/tickets/{ticket_id}/integrate"): "approve_ticket",
    ("POST", "/tickets/{ticket_id}/reject"): "approve_ticket",
    ("GET", "/analytics/report"): "read_ticket_analytics",
    ("POST", "/corpus/documents"): "manage_corpus",
    ("GET", "/corpus/documents"): "manage_corpus",
    ("GET", "/corpus/documents/{doc_id}"): "manage_corpus",
    ("GET", "/audit/records"): "read_audit",
    ("GET", "/audit/verify"): "read_audit",
    ("POST", "/admin/users"): "manage_users",
    ("GET", "/admin/users"): "manage_users",
    ("POST", "/admin/users/{user_id}/groups"): "manage_users",
}


@dataclass
class Session:
    session_token: str
    user_id: str
    issued_at: str
    expires_at: str


class SessionTable:
    def __init__(self, app: Application):
        self._app = app
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    def _now(self) -> dt.datetime:
        return dt.datetime.fromisoformat(self._app.clock().replace("Z", "+00:00"))

    def login(self, user_id: str, credential: str) -> Session:
        expected = self._app.config.credentials.get(user_id)
        user = self._app.acl.users.get(user_id)
        # Indistinguishable failure for unknown user, wrong secret, inactive user.
        if expected is None or user is None or not user.active or credential != expected:
            raise AuthenticationError("invalid credentials")
        now = self._now()
        ttl = dt.timedelta(seconds=self._app.config.session_ttl_seconds)
        session = Session(
            session_token=secrets.token_urlsafe(32),
            user_id=user_id,
            issued_at=now.isoformat(),
            expires_at=(now + ttl).isoformat(),
        )
        with self._lock:
            self._sessions[session.session_token] = session
        return session

    def authenticate(self, token: Optional[str]) -> Session:
        if not token:
            raise AuthenticationError("missing bearer token")
        session = self._sessions.get(token)
        if session is None:
            raise AuthenticationError("unknown session token")
        if self._now() >= dt.datetime.fromisoformat(session.expires_at):
            raise AuthenticationError("session expired")
        return session


# -- request models ---------------------------------------------------------


class LoginBody(BaseModel):
    user_id: str
    credential: str


class ChatBody(BaseModel):
    conversation_id: Optional[str] = None
    modality: str = "text"
    payload: str
    transcript_hint: Optional[str] = None
    output_modality: Optional[str] = None


class TicketBody(BaseModel):
    conversation_id: str
    turn_index: int
    flag: str


class RevisionBody(BaseModel):
    revision: str
    attachments: list[dict] = []
    target_doc_id: Optional[str] = None


class RejectBody(BaseModel):
    reason: str = ""


class IngestBody(BaseModel):
    doc_id: str
    format: str
    content: str
    title: Optional[str] = None
    doc_kind: str = "other"
    source_uri: str = ""


class UserBody(BaseModel):
    user_id: str
    display_name: Optional[str] = None
    groups: list[str]
    active: bool = True


class GroupAssignBody(BaseModel):
    group_id: str


def create_gateway(app_ctx: Application) -> FastAPI:
    api = FastAPI(title="qms-assistant gateway", version="0.1.0")
    sessions = SessionTable(app_ctx)
    api.state.app_ctx = app_ctx
    api.state.sessions = sessions

    @api.exception_handler(AssistantError)
    async def _domain_error(request: Request, exc: AssistantError):
        status = ERROR_STATUS.get(type(exc), 500)
        return JSONResponse(
            status_code=status,
            content={"error": type(exc).__name__, "detail": str(exc)},
        )

    @api.middleware("http")
    async def _request_id(request: Request, call_next):
        response = await call_next(request)
        response.headers["X-Request-ID"] = uuid.uuid4().hex
        return response

    def session_dep(authorization: Optional[str] = Header(default=None)) -> Session:
        token = None
        if authorization and authorization.startswith("Bearer "):
            token = authorization.split(" ", 1)[1]
        return sessions.authenticate(token)

    def require(session: Session, permission: str) -> str:
        app_ctx.acl.require(session.user_id, permission)
        return session.user_id

    # -- public ----------------------------------------------------------

    @api.post("/login")
    def login(body: LoginBody):
        session = sessions.login(body.user_id, body.credential)
        return {
            "token": session.session_token,
            "user_id": session.user_id,
            "expires_at": session.expires_at,
            "capabilities": app_ctx.acl.permissions_of(session.user_id),
        }

    @api.get("/health")
    def health():
        return {
            "status": "ok",
            "vector_store_chunks": len(app_ctx.corpus.chunks("all_versions")),
            "documents": len(app_ctx.corpus.doc_ids()),
            "backend": type(app_ctx.backend).__name__,
        }

    # -- chat ------------------------------------------------------------

    @api.post("/chat")
    def chat(body: ChatBody, session: Session = Depends(session_dep)):
        user = require(session, "chat")
        turn, rendered, conversation_id = app_ctx.agent.run_turn(
            body.conversation_id,
            ModalityInput(body.modality, body.payload, body.transcript_hint),
            user=user,
            output_modality=body.output_modality,
        )
        return {
            "conversation_id": conversation_id,
            "turn": turn.to_dict(),
            "output": rendered.to_dict(),
        }

    @api.get("/conversations")
    def list_conversations(session: Session = Depends(session_dep)):
        user = require(session, "chat")
        return {"conversations": app_ctx.history.list_conversations(user)}

    @api.get("/conversations/{conversation_id}")
    def resume(conversation_id: str, session: Session = Depends(session_dep)):
        user = require(session, "chat")
        conversation = app_ctx.history.resume(conversation_id, user)
        return {
            "conversation_id": conversation.conversation_id,
            "owner": conversation.owner,
            "created_at": conversation.created_at,
            "last_active_at": conversation.last_active_at,
            "turns": [t.to_dict() for t in conversation.turns],
        }

    @api.get("/conversations/{conversation_id}/export")
    def export_conversation(conversation_id: str, session: Session = Depends(session_dep)):
        user = require(session, "chat")
        conversation = app_ctx.history.resume(conversation_id, user)
        import json as _json

        lines = "\n".join(
            _json.dumps(t.to_dict(), sort_keys=True, ensure_ascii=False)
            for t in conversation.turns
        )
        return PlainTextResponse(lines, media_type="application/jsonl")

    @api.get("/corpus/search")
    def search(query: str, top_k: int = 3, scope: str = "active",
               session: Session = Depends(session_dep)):
        require(session, "chat")
        results = app_ctx.corpus.retrieve(query, top_k=top_k, scope=scope)
        return {
            "results": [
                {"chunk_id": c.chunk_id, "doc_id": c.doc_id, "version": c.version,
                 "text": c.text, "score": score}
                for c, score in results
            ]
        }

    # -- feedback --------------------------------------------------------

    @api.post("/tickets")
    def create_ticket(body: TicketBody, session: Session = Depends(session_dep)):
        user = require(session, "flag_answer")
        ticket = app_ctx.feedback.create_ticket(
            body.conversation_id, body.turn_index, body.flag, user
        )
        return {"ticket": ticket.to_dict()}

    @api.get("/tickets")
    def list_tickets(state: Optional[str] = None, session: Session = Depends(session_dep)):
        require(session, "rewrite_ticket")
        return {"tickets": [t.to_dict() for t in app_ctx.feedback.list_tickets(state)]}

    @api.get("/tickets/export")
    def export_tickets(session: Session = Depends(session_dep)):
        require(session, "read_audit")
        return {"tickets": app_ctx.feedback.export_state()}

    @api.get("/tickets/{ticket_id}")
    def get_ticket(ticket_id: str, session: Session = Depends(session_dep)):
        require(session, "rewrite_ticket")
        return {"ticket": app_ctx.feedback.get(ticket_id).to_dict()}

    @api.post("/tickets/{ticket_id}/revision")
    def revise(ticket_id: str, body: RevisionBody, session: Session = Depends(session_dep)):
        user = require(session, "rewrite_ticket")
        ticket = app_ctx.feedback.revise_ticket(
            ticket_id, body.revision, body.attachments, user, body.target_doc_id
        )
        return {"ticket": ticket.to_dict()}

    @api.post("/tickets/{ticket_id}/checks")
    def run_checks(ticket_id: str, session: Session = Depends(session_dep)):
        user = require(session, "rewrite_ticket")
        jailbreak, fact = app_ctx.feedback.run_checks(ticket_id, user)
        return {
            "jailbreak": jailbreak.to_dict(),
            "fact": fact.to_dict(),
            "ticket": app_ctx.feedback.get(ticket_id).to_dict(),
        }

    @api.post("/tickets/{ticket_id}/integrate")
    def integrate(ticket_id: str, session: Session = Depends(session_dep)):
        user = require(session, "approve_ticket")
        reference = app_ctx.feedback.integrate_ticket(ticket_id, user)
        return {"document": reference, "ticket": app_ctx.feedback.get(ticket_id).to_dict()}

    @api.post("/tickets/{ticket_id}/reject")
    def reject(ticket_id: str, body: RejectBody, session: Session = Depends(session_dep)):
        user = require(session, "approve_ticket")
        ticket = app_ctx.feedback.reject_ticket(ticket_id, user, body.reason)
        return {"ticket": ticket.to_dict()}

    # -- analytics -------------------------------------------------------

    @api.get("/analytics/report")
    def analytics(start: str = "", end: str = "", session: Session = Depends(session_dep)):
        user = require(session, "read_ticket_analytics")
        return app_ctx.feedback.ticket_analytics(user, start, end or "￿")

    # -- corpus ----------------------------------------------------------

    @api.post("/corpus/documents")
    def ingest(body: IngestBody, session: Session = Depends(session_dep)):
        user = require(session, "manage_corpus")
        version = app_ctx.corpus.ingest_document(
            body.content.encode("utf-8"), body.format, user, body.doc_id,
            title=body.title, source_uri=body.source_uri, doc_kind=body.doc_kind,
        )
        return {"doc_id": version.doc_id, "version": version.version,
                "checksum": version.checksum}

    @api.get("/corpus/documents")
    def list_documents(session: Session = Depends(session_dep)):
        require(session, "manage_corpus")
        docs = []
        for doc_id in app_ctx.corpus.doc_ids():
            active = app_ctx.corpus.active_version(doc_id)
            docs.append({
                "doc_id": doc_id,
                "title": active.content.title,
                "active_version": active.version,
                "doc_kind": active.content.doc_kind,
            })
        return {"documents": docs}

    @api.get("/corpus/documents/{doc_id}")
    def show_document(doc_id: str, session: Session = Depends(session_dep)):
        require(session, "manage_corpus")
        versions = app_ctx.corpus.versions_of(doc_id)
        return {"doc_id": doc_id, "versions": [v.to_dict() for v in versions]}

    # -- audit -----------------------------------------------------------

    @api.get("/audit/records")
    def audit_records(start: int = 1, end: Optional[int] = None,
                      session: Session = Depends(session_dep)):
        require(session, "read_audit")
        return {"records": app_ctx.audit.export(start, end)}

    @api.get("/audit/verify")
    def audit_verify(session: Session = Depends(session_dep)):
        require(session, "read_audit")
        report = app_ctx.audit.verify_chain()
        return {"ok": report.ok, "first_broken_seq": report.first_broken_seq,
                "checked": report.checked}

    # -- admin -----------------------------------------------------------

    @api.post("/admin/users")
    def add_user(body: UserBody, session: Session = Depends(session_dep)):
        user = require(session, "manage_users")
        app_ctx.admin_add_user(
            body.user_id, body.display_name or body.user_id, body.groups,
            actor=user, active=body.active,
        )
        return {"user_id": body.user_id}

    @api.get("/admin/users")
    def list_users(session: Session = Depends(session_dep)):
        require(session, "manage_users")
        return {
            "users": [
                {"user_id": u.user_id, "display_name": u.display_name,
                 "groups": sorted(u.group_ids), "active": u.active}
                for u in app_ctx.acl.users.values()
            ]
        }

    @api.post("/admin/users/{user_id}/groups")
    def assign_group(user_id: str, body: GroupAssignBody,
                     session: Session = Depends(session_dep)):
        actor = require(session, "manage_users")
        updated = app_ctx.admin_assign_group(user_id, body.group_id, actor)
        return {"user_id": user_id, "groups": sorted(updated.group_ids)}

    return api
