"""Composition root: wires every module from one AppConfig.

Both the HTTP gateway and the CLI build an Application and call the same
domain services, so either path produces identical state and audit trails.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

from .access_control import AccessControl
from .audit import AuditLog
from .clock import Clock, utc_now_iso
from .config import AppConfig
from .conversational import (
    ConversationalAgent,
    StubSynthesizer,
    StubTranscriber,
)
from .corpus import CorpusStore
from .embedding import HashedBagEmbedder
from .errors import ConfigurationError
from .feedback import FeedbackService
from .guardrails import GuardrailPolicy
from .history import ConversationStore
from .llm_agent import (
    AdapterProfile,
    GENERAL_PROFILE,
    HttpChatBackend,
    ScriptedBackend,
)
from .tools import ToolRegistry


class Application:
    def __init__(self, config: AppConfig, clock: Optional[Clock] = None,
                 backend=None):
        self.config = config
        self.clock = clock or utc_now_iso
        data_dir = Path(config.data_dir)
        data_dir.mkdir(parents=True, exist_ok=True)

        self.acl = AccessControl.from_config(config.access_control)
        self._users_path = data_dir / "users.json"
        self._apply_user_overlay()
        self.audit = AuditLog(data_dir / "audit.jsonl", clock=self.clock)
        self.policy = (
            GuardrailPolicy.from_file(config.policy_path)
            if config.policy_path
            else GuardrailPolicy.default()
        )
        self.embedder = HashedBagEmbedder(config.embedding_dim)
        self.corpus = CorpusStore(
            data_dir / "corpus",
            embedder=self.embedder,
            audit=self.audit,
            acl=self.acl,
            clock=self.clock,
            window=config.chunk_window,
            overlap=config.chunk_overlap,
        )
        self.history = ConversationStore(data_dir / "conversations", acl=self.acl,
                                         clock=self.clock)
        self.registry = ToolRegistry.default()
        self.profiles = self._build_profiles(config.profiles)
        self.backend = backend if backend is not None else self._build_backend(config)
        self.feedback = FeedbackService(
            data_dir / "tickets",
            acl=self.acl,
            history=self.history,
            corpus=self.corpus,
            audit=self.audit,
            clock=self.clock,
            fact_threshold=config.fact_threshold,
        )
        self.agent = ConversationalAgent(
            acl=self.acl,
            corpus=self.corpus,
            history=self.history,
            backend=self.backend,
            policy=self.policy,
            registry=self.registry,
            profiles=self.profiles,
            audit=self.audit,
            transcriber=StubTranscriber() if config.voice_transcriber == "stub" else None,
            synthesizer=StubSynthesizer() if config.voice_synthesizer == "stub" else None,
            clock=self.clock,
            top_k=config.top_k,
            dialog_tail=config.dialog_tail,
            loop_cap=config.loop_cap,
        )

    @staticmethod
    def _build_profiles(raw: list[dict]) -> list[AdapterProfile]:
        profiles = [
            AdapterProfile(
                name=p["name"],
                description=p.get("description", ""),
                routing_keywords=tuple(p.get("keywords", [])),
                backend_hint=p.get("backend_hint", ""),
            )
            for p in raw
        ]
        if not any(p.name == "general" for p in profiles):
            profiles.append(GENERAL_PROFILE)
        return profiles

    @staticmethod
    def _build_backend(config: AppConfig):
        if config.backend_kind == "scripted":
            if config.backend_script:
                return ScriptedBackend.from_file(config.backend_script)
            return ScriptedBackend()
        if config.backend_kind == "http":
            return HttpChatBackend()
        raise ConfigurationError(f"unknown backend kind {config.backend_kind!r}")

    def _apply_user_overlay(self) -> None:
        # Users added or regrouped at runtime live in users.json so they
        # survive process restarts (each CLI run is a fresh process).
        from .access_control import User

        if not self._users_path.exists():
            return
        for record in json.loads(self._users_path.read_text("utf-8")).values():
            self.acl.users[record["user_id"]] = User(
                user_id=record["user_id"],
                display_name=record["display_name"],
                group_ids=frozenset(record["groups"]),
                active=record["active"],
            )

    def _save_user_overlay(self, user) -> None:
        overlay = {}
        if self._users_path.exists():
            overlay = json.loads(self._users_path.read_text("utf-8"))
        overlay[user.user_id] = {
            "user_id": user.user_id,
            "display_name": user.display_name,
            "groups": sorted(user.group_ids),
            "active": user.active,
        }
        self._users_path.write_text(
            json.dumps(overlay, sort_keys=True, ensure_ascii=False), "utf-8"
        )

    def admin_add_user(self, user_id: str, display_name: str, groups: list[str],
                       actor: str, active: bool = True) -> None:
        from .access_control import User

        self.acl.require(actor, "manage_users")
        self.acl.add_user(User(
            user_id=user_id,
            display_name=display_name or user_id,
            group_ids=frozenset(groups),
            active=active,
        ))
        self._save_user_overlay(self.acl.users[user_id])
        self.audit.record("user_added", subject=f"user:{user_id}", actor=actor,
                          detail={"groups": sorted(groups)})

    def admin_assign_group(self, user_id: str, group_id: str, actor: str):
        updated = self.acl.assign_group(user_id, group_id, actor)
        self._save_user_overlay(updated)
        self.audit.record("group_assigned", subject=f"user:{user_id}", actor=actor,
                          detail={"group_id": group_id})
        return updated

    def export_domain_state(self) -> str:
        """Canonical JSON snapshot of all domain aggregates (no sessions)."""
        state = {
            "corpus": self.corpus.export_state(),
            "conversations": self.history.export_state(),
            "tickets": self.feedback.export_state(),
        }
        return json.dumps(state, sort_keys=True, ensure_ascii=False, indent=2)
