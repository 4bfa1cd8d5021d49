"""Durable conversation storage and resumption.

One append-only JSONL file per conversation (one turn per line) plus an
index file with conversation metadata. Replay of the files reproduces
every conversation exactly.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .access_control import AccessControl
from .clock import Clock, utc_now_iso
from .errors import (
    NotFoundError,
    OrderingViolationError,
    StorageError,
    UnauthorizedError,
)


@dataclass
class DialogTurn:
    turn_index: int
    user_text: str
    assistant_text: str
    provenance: list[dict] = field(default_factory=list)
    tool_calls: list[dict] = field(default_factory=list)
    guard_flags: list[dict] = field(default_factory=list)
    created_at: str = ""

    def to_dict(self) -> dict:
        return {
            "turn_index": self.turn_index,
            "user_text": self.user_text,
            "assistant_text": self.assistant_text,
            "provenance": self.provenance,
            "tool_calls": self.tool_calls,
            "guard_flags": self.guard_flags,
            "created_at": self.created_at,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DialogTurn":
        return cls(**d)


@dataclass
class Conversation:
    conversation_id: str
    owner: str
    turns: list[DialogTurn]
    created_at: str
    last_active_at: str

    def title(self) -> str:
        if not self.turns:
            return "(empty conversation)"
        words = self.turns[0].user_text.split()
        return " ".join(words[:8]) + ("…" if len(words) > 8 else "")


class ConversationStore:
    def __init__(self, root: Path, acl: Optional[AccessControl] = None,
                 clock: Optional[Clock] = None):
        self.root = Path(root)
        self.index_path = self.root / "index.json"
        self.acl = acl
        self.clock = clock or utc_now_iso
        self._lock = threading.RLock()
        self._meta: dict[str, dict] = {}
        if self.index_path.exists():
            self._meta = json.loads(self.index_path.read_text(encoding="utf-8"))

    def _turns_path(self, conversation_id: str) -> Path:
        return self.root / f"{conversation_id}.jsonl"

    def _write_index(self) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        self.index_path.write_text(
            json.dumps(self._meta, sort_keys=True, ensure_ascii=False, indent=2) + "\n",
            encoding="utf-8",
        )

    def _load_turns(self, conversation_id: str) -> list[DialogTurn]:
        path = self._turns_path(conversation_id)
        if not path.exists():
            return []
        turns = []
        with path.open("r", encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    turns.append(DialogTurn.from_dict(json.loads(line)))
        return turns

    # -- operations -------------------------------------------------------

    def create(self, owner: str, conversation_id: Optional[str] = None) -> Conversation:
        with self._lock:
            if conversation_id is None:
                conversation_id = f"conv-{len(self._meta) + 1:06d}"
            if conversation_id in self._meta:
                raise OrderingViolationError(f"conversation {conversation_id!r} exists")
            now = self.clock()
            self._meta[conversation_id] = {
                "owner": owner, "created_at": now, "last_active_at": now, "length": 0,
            }
            self._write_index()
            return Conversation(conversation_id, owner, [], now, now)

    def exists(self, conversation_id: str) -> bool:
        return conversation_id in self._meta

    def append_turn(self, conversation_id: str, turn: DialogTurn) -> int:
        """Append one turn; durable before the position is acknowledged."""
        with self._lock:
            meta = self._meta.get(conversation_id)
            if meta is None:
                raise NotFoundError(f"unknown conversation {conversation_id!r}")
            if turn.turn_index != meta["length"]:
                raise OrderingViolationError(
                    f"turn_index {turn.turn_index} != next index {meta['length']}"
                )
            try:
                self.root.mkdir(parents=True, exist_ok=True)
                with self._turns_path(conversation_id).open("a", encoding="utf-8") as fh:
                    fh.write(json.dumps(turn.to_dict(), sort_keys=True, ensure_ascii=False) + "\n")
                    fh.flush()
            except OSError as exc:
                raise StorageError(f"turn append failed: {exc}") from exc
            meta["length"] += 1
            meta["last_active_at"] = turn.created_at or self.clock()
            self._write_index()
            return turn.turn_index

    def resume(self, conversation_id: str, actor: str) -> Conversation:
        """Full ordered turn list; owner or audit-permission holders only."""
        meta = self._meta.get(conversation_id)
        if meta is None:
            raise NotFoundError(f"unknown conversation {conversation_id!r}")
        if actor != meta["owner"]:
            if self.acl is None or not self.acl.authorize(actor, "read_audit"):
                raise UnauthorizedError(
                    f"{actor!r} is not the owner and lacks read_audit"
                )
        return Conversation(
            conversation_id=conversation_id,
            owner=meta["owner"],
            turns=self._load_turns(conversation_id),
            created_at=meta["created_at"],
            last_active_at=meta["last_active_at"],
        )

    def get_turn(self, conversation_id: str, turn_index: int) -> DialogTurn:
        turns = self._load_turns(conversation_id)
        if not self.exists(conversation_id):
            raise NotFoundError(f"unknown conversation {conversation_id!r}")
        if not 0 <= turn_index < len(turns):
            raise NotFoundError(f"no turn {turn_index} in {conversation_id!r}")
        return turns[turn_index]

    def length(self, conversation_id: str) -> int:
        meta = self._meta.get(conversation_id)
        if meta is None:
            raise NotFoundError(f"unknown conversation {conversation_id!r}")
        return meta["length"]

    def list_conversations(self, actor: str) -> list[dict]:
        """Summaries of the actor's own conversations, most recent first."""
        own = [
            (cid, meta) for cid, meta in self._meta.items() if meta["owner"] == actor
        ]
        own.sort(key=lambda item: (item[1]["last_active_at"], item[0]), reverse=True)
        summaries = []
        for cid, meta in own:
            turns = self._load_turns(cid)
            title = "(empty conversation)"
            if turns:
                words = turns[0].user_text.split()
                title = " ".join(words[:8]) + ("…" if len(words) > 8 else "")
            summaries.append(
                {"conversation_id": cid, "title": title, "last_active_at": meta["last_active_at"]}
            )
        return summaries

    def assistant_turns_in_range(self, start: str = "", end: str = "￿") -> int:
        """Count of stored assistant turns with created_at in [start, end]."""
        count = 0
        for cid in self._meta:
            for turn in self._load_turns(cid):
                if start <= turn.created_at <= end:
                    count += 1
        return count

    def export_state(self) -> dict:
        return {
            cid: {
                "meta": self._meta[cid],
                "turns": [t.to_dict() for t in self._load_turns(cid)],
            }
            for cid in sorted(self._meta)
        }
