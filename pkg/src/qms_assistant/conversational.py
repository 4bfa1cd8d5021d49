"""Multimodal dialog orchestration.

Normalizes the input modality to text, runs the fixed pipeline
(guard input -> retrieve -> generate -> guard output -> persist), and
renders the answer in the requested modality. Voice handling is a
pluggable transcriber/synthesizer contract with deterministic stubs.
"""

from __future__ import annotations

import hashlib
import threading
from dataclasses import dataclass, field
from typing import Optional, Protocol

from .access_control import AccessControl
from .audit import AuditLog
from .clock import Clock, utc_now_iso
from .corpus import CorpusStore
from .errors import ConfigurationError, ValidationError
from .guardrails import GuardrailPolicy
from .history import ConversationStore, DialogTurn
from .llm_agent import (
    SYSTEM_PREAMBLE,
    AdapterProfile,
    GenerationBackend,
    PromptEnvelope,
    generate,
    select_adapter,
)
from .tools import ToolRegistry

REFUSAL_TEXT = "This request was declined by the safety policy."

DEFAULT_DIALOG_TAIL = 6
DEFAULT_TOP_K = 3


@dataclass(frozen=True)
class ModalityInput:
    modality: str  # text | voice
    payload: str  # text content or audio reference
    transcript_hint: Optional[str] = None


@dataclass(frozen=True)
class ModalityOutput:
    modality: str
    payload: str
    downgraded: bool = False

    def to_dict(self) -> dict:
        return {"modality": self.modality, "payload": self.payload, "downgraded": self.downgraded}


class Transcriber(Protocol):
    def transcribe(self, audio_ref: str, hint: Optional[str]) -> str: ...


class Synthesizer(Protocol):
    def synthesize(self, text: str) -> str: ...


class StubTranscriber:
    """Deterministic test transcriber: returns the transcript hint."""

    def transcribe(self, audio_ref: str, hint: Optional[str]) -> str:
        if hint is None:
            raise ValidationError(f"stub transcriber needs a transcript hint for {audio_ref!r}")
        return hint


class StubSynthesizer:
    """Deterministic test synthesizer: audio reference derived from the text."""

    def synthesize(self, text: str) -> str:
        digest = hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]
        return f"audio:{digest}"


def normalize_input(modality_input: ModalityInput,
                    transcriber: Optional[Transcriber] = None) -> str:
    if modality_input.modality == "text":
        return modality_input.payload
    if modality_input.modality == "voice":
        if transcriber is None:
            raise ConfigurationError("voice input received but no transcriber is configured")
        return transcriber.transcribe(modality_input.payload, modality_input.transcript_hint)
    raise ValidationError(f"unsupported modality {modality_input.modality!r}")


def render_output(text: str, requested: str,
                  synthesizer: Optional[Synthesizer] = None) -> ModalityOutput:
    if requested == "voice":
        if synthesizer is None:
            return ModalityOutput("text", text, downgraded=True)
        return ModalityOutput("voice", synthesizer.synthesize(text))
    return ModalityOutput("text", text)


@dataclass
class ConversationalAgent:
    """Per-turn orchestrator over retrieval, generation, and history."""

    acl: AccessControl
    corpus: CorpusStore
    history: ConversationStore
    backend: GenerationBackend
    policy: GuardrailPolicy
    registry: ToolRegistry
    profiles: list[AdapterProfile]
    audit: Optional[AuditLog] = None
    transcriber: Optional[Transcriber] = None
    synthesizer: Optional[Synthesizer] = None
    clock: Clock = utc_now_iso
    top_k: int = DEFAULT_TOP_K
    dialog_tail: int = DEFAULT_DIALOG_TAIL
    loop_cap: int = 4
    _conversation_locks: dict[str, threading.Lock] = field(default_factory=dict, repr=False)
    _locks_guard: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def _lock_for(self, conversation_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._conversation_locks.setdefault(conversation_id, threading.Lock())

    def run_turn(self, conversation_id: Optional[str], modality_input: ModalityInput,
                 user: str, output_modality: Optional[str] = None) -> tuple[DialogTurn, ModalityOutput, str]:
        """Execute one dialog turn; returns (turn, rendered output, conversation id).

        Turns within one conversation are serialized. A turn is only
        returned once persisted: no unrecorded answers.
        """
        self.acl.require(user, "chat")
        created = False
        if conversation_id is None:
            conversation = self.history.create(user)
            conversation_id = conversation.conversation_id
            created = True
        elif not self.history.exists(conversation_id):
            self.history.create(user, conversation_id)
            created = True
        if created and self.audit is not None:
            self.audit.record(
                "conversation_created", subject=f"conversation:{conversation_id}",
                actor=user, detail={},
            )
        output_modality = output_modality or modality_input.modality

        with self._lock_for(conversation_id):
            user_text = normalize_input(modality_input, self.transcriber)
            input_verdict = self.policy.guard_input(user_text)
            turn_index = self.history.length(conversation_id)
            if input_verdict.blocked:
                turn = DialogTurn(
                    turn_index=turn_index,
                    user_text=user_text,
                    assistant_text=REFUSAL_TEXT,
                    provenance=[],
                    tool_calls=[],
                    guard_flags=[input_verdict.to_dict()],
                    created_at=self.clock(),
                )
            else:
                retrieved = self.corpus.retrieve(user_text, top_k=self.top_k)
                profile = select_adapter(user_text, self.profiles)
                tail = [
                    {"user_text": t.user_text, "assistant_text": t.assistant_text}
                    for t in self.history.resume(conversation_id, actor=self._owner(conversation_id)).turns[-self.dialog_tail:]
                ]
                envelope = PromptEnvelope(
                    system_preamble=SYSTEM_PREAMBLE,
                    context_chunks=[
                        {"text": chunk.text, "doc_id": chunk.doc_id,
                         "version": chunk.version, "chunk_id": chunk.chunk_id}
                        for chunk, _score in retrieved
                    ],
                    dialog_tail=tail,
                    user_message=user_text,
                    adapter_profile=profile.name,
                )
                result = generate(envelope, self.backend, self.registry, self.policy,
                                  loop_cap=self.loop_cap)
                turn = DialogTurn(
                    turn_index=turn_index,
                    user_text=user_text,
                    assistant_text=result.answer,
                    provenance=result.provenance,
                    tool_calls=[c.to_dict() for c in result.tool_calls],
                    guard_flags=[input_verdict.to_dict(), result.output_verdict.to_dict()],
                    created_at=self.clock(),
                )
            self.history.append_turn(conversation_id, turn)
            if self.audit is not None:
                self.audit.record(
                    "turn_completed", subject=f"conversation:{conversation_id}",
                    actor=user,
                    detail={
                        "turn_index": turn.turn_index,
                        "blocked": input_verdict.blocked,
                        "provenance": turn.provenance,
                    },
                )
            rendered = render_output(turn.assistant_text, output_modality, self.synthesizer)
            return turn, rendered, conversation_id

    def _owner(self, conversation_id: str) -> str:
        return self.history._meta[conversation_id]["owner"]
