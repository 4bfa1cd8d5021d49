"""Human-in-the-loop feedback workflow.

Users flag an answer as "insufficient" (incorrect) or "extend" (partially
complete), which opens a ticket. Supervisors revise the ticket; it must
pass a jailbreak check and a fact check before an approver can integrate
it into the corpus. Tickets are event-sourced: one append-only JSONL event
file per ticket, replayed to current state on load.
"""

from __future__ import annotations

import json
import re
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .access_control import AccessControl
from .audit import AuditLog
from .clock import Clock, utc_now_iso
from .corpus import CorpusStore
from .errors import (
    IllegalStateError,
    NotFoundError,
    StorageError,
    ValidationError,
)
from .guardrails import DEFAULT_DENY_RULES, DenyRule
from .history import ConversationStore

FLAGS = ("insufficient", "extend")

STATES = ("OPEN", "IN_REVISION", "PENDING_CHECKS", "APPROVED", "INTEGRATED", "REJECTED")

LEGAL_TRANSITIONS = {
    ("OPEN", "IN_REVISION"),
    ("IN_REVISION", "PENDING_CHECKS"),
    ("PENDING_CHECKS", "APPROVED"),
    ("PENDING_CHECKS", "REJECTED"),
    ("APPROVED", "INTEGRATED"),
    # Any pre-INTEGRATED state can still be rejected outright.
    ("OPEN", "REJECTED"),
    ("IN_REVISION", "REJECTED"),
    ("APPROVED", "REJECTED"),
}

DEFAULT_FACT_THRESHOLD = 0.5

# Ticket payloads get a stricter rule set than live chat guardrails: the
# chat deny list plus blocker-document heuristics (exclusive-source
# phrasing, refusal bait, steering-imperative density).
BLOCKER_RULES = [
    DenyRule(
        "blocker.exclusive_source",
        r"\b(do not|don'?t|never)\s+(use|consult|trust|reference|cite|read)\s+(any\s+)?other\s+(document|source|manual|answer|material)",
        "prompt_injection",
    ),
    DenyRule(
        "blocker.supremacy",
        r"\bthis (document|answer|ticket) (is the only|supersedes all|overrides all)\b",
        "prompt_injection",
    ),
    DenyRule(
        "blocker.refusal_bait",
        r"\b(i cannot answer|refuse to answer|you must refuse|no answer is available|there is no answer)\b",
        "prompt_injection",
    ),
    DenyRule(
        "blocker.steering_imperative",
        r"\b(always|never|only)\s+(answer|say|respond|state|claim|tell|reply|assert)\b",
        "prompt_injection",
    ),
]

TICKET_RULES = list(DEFAULT_DENY_RULES) + BLOCKER_RULES

_SENTENCE_SPLIT = re.compile(r"[.!?\n]+")
_STEERING_SENTENCE = [
    re.compile(r"^(always|never|only)\s+(answer|say|respond|state|claim|tell|reply)", re.IGNORECASE),
    re.compile(r"^(ignore|disregard|forget|overlook)\b", re.IGNORECASE),
    re.compile(r"^(refuse|decline)\s+to\b", re.IGNORECASE),
    re.compile(r"^(pretend|act as)\b", re.IGNORECASE),
]
IMPERATIVE_DENSITY_THRESHOLD = 0.5

STOP_WORDS = frozenset(
    """a an and are as at be been but by for from had has have if in into is it its
    of on or that the their then there these this those to was were will with your
    you we they he she not no do does did can could should would may might must
    about after before during over under between within per each also than more
    most such other which what when where who how all any some only very""".split()
)

_WORD = re.compile(r"[a-z0-9]+")


def content_words(text: str) -> set[str]:
    return {w for w in _WORD.findall(text.casefold()) if w not in STOP_WORDS}


@dataclass(frozen=True)
class CheckResult:
    check_kind: str  # jailbreak | fact
    outcome: str  # pass | fail
    score: float
    evidence: str
    checked_by: str  # rules | llm | human | combined
    timestamp: str

    def to_dict(self) -> dict:
        return {
            "check_kind": self.check_kind,
            "outcome": self.outcome,
            "score": self.score,
            "evidence": self.evidence,
            "checked_by": self.checked_by,
            "timestamp": self.timestamp,
        }


def jailbreak_check(texts: list[str], clock: Clock = utc_now_iso,
                    rules: Optional[list[DenyRule]] = None) -> CheckResult:
    """Fail iff any deny rule matches any checked text, or the
    steering-imperative sentence density reaches the threshold."""
    rules = rules if rules is not None else TICKET_RULES
    now = clock()
    for text in texts:
        for rule in rules:
            if rule.matches(text):
                return CheckResult("jailbreak", "fail", 0.0, rule.rule_id, "rules", now)
        sentences = [s.strip() for s in _SENTENCE_SPLIT.split(text) if s.strip()]
        if sentences:
            steering = sum(
                1 for s in sentences if any(p.match(s) for p in _STEERING_SENTENCE)
            )
            if steering and steering / len(sentences) >= IMPERATIVE_DENSITY_THRESHOLD:
                return CheckResult(
                    "jailbreak", "fail", 0.0, "blocker.imperative_density", "rules", now
                )
    return CheckResult("jailbreak", "pass", 1.0, "no rule matched", "rules", now)


def fact_check(revision: str, context_texts: list[str],
               threshold: float = DEFAULT_FACT_THRESHOLD,
               clock: Clock = utc_now_iso) -> CheckResult:
    """Lexical containment of the revision's content words in the context.

    score = |revision-words ∩ context-words| / |revision-words|.
    """
    now = clock()
    context = " ".join(t for t in context_texts if t)
    if not content_words(context):
        return CheckResult("fact", "fail", 0.0, "no grounding context", "rules", now)
    revision_words = content_words(revision)
    if not revision_words:
        return CheckResult("fact", "fail", 0.0, "no content words in revision", "rules", now)
    grounded = revision_words & content_words(context)
    score = len(grounded) / len(revision_words)
    outcome = "pass" if score >= threshold else "fail"
    evidence = (
        f"{len(grounded)}/{len(revision_words)} content words grounded; "
        f"ungrounded: {sorted(revision_words - grounded)[:10]}"
    )
    return CheckResult("fact", outcome, score, evidence, "rules", now)


@dataclass
class FeedbackTicket:
    ticket_id: str
    conversation_id: str
    turn_index: int
    flag: str
    original_question: str
    original_answer: str
    original_context: list[str]
    created_by: str
    created_at: str
    revision: Optional[str] = None
    attachments: list[dict] = field(default_factory=list)
    target_doc_id: Optional[str] = None
    state: str = "OPEN"
    check_results: list[CheckResult] = field(default_factory=list)
    actor_trail: list[dict] = field(default_factory=list)
    integrated_document: Optional[dict] = None

    def to_dict(self) -> dict:
        return {
            "ticket_id": self.ticket_id,
            "conversation_id": self.conversation_id,
            "turn_index": self.turn_index,
            "flag": self.flag,
            "original_question": self.original_question,
            "original_answer": self.original_answer,
            "original_context": self.original_context,
            "created_by": self.created_by,
            "created_at": self.created_at,
            "revision": self.revision,
            "attachments": self.attachments,
            "target_doc_id": self.target_doc_id,
            "state": self.state,
            "check_results": [c.to_dict() for c in self.check_results],
            "actor_trail": self.actor_trail,
            "integrated_document": self.integrated_document,
        }


class FeedbackService:
    """Ticket lifecycle, security checks, integration, and analytics."""

    def __init__(
        self,
        root: Path,
        acl: AccessControl,
        history: ConversationStore,
        corpus: CorpusStore,
        audit: Optional[AuditLog] = None,
        clock: Optional[Clock] = None,
        fact_threshold: float = DEFAULT_FACT_THRESHOLD,
    ):
        self.root = Path(root)
        self.acl = acl
        self.history = history
        self.corpus = corpus
        self.audit = audit
        self.clock = clock or utc_now_iso
        self.fact_threshold = fact_threshold
        self._lock = threading.RLock()
        self._tickets: dict[str, FeedbackTicket] = {}
        self._load()

    # -- event sourcing ---------------------------------------------------

    def _load(self) -> None:
        if not self.root.exists():
            return
        for path in sorted(self.root.glob("tick-*.jsonl")):
            ticket: Optional[FeedbackTicket] = None
            with path.open("r", encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        ticket = self._apply_event(ticket, json.loads(line))
            if ticket is not None:
                self._tickets[ticket.ticket_id] = ticket

    @staticmethod
    def _apply_event(ticket: Optional[FeedbackTicket], event: dict) -> FeedbackTicket:
        kind, data = event["event"], event["data"]
        if kind == "created":
            return FeedbackTicket(**data)
        assert ticket is not None
        if kind == "revised":
            ticket.revision = data["revision"]
            ticket.attachments = data["attachments"]
            ticket.target_doc_id = data.get("target_doc_id")
        elif kind == "check_recorded":
            ticket.check_results = [
                c for c in ticket.check_results if c.check_kind != data["check_kind"]
            ]
            ticket.check_results.append(CheckResult(**data))
        elif kind == "state_changed":
            ticket.state = data["to"]
            if data.get("integrated_document"):
                ticket.integrated_document = data["integrated_document"]
        elif kind == "actor_recorded":
            ticket.actor_trail.append(data)
        return ticket

    def _append_event(self, ticket_id: str, kind: str, data: dict) -> None:
        event = {"event": kind, "at": self.clock(), "data": data}
        try:
            self.root.mkdir(parents=True, exist_ok=True)
            with (self.root / f"{ticket_id}.jsonl").open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(event, sort_keys=True, ensure_ascii=False) + "\n")
                fh.flush()
        except OSError as exc:
            raise StorageError(f"ticket event append failed: {exc}") from exc

    def _record_actor(self, ticket: FeedbackTicket, actor: str, action: str) -> None:
        entry = {
            "actor": actor,
            "action": action,
            "timestamp": self.clock(),
            "authorization": self.acl.permissions_of(actor),
        }
        ticket.actor_trail.append(entry)
        self._append_event(ticket.ticket_id, "actor_recorded", entry)

    def _transition(self, ticket: FeedbackTicket, to_state: str, actor: str,
                    detail: Optional[dict] = None) -> None:
        if (ticket.state, to_state) not in LEGAL_TRANSITIONS:
            raise IllegalStateError(
                f"illegal transition {ticket.state} -> {to_state} for {ticket.ticket_id}"
            )
        data = {"from": ticket.state, "to": to_state}
        if detail:
            data.update(detail)
        ticket.state = to_state
        if detail and detail.get("integrated_document"):
            ticket.integrated_document = detail["integrated_document"]
        self._append_event(ticket.ticket_id, "state_changed", data)
        if self.audit is not None:
            self.audit.record(
                "ticket_state_changed", subject=f"ticket:{ticket.ticket_id}",
                actor=actor, detail=data,
            )

    # -- queries ----------------------------------------------------------

    def get(self, ticket_id: str) -> FeedbackTicket:
        ticket = self._tickets.get(ticket_id)
        if ticket is None:
            raise NotFoundError(f"unknown ticket {ticket_id!r}")
        return ticket

    def list_tickets(self, state: Optional[str] = None) -> list[FeedbackTicket]:
        tickets = sorted(self._tickets.values(), key=lambda t: t.ticket_id)
        if state is not None:
            if state not in STATES:
                raise ValidationError(f"unknown ticket state {state!r}")
            tickets = [t for t in tickets if t.state == state]
        return tickets

    def export_state(self) -> dict:
        return {tid: self._tickets[tid].to_dict() for tid in sorted(self._tickets)}

    # -- operations -------------------------------------------------------

    def create_ticket(self, conversation_id: str, turn_index: int, flag: str,
                      actor: str) -> FeedbackTicket:
        self.acl.require(actor, "flag_answer")
        if flag not in FLAGS:
            raise ValidationError(f"flag must be one of {FLAGS}, got {flag!r}")
        turn = self.history.get_turn(conversation_id, turn_index)
        with self._lock:
            for ticket in self._tickets.values():
                if (
                    ticket.conversation_id == conversation_id
                    and ticket.turn_index == turn_index
                    and ticket.flag == flag
                    and ticket.created_by == actor
                ):
                    return ticket  # double-flag is idempotent per actor
            context = []
            for prov in turn.provenance:
                chunk = self.corpus._chunks.get(prov.get("chunk_id", ""))
                context.append(chunk.text if chunk else "")
            ticket = FeedbackTicket(
                ticket_id=f"tick-{len(self._tickets) + 1:06d}",
                conversation_id=conversation_id,
                turn_index=turn_index,
                flag=flag,
                original_question=turn.user_text,
                original_answer=turn.assistant_text,
                original_context=[c for c in context if c],
                created_by=actor,
                created_at=self.clock(),
            )
            self._append_event(ticket.ticket_id, "created", ticket.to_dict() | {
                "check_results": [], "actor_trail": [],
            })
            self._tickets[ticket.ticket_id] = ticket
            self._record_actor(ticket, actor, f"flagged:{flag}")
            if self.audit is not None:
                self.audit.record(
                    "ticket_created", subject=f"ticket:{ticket.ticket_id}", actor=actor,
                    detail={"flag": flag, "conversation_id": conversation_id,
                            "turn_index": turn_index},
                )
            return ticket

    def revise_ticket(self, ticket_id: str, revision_text: str,
                      attachments: Optional[list[dict]] = None, actor: str = "",
                      target_doc_id: Optional[str] = None) -> FeedbackTicket:
        self.acl.require(actor, "rewrite_ticket")
        attachments = attachments or []
        if attachments:
            self.acl.require(actor, "attach_document")
        if not revision_text.strip():
            raise ValidationError("revision text is empty")
        with self._lock:
            ticket = self.get(ticket_id)
            if ticket.state not in ("OPEN", "IN_REVISION"):
                raise IllegalStateError(
                    f"cannot revise ticket in state {ticket.state}"
                )
            ticket.revision = revision_text
            ticket.attachments = list(attachments)
            ticket.target_doc_id = target_doc_id
            self._append_event(ticket_id, "revised", {
                "revision": revision_text, "attachments": ticket.attachments,
                "target_doc_id": target_doc_id,
            })
            self._record_actor(ticket, actor, "revised")
            if ticket.state == "OPEN":
                self._transition(ticket, "IN_REVISION", actor)
            elif self.audit is not None:
                # Re-revision changes content without a state transition;
                # still an auditable action.
                self.audit.record(
                    "ticket_revised", subject=f"ticket:{ticket_id}", actor=actor,
                    detail={"state": ticket.state},
                )
            return ticket

    def run_checks(self, ticket_id: str, actor: str) -> tuple[CheckResult, CheckResult]:
        """Run both security checks; APPROVED iff both pass, else REJECTED."""
        self.acl.require(actor, "rewrite_ticket")
        with self._lock:
            ticket = self.get(ticket_id)
            if ticket.state != "IN_REVISION":
                raise IllegalStateError(
                    f"checks require state IN_REVISION, ticket is {ticket.state}"
                )
            if not ticket.revision:
                raise ValidationError("ticket has no revision to check")
            self._transition(ticket, "PENDING_CHECKS", actor)
            attachment_texts = [a.get("text", "") for a in ticket.attachments]
            jailbreak = jailbreak_check([ticket.revision] + attachment_texts, self.clock)
            fact = fact_check(
                ticket.revision,
                ticket.original_context + attachment_texts,
                self.fact_threshold,
                self.clock,
            )
            ticket.check_results = [jailbreak, fact]
            for result in (jailbreak, fact):
                self._append_event(ticket_id, "check_recorded", result.to_dict())
            self._record_actor(ticket, actor, "ran_checks")
            outcome_state = (
                "APPROVED" if jailbreak.outcome == "pass" and fact.outcome == "pass"
                else "REJECTED"
            )
            self._transition(ticket, outcome_state, actor, detail={
                "jailbreak": jailbreak.outcome, "fact": fact.outcome,
            })
            return jailbreak, fact

    def override_check(self, ticket_id: str, check_kind: str, outcome: str,
                       actor: str, note: str = "") -> CheckResult:
        """Human override of one check result on a checked ticket."""
        self.acl.require(actor, "approve_ticket")
        if check_kind not in ("jailbreak", "fact") or outcome not in ("pass", "fail"):
            raise ValidationError("override needs a valid check kind and outcome")
        with self._lock:
            ticket = self.get(ticket_id)
            if ticket.state not in ("APPROVED", "REJECTED"):
                raise IllegalStateError("override applies after checks have run")
            result = CheckResult(
                check_kind, outcome, 1.0 if outcome == "pass" else 0.0,
                f"human override by role holder: {note}" if note else "human override",
                "human", self.clock(),
            )
            ticket.check_results = [
                c for c in ticket.check_results if c.check_kind != check_kind
            ] + [result]
            self._append_event(ticket_id, "check_recorded", result.to_dict())
            self._record_actor(ticket, actor, f"override:{check_kind}={outcome}")
            if self.audit is not None:
                self.audit.record(
                    "ticket_check_overridden", subject=f"ticket:{ticket_id}",
                    actor=actor, detail={"check_kind": check_kind, "outcome": outcome},
                )
            return result

    def integrate_ticket(self, ticket_id: str, actor: str) -> dict:
        """Apply an APPROVED ticket to the corpus and mark it INTEGRATED."""
        self.acl.require(actor, "approve_ticket")
        with self._lock:
            ticket = self.get(ticket_id)
            if ticket.state != "APPROVED":
                raise IllegalStateError(
                    f"only APPROVED tickets integrate, ticket is {ticket.state}"
                )
            payload = ticket.to_dict() | {"actor": actor}
            version = self.corpus.apply_ticket_update(payload)
            reference = {"doc_id": version.doc_id, "version": version.version}
            self._record_actor(ticket, actor, "integrated")
            self._transition(ticket, "INTEGRATED", actor,
                             detail={"integrated_document": reference})
            return reference

    def reject_ticket(self, ticket_id: str, actor: str, reason: str = "") -> FeedbackTicket:
        self.acl.require(actor, "approve_ticket")
        with self._lock:
            ticket = self.get(ticket_id)
            if ticket.state in ("INTEGRATED", "REJECTED"):
                raise IllegalStateError(f"cannot reject ticket in state {ticket.state}")
            self._record_actor(ticket, actor, "rejected")
            self._transition(ticket, "REJECTED", actor, detail={"reason": reason})
            return ticket

    def ticket_analytics(self, actor: str, start: str = "", end: str = "￿") -> dict:
        """Anonymous counts and the incomplete-answer rate over a time range.

        rate_of_incomplete_answers = extend tickets / assistant turns in range.
        No user identifier appears anywhere in the report.
        """
        self.acl.require(actor, "read_ticket_analytics")
        in_range = [
            t for t in self._tickets.values() if start <= t.created_at <= end
        ]
        counts_by_flag = {flag: 0 for flag in FLAGS}
        counts_by_state = {state: 0 for state in STATES}
        for ticket in in_range:
            counts_by_flag[ticket.flag] += 1
            counts_by_state[ticket.state] += 1
        turns = self.history.assistant_turns_in_range(start, end)
        rate = counts_by_flag["extend"] / turns if turns else 0.0
        return {
            "range": {"from": start, "to": "" if end == "￿" else end},
            "total_tickets": len(in_range),
            "counts_by_flag": counts_by_flag,
            "counts_by_state": counts_by_state,
            "assistant_turns": turns,
            "rate_of_incomplete_answers": rate,
        }
