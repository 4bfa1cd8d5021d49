"""Guardrailed LLM agent: adapter routing, generation loop, function calling.

The generation backend is pluggable. Two implementations ship: a scripted
in-process backend driven by matcher -> response rules (deterministic, used
by every test), and a JSON-over-HTTP chat-completion backend for real
deployments. Both speak the same reply contract: each round the backend
returns either final text or a tool-call request.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Protocol

import yaml

from .errors import (
    AgentLoopExhaustedError,
    BackendUnreachableError,
    ConfigurationError,
)
from .guardrails import GuardrailPolicy, GuardrailVerdict
from .tools import ToolRegistry
from .errors import NotFoundError, ValidationError

DEFAULT_LOOP_CAP = 4

SYSTEM_PREAMBLE = (
    "Answer strictly from the provided context chunks. Cite the chunks you "
    "used by index, e.g. [0]. If the context does not contain the answer, "
    "say so instead of guessing."
)

REFUSAL_TEXT = "I can't help with that request."


@dataclass(frozen=True)
class AdapterProfile:
    name: str
    description: str = ""
    routing_keywords: tuple[str, ...] = ()
    backend_hint: str = ""


GENERAL_PROFILE = AdapterProfile("general", "fallback profile")


def select_adapter(message: str, profiles: list[AdapterProfile]) -> AdapterProfile:
    """Pick the profile with the most routing keywords present in the message.

    Ties (including zero matches everywhere) fall back to "general".
    """
    by_name = {p.name: p for p in profiles}
    if "general" not in by_name:
        raise ConfigurationError('profile list must include "general"')
    lowered = message.casefold()
    scores = {
        p.name: sum(1 for kw in p.routing_keywords if kw.casefold() in lowered)
        for p in profiles
    }
    best = max(scores.values(), default=0)
    winners = [name for name, score in scores.items() if score == best]
    if best == 0 or len(winners) > 1:
        return by_name["general"]
    return by_name[winners[0]]


@dataclass
class PromptEnvelope:
    system_preamble: str
    context_chunks: list[dict]  # {"text": ..., "doc_id": ..., "version": ..., "chunk_id": ...}
    dialog_tail: list[dict]  # {"user_text": ..., "assistant_text": ...}
    user_message: str
    adapter_profile: str = "general"


@dataclass
class ToolCall:
    tool_name: str
    arguments: dict
    result: Any = None

    def to_dict(self) -> dict:
        return {"tool_name": self.tool_name, "arguments": self.arguments, "result": self.result}


@dataclass
class BackendReply:
    """One backend round: either final text or a tool-call request."""

    kind: str  # "text" | "tool_call"
    text: str = ""
    tool_name: str = ""
    arguments: dict = field(default_factory=dict)


class GenerationBackend(Protocol):
    def respond(self, envelope: PromptEnvelope, calls: list[ToolCall]) -> BackendReply: ...


@dataclass
class GenerationResult:
    answer: str
    tool_calls: list[ToolCall]
    provenance: list[dict]
    output_verdict: GuardrailVerdict
    adapter_profile: str
    grounded: bool
    refused: bool = False


_CITATION = re.compile(r"\[\d+\]")


def generate(
    envelope: PromptEnvelope,
    backend: GenerationBackend,
    registry: ToolRegistry,
    policy: GuardrailPolicy,
    loop_cap: int = DEFAULT_LOOP_CAP,
) -> GenerationResult:
    """Run the agent loop: backend rounds with tool execution, then an
    output guardrail pass on the final text.

    Terminates within loop_cap rounds for every backend behavior. An
    unknown-tool request is fed back once as an error result; a second one
    aborts.
    """
    calls: list[ToolCall] = []
    unknown_tool_seen = False
    for _ in range(loop_cap):
        reply = backend.respond(envelope, calls)
        if reply.kind == "tool_call":
            call = ToolCall(reply.tool_name, dict(reply.arguments))
            try:
                call.result = registry.call(reply.tool_name, reply.arguments)
            except NotFoundError as exc:
                if unknown_tool_seen:
                    raise AgentLoopExhaustedError(
                        f"agent loop aborted: repeated unknown tool {reply.tool_name!r}"
                    ) from exc
                unknown_tool_seen = True
                call.result = {"error": str(exc)}
            except ValidationError as exc:
                call.result = {"error": str(exc)}
            calls.append(call)
            continue
        verdict = policy.guard_output(reply.text)
        if verdict.blocked:
            return GenerationResult(
                answer=REFUSAL_TEXT,
                tool_calls=calls,
                provenance=[_provenance(c) for c in envelope.context_chunks],
                output_verdict=verdict,
                adapter_profile=envelope.adapter_profile,
                grounded=False,
                refused=True,
            )
        return GenerationResult(
            answer=reply.text,
            tool_calls=calls,
            provenance=[_provenance(c) for c in envelope.context_chunks],
            output_verdict=verdict,
            adapter_profile=envelope.adapter_profile,
            grounded=bool(_CITATION.search(reply.text)),
        )
    raise AgentLoopExhaustedError(f"agent loop exhausted after {loop_cap} iterations")


def _provenance(chunk: dict) -> dict:
    return {
        "doc_id": chunk["doc_id"],
        "version": chunk["version"],
        "chunk_id": chunk.get("chunk_id", ""),
    }


# -- scripted backend -------------------------------------------------------


@dataclass
class ScriptRule:
    match: str
    steps: list[dict]
    regex: bool = False

    def matches(self, message: str) -> bool:
        if self.regex:
            return bool(re.search(self.match, message, re.IGNORECASE))
        return self.match.casefold() in message.casefold()


class ScriptedBackend:
    """Deterministic backend driven by matcher -> steps rules.

    Each rule's steps run in order across agent-loop rounds; a step is
    either {"tool": name, "args": {...}} or {"text": template}. Templates
    may reference {result} (last tool result), {profile}, and {context}
    (first chunk text). Without a matching rule the backend answers with a
    profile-prefixed summary of the first context chunk, citing it.
    """

    def __init__(self, rules: Optional[list[ScriptRule]] = None, default_text: Optional[str] = None):
        self.rules = rules or []
        self.default_text = default_text
        self.call_count = 0

    @classmethod
    def from_file(cls, path: Path) -> "ScriptedBackend":
        try:
            data = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigurationError(f"cannot load backend script {path}: {exc}") from exc
        rules = [
            ScriptRule(r["match"], r["steps"], bool(r.get("regex", False)))
            for r in data.get("rules", [])
        ]
        return cls(rules, data.get("default", {}).get("text"))

    def _render(self, template: str, envelope: PromptEnvelope, calls: list[ToolCall]) -> str:
        result = calls[-1].result if calls else ""
        context = envelope.context_chunks[0]["text"] if envelope.context_chunks else ""
        return (
            template.replace("{result}", json.dumps(result) if isinstance(result, dict) else str(result))
            .replace("{profile}", envelope.adapter_profile)
            .replace("{context}", context)
        )

    def respond(self, envelope: PromptEnvelope, calls: list[ToolCall]) -> BackendReply:
        self.call_count += 1
        for rule in self.rules:
            if rule.matches(envelope.user_message):
                step = rule.steps[min(len(calls), len(rule.steps) - 1)]
                if "tool" in step and len(calls) < len(rule.steps) - 1:
                    return BackendReply(
                        "tool_call", tool_name=step["tool"], arguments=step.get("args", {})
                    )
                final = rule.steps[-1]
                return BackendReply("text", text=self._render(final.get("text", ""), envelope, calls))
        if self.default_text is not None:
            return BackendReply("text", text=self._render(self.default_text, envelope, calls))
        if envelope.context_chunks:
            first = envelope.context_chunks[0]["text"]
            snippet = " ".join(first.split()[:40])
            return BackendReply(
                "text", text=f"[{envelope.adapter_profile}] Based on the documentation: {snippet} [0]"
            )
        return BackendReply(
            "text",
            text=f"[{envelope.adapter_profile}] No relevant documentation was found for: "
            f"{envelope.user_message}",
        )


# -- remote backend ---------------------------------------------------------


class HttpChatBackend:
    """Chat-completion-style JSON/HTTP backend with function-call fields.

    Endpoint and credentials come from the environment
    (LLM_BACKEND_URL, LLM_BACKEND_TOKEN) unless given explicitly.
    """

    def __init__(self, endpoint: Optional[str] = None, token: Optional[str] = None,
                 model: str = "default", timeout: float = 30.0):
        self.endpoint = endpoint or os.environ.get("LLM_BACKEND_URL", "")
        self.token = token if token is not None else os.environ.get("LLM_BACKEND_TOKEN", "")
        self.model = model
        self.timeout = timeout
        if not self.endpoint:
            raise ConfigurationError("remote backend requires LLM_BACKEND_URL")

    def _messages(self, envelope: PromptEnvelope, calls: list[ToolCall]) -> list[dict]:
        messages = [{"role": "system", "content": envelope.system_preamble}]
        for i, chunk in enumerate(envelope.context_chunks):
            messages.append(
                {"role": "system",
                 "content": f"[{i}] ({chunk['doc_id']} v{chunk['version']}) {chunk['text']}"}
            )
        for turn in envelope.dialog_tail:
            messages.append({"role": "user", "content": turn["user_text"]})
            messages.append({"role": "assistant", "content": turn["assistant_text"]})
        messages.append({"role": "user", "content": envelope.user_message})
        for call in calls:
            messages.append(
                {"role": "tool", "name": call.tool_name, "content": json.dumps(call.result)}
            )
        return messages

    def respond(self, envelope: PromptEnvelope, calls: list[ToolCall]) -> BackendReply:
        import requests

        headers = {"Content-Type": "application/json"}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        payload = {
            "model": self.model,
            "adapter": envelope.adapter_profile,
            "messages": self._messages(envelope, calls),
        }
        try:
            resp = requests.post(self.endpoint, json=payload, headers=headers, timeout=self.timeout)
            resp.raise_for_status()
            message = resp.json()["choices"][0]["message"]
        except (requests.RequestException, KeyError, ValueError) as exc:
            raise BackendUnreachableError(f"generation backend failed: {exc}") from exc
        tool_calls = message.get("tool_calls") or []
        if tool_calls:
            first = tool_calls[0]["function"]
            arguments = first.get("arguments", {})
            if isinstance(arguments, str):
                arguments = json.loads(arguments or "{}")
            return BackendReply("tool_call", tool_name=first["name"], arguments=arguments)
        return BackendReply("text", text=message.get("content") or "")
