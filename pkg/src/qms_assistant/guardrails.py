"""Rule-based guardrails for user prompts and model responses.

Deny rules are case-insensitive regex patterns grouped by category
(prompt injection vs. policy violation). Verdicts are deterministic for a
fixed policy; policies are validated at load time and swapped atomically
as immutable snapshots.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import yaml

from .errors import ConfigurationError

CATEGORIES = ("prompt_injection", "policy_violation", "none")


@dataclass(frozen=True)
class DenyRule:
    rule_id: str
    pattern: str
    category: str
    _compiled: re.Pattern = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.category not in ("prompt_injection", "policy_violation"):
            raise ConfigurationError(f"rule {self.rule_id!r}: bad category {self.category!r}")
        try:
            object.__setattr__(self, "_compiled", re.compile(self.pattern, re.IGNORECASE))
        except re.error as exc:
            raise ConfigurationError(f"rule {self.rule_id!r}: bad pattern: {exc}") from exc

    def matches(self, text: str) -> bool:
        return bool(self._compiled.search(text))


@dataclass(frozen=True)
class GuardrailVerdict:
    decision: str  # pass | block
    category: str  # prompt_injection | policy_violation | none
    stage: str  # input | output
    matched_rule: Optional[str] = None

    def __post_init__(self):
        if self.decision == "block" and (self.category == "none" or not self.matched_rule):
            raise ValueError("blocked verdicts carry a category and rule id")

    @property
    def blocked(self) -> bool:
        return self.decision == "block"

    def to_dict(self) -> dict:
        return {
            "decision": self.decision,
            "category": self.category,
            "stage": self.stage,
            "matched_rule": self.matched_rule,
        }


# Shipped deny-pattern list. Injection rules cover instruction-override,
# prompt-extraction, persona-hijack, and secrecy-injection attempts.
DEFAULT_DENY_RULES = [
    DenyRule("injection.override", r"\bignore\b.{0,30}\b(previous|prior|earlier|all|above)\b.{0,30}\b(instruction|rule|prompt|context)", "prompt_injection"),
    DenyRule("injection.disregard", r"\b(disregard|forget|override)\b.{0,30}\b(instruction|rule|system prompt|guideline|training)", "prompt_injection"),
    DenyRule("injection.reveal", r"\b(reveal|show|print|repeat|leak)\b.{0,40}\b(system prompt|hidden prompt|developer message|initial instruction)", "prompt_injection"),
    DenyRule("injection.persona", r"\byou are now\b|\bpretend (to be|you are)\b|\bact as if you (have no|are not)\b", "prompt_injection"),
    DenyRule("injection.jailbreak", r"\b(jailbreak|dan mode|developer mode enabled|no restrictions apply)\b", "prompt_injection"),
    DenyRule("injection.secrecy", r"\bdo not tell (the user|anyone)\b|\bkeep this (instruction )?secret\b", "prompt_injection"),
]


@dataclass(frozen=True)
class GuardrailPolicy:
    """Immutable policy snapshot: deny rules plus confidential phrase rules."""

    version: str
    deny_rules: tuple[DenyRule, ...]
    confidential_terms: tuple[str, ...] = ()

    @classmethod
    def default(cls) -> "GuardrailPolicy":
        return cls(version="builtin-1", deny_rules=tuple(DEFAULT_DENY_RULES))

    @classmethod
    def from_file(cls, path: Path) -> "GuardrailPolicy":
        try:
            data = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigurationError(f"cannot load policy {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigurationError(f"policy {path} is not a mapping")
        rules = [
            DenyRule(r["id"], r["pattern"], r.get("category", "prompt_injection"))
            for r in data.get("deny_patterns", [])
        ]
        return cls(
            version=str(data.get("version", "0")),
            deny_rules=tuple(rules) if rules else tuple(DEFAULT_DENY_RULES),
            confidential_terms=tuple(data.get("confidential_terms", [])),
        )

    def _check(self, text: str, stage: str) -> GuardrailVerdict:
        for rule in self.deny_rules:
            if rule.matches(text):
                return GuardrailVerdict("block", rule.category, stage, rule.rule_id)
        if stage == "output":
            lowered = text.casefold()
            for term in self.confidential_terms:
                if term.casefold() in lowered:
                    return GuardrailVerdict(
                        "block", "policy_violation", stage, f"confidential:{term}"
                    )
        return GuardrailVerdict("pass", "none", stage)

    def guard_input(self, message: str) -> GuardrailVerdict:
        return self._check(message, "input")

    def guard_output(self, response: str) -> GuardrailVerdict:
        return self._check(response, "output")
