"""Shared exception hierarchy.

Every module raises subclasses of AssistantError so the gateway can map
error kinds to stable HTTP codes with a single total mapping.
"""


class AssistantError(Exception):
    """Base class for all domain errors."""


class UnknownPrincipalError(AssistantError):
    """The referenced user does not exist in the registry.

    Distinct from an authorization deny so callers can tell a missing
    identity apart from an auth failure.
    """


class UnauthorizedError(AssistantError):
    """The acting user lacks the required permission."""


class NotFoundError(AssistantError):
    """A referenced aggregate (document, ticket, conversation) does not exist."""


class ValidationError(AssistantError):
    """Input failed validation (bad format, empty payload, bad arguments)."""


class IllegalStateError(AssistantError):
    """Operation not legal in the aggregate's current state."""


class OrderingViolationError(AssistantError):
    """Append-only sequence constraint violated (gap or duplicate index)."""


class ConfigurationError(AssistantError):
    """Malformed configuration or policy file; raised at load time only."""


class BackendUnreachableError(AssistantError):
    """A pluggable remote backend (LLM, embedder) could not be reached.

    Retryable; distinct from validation errors.
    """


class AgentLoopExhaustedError(AssistantError):
    """The generation agent loop hit its iteration cap without a final answer."""


class StorageError(AssistantError):
    """Durable storage failed; the triggering operation must fail closed."""


class AuthenticationError(AssistantError):
    """Login failed or session token invalid/expired."""
