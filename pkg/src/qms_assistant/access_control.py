"""Users, hierarchical user groups, and the Access Control List.

Hierarchy levels are ranks only: a higher level does NOT inherit lower
levels' grants. Every permission is an explicit (group, permission) entry,
which keeps the grant table auditable.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field, replace

from .errors import ConfigurationError, NotFoundError, UnauthorizedError, UnknownPrincipalError

# Closed permission vocabulary. Unknown permission strings in configuration
# are load-time errors, never silent denies.
PERMISSIONS = frozenset(
    {
        "chat",
        "flag_answer",
        "rewrite_ticket",
        "attach_document",
        "approve_ticket",
        "read_ticket_analytics",
        "manage_corpus",
        "manage_users",
        "read_audit",
    }
)

# Seed configuration: three groups at levels 2/1/0.
DEFAULT_GROUPS = [
    {"group_id": "managerial", "name": "Managerial", "level": 2},
    {"group_id": "supervisor", "name": "Supervisor", "level": 1},
    {"group_id": "operator", "name": "Operator", "level": 0},
]
DEFAULT_GRANTS = {
    "managerial": sorted(PERMISSIONS),
    "supervisor": ["chat", "flag_answer", "rewrite_ticket", "attach_document", "approve_ticket"],
    "operator": ["chat", "flag_answer"],
}


@dataclass(frozen=True)
class User:
    user_id: str
    display_name: str
    group_ids: frozenset[str]
    active: bool = True

    def __post_init__(self):
        if self.active and not self.group_ids:
            raise ConfigurationError(f"active user {self.user_id!r} has no groups")


@dataclass(frozen=True)
class UserGroup:
    group_id: str
    name: str
    level: int

    def __post_init__(self):
        if self.level < 0:
            raise ConfigurationError(f"group {self.group_id!r} has negative level")


@dataclass(frozen=True)
class AclEntry:
    group_id: str
    permission: str

    def __post_init__(self):
        if self.permission not in PERMISSIONS:
            raise ConfigurationError(f"unknown permission {self.permission!r}")


@dataclass(frozen=True)
class Decision:
    allowed: bool
    reason: str

    def __bool__(self) -> bool:
        return self.allowed


@dataclass
class AccessControl:
    """In-memory registry of users, groups, and grants.

    Reads are lock-free on immutable snapshots; mutations serialize on a
    single registry lock (per-user granularity is not needed at this scale).
    """

    users: dict[str, User] = field(default_factory=dict)
    groups: dict[str, UserGroup] = field(default_factory=dict)
    entries: set[AclEntry] = field(default_factory=set)
    _lock: threading.RLock = field(default_factory=threading.RLock, repr=False)

    # -- loading ----------------------------------------------------------

    @classmethod
    def from_config(cls, cfg: dict) -> "AccessControl":
        """Build a registry from the `access_control` configuration mapping.

        Expected keys: groups (list of {group_id, name, level}), grants
        (mapping group_id -> [permission]), users (list of
        {user_id, display_name, groups, active}).
        """
        acl = cls()
        for g in cfg.get("groups", DEFAULT_GROUPS):
            acl.add_group(UserGroup(g["group_id"], g.get("name", g["group_id"]), int(g["level"])))
        grants = cfg.get("grants", DEFAULT_GRANTS)
        for group_id, perms in grants.items():
            for perm in perms:
                acl.grant(group_id, perm)
        for u in cfg.get("users", []):
            acl.add_user(
                User(
                    user_id=u["user_id"],
                    display_name=u.get("display_name", u["user_id"]),
                    group_ids=frozenset(u["groups"]),
                    active=bool(u.get("active", True)),
                )
            )
        if acl.groups:
            acl._require_top_group()
        return acl

    def _require_top_group(self) -> None:
        max_level = max(g.level for g in self.groups.values())
        if not any(g.level == max_level for g in self.groups.values()):  # pragma: no cover
            raise ConfigurationError("no group at the maximum configured level")

    # -- mutations --------------------------------------------------------

    def add_group(self, group: UserGroup) -> None:
        with self._lock:
            self.groups[group.group_id] = group

    def add_user(self, user: User) -> None:
        with self._lock:
            if user.user_id in self.users:
                raise ConfigurationError(f"duplicate user_id {user.user_id!r}")
            for gid in user.group_ids:
                if gid not in self.groups:
                    raise NotFoundError(f"unknown group {gid!r}")
            self.users[user.user_id] = user

    def grant(self, group_id: str, permission: str) -> None:
        with self._lock:
            if group_id not in self.groups:
                raise NotFoundError(f"unknown group {group_id!r}")
            self.entries.add(AclEntry(group_id, permission))

    def assign_group(self, user_id: str, group_id: str, actor: str) -> User:
        """Add a user to a group. Idempotent. Caller must hold manage_users."""
        self.require(actor, "manage_users")
        with self._lock:
            user = self._get_user(user_id)
            if group_id not in self.groups:
                raise NotFoundError(f"unknown group {group_id!r}")
            if group_id in user.group_ids:
                return user
            updated = replace(user, group_ids=user.group_ids | {group_id})
            self.users[user_id] = updated
            return updated

    # -- queries ----------------------------------------------------------

    def _get_user(self, user_id: str) -> User:
        user = self.users.get(user_id)
        if user is None:
            raise UnknownPrincipalError(f"unknown principal {user_id!r}")
        return user

    def get_user(self, user_id: str) -> User:
        return self._get_user(user_id)

    def authorize(self, user_id: str, permission: str) -> Decision:
        """Allow iff the user is active and some group of theirs holds the grant."""
        if permission not in PERMISSIONS:
            raise ConfigurationError(f"unknown permission {permission!r}")
        user = self._get_user(user_id)
        if not user.active:
            return Decision(False, "principal is deactivated")
        for gid in sorted(user.group_ids):
            if AclEntry(gid, permission) in self.entries:
                return Decision(True, f"granted via group {gid!r}")
        return Decision(False, f"no group of {user_id!r} grants {permission!r}")

    def require(self, user_id: str, permission: str) -> None:
        decision = self.authorize(user_id, permission)
        if not decision.allowed:
            raise UnauthorizedError(f"{user_id!r} lacks {permission!r}: {decision.reason}")

    def permissions_of(self, user_id: str) -> list[str]:
        """All permissions the user currently holds (for UI capability lists)."""
        user = self._get_user(user_id)
        if not user.active:
            return []
        return sorted(
            {e.permission for e in self.entries if e.group_id in user.group_ids}
        )
