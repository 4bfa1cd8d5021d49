import pytest
from hypothesis import given, strategies as st

from qms_assistant.access_control import (
    AccessControl,
    AclEntry,
    PERMISSIONS,
    User,
    UserGroup,
)
from qms_assistant.errors import (
    ConfigurationError,
    NotFoundError,
    UnauthorizedError,
    UnknownPrincipalError,
)

from conftest import ACCESS_CONTROL


@pytest.fixture
def acl():
    return AccessControl.from_config(ACCESS_CONTROL)


def test_supervisor_can_rewrite(acl):
    assert acl.authorize("sup1", "rewrite_ticket").allowed


def test_operator_denied_analytics(acl):
    decision = acl.authorize("op1", "read_ticket_analytics")
    assert not decision.allowed
    assert "read_ticket_analytics" in decision.reason


def test_deactivated_user_denied_everything(acl):
    for permission in sorted(PERMISSIONS):
        assert not acl.authorize("ghost", permission).allowed


def test_unknown_user_is_distinct_error(acl):
    with pytest.raises(UnknownPrincipalError):
        acl.authorize("nobody", "chat")


def test_unknown_permission_is_config_error(acl):
    with pytest.raises(ConfigurationError):
        acl.authorize("op1", "launch_rockets")


def test_assign_group_idempotent(acl):
    first = acl.assign_group("op1", "supervisor", actor="admin")
    second = acl.assign_group("op1", "supervisor", actor="admin")
    assert first == second
    assert "supervisor" in second.group_ids


def test_assign_unknown_group(acl):
    with pytest.raises(NotFoundError):
        acl.assign_group("op1", "wizards", actor="admin")


def test_operator_cannot_manage_users(acl):
    with pytest.raises(UnauthorizedError):
        acl.assign_group("op2", "supervisor", actor="op1")


def test_deny_by_default_with_empty_acl():
    acl = AccessControl()
    acl.add_group(UserGroup("g", "g", 0))
    acl.add_user(User("u", "u", frozenset({"g"})))
    for permission in sorted(PERMISSIONS):
        assert not acl.authorize("u", permission).allowed


def test_monotone_in_grants(acl):
    before = {
        (u, p): acl.authorize(u, p).allowed
        for u in acl.users
        for p in sorted(PERMISSIONS)
        if acl.users[u].active
    }
    acl.grant("operator", "read_audit")
    for (u, p), allowed in before.items():
        if allowed:
            assert acl.authorize(u, p).allowed, f"grant flipped {u}/{p} to deny"


def test_active_user_needs_groups():
    with pytest.raises(ConfigurationError):
        User("u", "u", frozenset())


GROUP_IDS = ["g0", "g1", "g2"]


@given(
    membership=st.lists(
        st.sets(st.sampled_from(GROUP_IDS), min_size=1), min_size=1, max_size=6
    ),
    grants=st.sets(
        st.tuples(st.sampled_from(GROUP_IDS), st.sampled_from(sorted(PERMISSIONS)))
    ),
)
def test_authorize_equals_brute_force_or(membership, grants):
    """authorize(user, p) == OR over the user's groups of grant(group, p)."""
    acl = AccessControl()
    for i, gid in enumerate(GROUP_IDS):
        acl.add_group(UserGroup(gid, gid, i))
    for gid, perm in grants:
        acl.grant(gid, perm)
    for i, groups in enumerate(membership):
        acl.add_user(User(f"u{i}", f"u{i}", frozenset(groups)))
    for i, groups in enumerate(membership):
        for permission in sorted(PERMISSIONS):
            expected = any(AclEntry(g, permission) in acl.entries for g in groups)
            assert acl.authorize(f"u{i}", permission).allowed == expected
