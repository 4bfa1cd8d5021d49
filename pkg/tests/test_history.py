import pytest

from qms_assistant.access_control import AccessControl
from qms_assistant.clock import TickingClock
from qms_assistant.errors import NotFoundError, OrderingViolationError, UnauthorizedError
from qms_assistant.history import ConversationStore, DialogTurn

from conftest import ACCESS_CONTROL


@pytest.fixture
def store(tmp_path):
    acl = AccessControl.from_config(ACCESS_CONTROL)
    return ConversationStore(tmp_path / "conv", acl=acl, clock=TickingClock())


def turn(i, user="q", assistant="a"):
    return DialogTurn(turn_index=i, user_text=user, assistant_text=assistant,
                      created_at=f"2025-01-01T00:00:{i:02d}Z")


def test_append_first_turn(store):
    conv = store.create("op1")
    assert store.append_turn(conv.conversation_id, turn(0)) == 0


def test_index_gap_rejected(store):
    conv = store.create("op1")
    store.append_turn(conv.conversation_id, turn(0))
    with pytest.raises(OrderingViolationError):
        store.append_turn(conv.conversation_id, turn(2))


def test_duplicate_index_rejected(store):
    conv = store.create("op1")
    store.append_turn(conv.conversation_id, turn(0))
    with pytest.raises(OrderingViolationError):
        store.append_turn(conv.conversation_id, turn(0))


def test_read_back_identical(store):
    conv = store.create("op1")
    original = turn(0, "what torque?", "22 Nm [0]")
    store.append_turn(conv.conversation_id, original)
    assert store.get_turn(conv.conversation_id, 0).to_dict() == original.to_dict()


def test_owner_resumes_in_order(store):
    conv = store.create("op1")
    for i in range(3):
        store.append_turn(conv.conversation_id, turn(i, user=f"q{i}"))
    resumed = store.resume(conv.conversation_id, "op1")
    assert [t.turn_index for t in resumed.turns] == [0, 1, 2]


def test_other_operator_cannot_resume(store):
    conv = store.create("op1")
    with pytest.raises(UnauthorizedError):
        store.resume(conv.conversation_id, "op2")


def test_audit_permission_can_resume(store):
    conv = store.create("op1")
    assert store.resume(conv.conversation_id, "admin").owner == "op1"


def test_unknown_conversation(store):
    with pytest.raises(NotFoundError):
        store.resume("conv-999999", "op1")


def test_list_empty(store):
    assert store.list_conversations("op1") == []


def test_list_ordering_and_scoping(store):
    first = store.create("op1")
    second = store.create("op1")
    other = store.create("op2")
    store.append_turn(first.conversation_id, turn(0, "about torque values"))
    store.append_turn(second.conversation_id, turn(0, "about coolant"))
    listed = store.list_conversations("op1")
    assert [c["conversation_id"] for c in listed] == [
        second.conversation_id, first.conversation_id
    ]
    assert all(c["conversation_id"] != other.conversation_id for c in listed)
    assert listed[1]["title"] == "about torque values"


def test_restart_fidelity(tmp_path):
    acl = AccessControl.from_config(ACCESS_CONTROL)
    store = ConversationStore(tmp_path / "conv", acl=acl, clock=TickingClock())
    conv = store.create("op1")
    store.append_turn(conv.conversation_id, turn(0, "q0", "a0"))
    store.append_turn(conv.conversation_id, turn(1, "q1", "a1"))
    reopened = ConversationStore(tmp_path / "conv", acl=acl, clock=TickingClock())
    assert reopened.export_state() == store.export_state()
    resumed = reopened.resume(conv.conversation_id, "op1")
    assert [t.to_dict() for t in resumed.turns] == [turn(0, "q0", "a0").to_dict(),
                                                    turn(1, "q1", "a1").to_dict()]
