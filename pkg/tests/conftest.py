import pathlib
import sys

import pytest

sys.path.insert(0, str(pathlib.Path(__file__).parent))

from qms_assistant.app import Application
from qms_assistant.clock import TickingClock
from qms_assistant.config import AppConfig

REPO = pathlib.Path(__file__).parent.parent

# One "ACCEPTANCE nn <name>: PASS|FAIL" line per release criterion,
# appended by the acceptance tests and echoed after the run summary.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)

PROFILES = [
    {"name": "assembly", "keywords": ["torque", "fixture", "assembly", "station", "fastener"]},
    {"name": "process-analytics", "keywords": ["setup", "trend", "average", "deviation", "cycle"]},
    {"name": "general"},
]

ACCESS_CONTROL = {
    "groups": [
        {"group_id": "managerial", "name": "Managerial", "level": 2},
        {"group_id": "supervisor", "name": "Supervisor", "level": 1},
        {"group_id": "operator", "name": "Operator", "level": 0},
    ],
    "grants": {
        "managerial": [
            "chat", "flag_answer", "rewrite_ticket", "attach_document", "approve_ticket",
            "read_ticket_analytics", "manage_corpus", "manage_users", "read_audit",
        ],
        "supervisor": ["chat", "flag_answer", "rewrite_ticket", "attach_document", "approve_ticket"],
        "operator": ["chat", "flag_answer"],
    },
    "users": [
        {"user_id": "admin", "display_name": "Admin", "groups": ["managerial"]},
        {"user_id": "sup1", "display_name": "Supervisor One", "groups": ["supervisor"]},
        {"user_id": "op1", "display_name": "Operator One", "groups": ["operator"]},
        {"user_id": "op2", "display_name": "Operator Two", "groups": ["operator"]},
        {"user_id": "ghost", "display_name": "Ghost", "groups": ["operator"], "active": False},
    ],
}

CREDENTIALS = {"admin": "admin-secret", "sup1": "sup1-secret", "op1": "op1-secret",
               "op2": "op2-secret"}


def make_config(data_dir, **overrides) -> AppConfig:
    cfg = AppConfig(
        data_dir=pathlib.Path(data_dir),
        access_control=ACCESS_CONTROL,
        credentials=dict(CREDENTIALS),
        profiles=[dict(p) for p in PROFILES],
    )
    for key, value in overrides.items():
        setattr(cfg, key, value)
    return cfg


def make_app(data_dir, backend=None, clock=None, **overrides) -> Application:
    return Application(
        make_config(data_dir, **overrides),
        clock=clock or TickingClock(),
        backend=backend,
    )


@pytest.fixture
def app(tmp_path):
    return make_app(tmp_path / "data")


@pytest.fixture
def seeded_app(app):
    """App with the markdown fixture ingested."""
    raw = (REPO / "fixtures" / "manual.md").read_bytes()
    app.corpus.ingest_document(raw, "md", "admin", "manual", title="Station 4 torque guide")
    return app
