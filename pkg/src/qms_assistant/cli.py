"""Operator command-line tool.

Runs in-process against the same stores as the gateway (no server needed);
mutating subcommands take an exclusive file lock so a CLI write never races
a running server. Exit codes: 0 success, 1 domain error, 2 usage error.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click
from filelock import FileLock

from .app import Application
from .clock import TickingClock
from .config import AppConfig, CONFIG_ENV_VAR
from .conversational import ModalityInput
from .errors import AssistantError

FIXED_CLOCK_ENV = "QMS_ASSISTANT_FIXED_CLOCK"
ACTOR_ENV = "QMS_ASSISTANT_ACTOR"


def _build_app(config_path: str | None) -> Application:
    config = AppConfig.from_env_or_path(config_path)
    clock = None
    fixed = os.environ.get(FIXED_CLOCK_ENV)
    if fixed:
        start, _, step = fixed.partition(",")
        clock = TickingClock(start, float(step or 1.0))
    return Application(config, clock=clock)


def _lock(app: Application) -> FileLock:
    return FileLock(Path(app.config.data_dir) / ".write.lock")


def _emit(ctx: click.Context, payload: dict, text: str) -> None:
    if ctx.obj.get("json"):
        click.echo(json.dumps(payload, sort_keys=True, ensure_ascii=False))
    else:
        click.echo(text)


def _actor(explicit: str | None) -> str:
    return explicit or os.environ.get(ACTOR_ENV, "admin")


class DomainErrorGroup(click.Group):
    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except AssistantError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)


@click.group(cls=DomainErrorGroup)
@click.option("--config", "config_path", default=None,
              help=f"Config file path (or ${CONFIG_ENV_VAR}).")
@click.option("--json", "json_mode", is_flag=True, help="JSON output.")
@click.option("--actor", default=None, help=f"Acting user id (or ${ACTOR_ENV}).")
@click.pass_context
def cli(ctx, config_path, json_mode, actor):
    """Administration tool for the QMS cognitive assistant."""
    ctx.ensure_object(dict)
    ctx.obj["config_path"] = config_path
    ctx.obj["json"] = json_mode
    ctx.obj["actor"] = actor


@cli.command()
@click.option("--config", "config_path", default=None)
@click.pass_context
def serve(ctx, config_path):
    """Run the HTTP gateway."""
    import uvicorn

    from .gateway import create_gateway

    app = _build_app(config_path or ctx.obj["config_path"])
    uvicorn.run(create_gateway(app), host=app.config.host, port=app.config.port)


@cli.command()
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
@click.option("--doc-id", default=None)
@click.option("--kind", default="other")
@click.pass_context
def ingest(ctx, path, doc_id, kind):
    """Ingest a document file (.txt, .md, .json)."""
    app = _build_app(ctx.obj["config_path"])
    source = Path(path)
    fmt = source.suffix.lstrip(".").lower()
    with _lock(app):
        version = app.corpus.ingest_document(
            source.read_bytes(), fmt, _actor(ctx.obj["actor"]),
            doc_id or source.stem, title=source.stem, source_uri=str(source),
            doc_kind=kind,
        )
    _emit(ctx, {"doc_id": version.doc_id, "version": version.version,
                "checksum": version.checksum},
          f"{version.doc_id} v{version.version}")


@cli.group()
def corpus():
    """Corpus administration."""


@corpus.command("list")
@click.pass_context
def corpus_list(ctx):
    app = _build_app(ctx.obj["config_path"])
    docs = []
    for doc_id in app.corpus.doc_ids():
        active = app.corpus.active_version(doc_id)
        docs.append({"doc_id": doc_id, "active_version": active.version,
                     "doc_kind": active.content.doc_kind})
    _emit(ctx, {"documents": docs},
          "\n".join(f"{d['doc_id']}\tv{d['active_version']}\t{d['doc_kind']}" for d in docs)
          or "(empty corpus)")


@corpus.command("show")
@click.argument("doc_id")
@click.pass_context
def corpus_show(ctx, doc_id):
    app = _build_app(ctx.obj["config_path"])
    versions = app.corpus.versions_of(doc_id)
    payload = {"doc_id": doc_id, "versions": [v.to_dict() for v in versions]}
    _emit(ctx, payload, "\n".join(
        f"v{v.version}\t{v.status}\t{v.created_at}\t{v.checksum[:12]}" for v in versions
    ))


@cli.group()
def chat():
    """Chat with the assistant from the terminal."""


@chat.command("send")
@click.argument("message")
@click.option("--conversation", default=None)
@click.pass_context
def chat_send(ctx, message, conversation):
    app = _build_app(ctx.obj["config_path"])
    with _lock(app):
        turn, rendered, conversation_id = app.agent.run_turn(
            conversation, ModalityInput("text", message), _actor(ctx.obj["actor"])
        )
    _emit(ctx, {"conversation_id": conversation_id, "turn": turn.to_dict(),
                "output": rendered.to_dict()},
          f"[{conversation_id} #{turn.turn_index}] {turn.assistant_text}")


@cli.group()
def ticket():
    """Feedback ticket workflow."""


@ticket.command("list")
@click.option("--state", default=None)
@click.pass_context
def ticket_list(ctx, state):
    app = _build_app(ctx.obj["config_path"])
    tickets = app.feedback.list_tickets(state)
    _emit(ctx, {"tickets": [t.to_dict() for t in tickets]},
          "\n".join(f"{t.ticket_id}\t{t.state}\t{t.flag}" for t in tickets) or "(no tickets)")


@ticket.command("show")
@click.argument("ticket_id")
@click.pass_context
def ticket_show(ctx, ticket_id):
    app = _build_app(ctx.obj["config_path"])
    t = app.feedback.get(ticket_id)
    _emit(ctx, {"ticket": t.to_dict()},
          f"{t.ticket_id} state={t.state} flag={t.flag}\n"
          f"question: {t.original_question}\nanswer: {t.original_answer}\n"
          f"revision: {t.revision or '(none)'}")


@ticket.command("create")
@click.argument("conversation_id")
@click.argument("turn_index", type=int)
@click.option("--flag", "flag_value", type=click.Choice(["insufficient", "extend"]),
              required=True)
@click.pass_context
def ticket_create(ctx, conversation_id, turn_index, flag_value):
    app = _build_app(ctx.obj["config_path"])
    with _lock(app):
        t = app.feedback.create_ticket(conversation_id, turn_index, flag_value,
                                       _actor(ctx.obj["actor"]))
    _emit(ctx, {"ticket": t.to_dict()}, f"{t.ticket_id} {t.state}")


@ticket.command("revise")
@click.argument("ticket_id")
@click.argument("revision")
@click.option("--attach", multiple=True,
              help="Attachment as name=text; repeatable.")
@click.option("--target-doc", default=None)
@click.pass_context
def ticket_revise(ctx, ticket_id, revision, attach, target_doc):
    app = _build_app(ctx.obj["config_path"])
    attachments = []
    for item in attach:
        name, _, text = item.partition("=")
        attachments.append({"name": name, "text": text})
    with _lock(app):
        t = app.feedback.revise_ticket(ticket_id, revision, attachments,
                                       _actor(ctx.obj["actor"]), target_doc)
    _emit(ctx, {"ticket": t.to_dict()}, f"{t.ticket_id} {t.state}")


@ticket.command("check")
@click.argument("ticket_id")
@click.pass_context
def ticket_check(ctx, ticket_id):
    app = _build_app(ctx.obj["config_path"])
    with _lock(app):
        jailbreak, fact = app.feedback.run_checks(ticket_id, _actor(ctx.obj["actor"]))
    state = app.feedback.get(ticket_id).state
    _emit(ctx, {"jailbreak": jailbreak.to_dict(), "fact": fact.to_dict(), "state": state},
          f"jailbreak={jailbreak.outcome} fact={fact.outcome} ({fact.score:.3f}) -> {state}")


@ticket.command("approve")
@click.argument("ticket_id")
@click.pass_context
def ticket_approve(ctx, ticket_id):
    """Integrate an APPROVED ticket into the corpus."""
    app = _build_app(ctx.obj["config_path"])
    with _lock(app):
        reference = app.feedback.integrate_ticket(ticket_id, _actor(ctx.obj["actor"]))
    _emit(ctx, {"document": reference},
          f"integrated -> {reference['doc_id']} v{reference['version']}")


@ticket.command("reject")
@click.argument("ticket_id")
@click.option("--reason", default="")
@click.pass_context
def ticket_reject(ctx, ticket_id, reason):
    app = _build_app(ctx.obj["config_path"])
    with _lock(app):
        t = app.feedback.reject_ticket(ticket_id, _actor(ctx.obj["actor"]), reason)
    _emit(ctx, {"ticket": t.to_dict()}, f"{t.ticket_id} {t.state}")


@cli.group()
def user():
    """User administration."""


@user.command("add")
@click.argument("user_id")
@click.option("--name", default=None)
@click.option("--group", "groups", multiple=True, required=True)
@click.pass_context
def user_add(ctx, user_id, name, groups):
    app = _build_app(ctx.obj["config_path"])
    with _lock(app):
        app.admin_add_user(user_id, name or user_id, list(groups),
                           _actor(ctx.obj["actor"]))
    _emit(ctx, {"user_id": user_id}, f"added {user_id}")


@user.command("grant")
@click.argument("user_id")
@click.argument("group_id")
@click.pass_context
def user_grant(ctx, user_id, group_id):
    """Assign a user to an additional group."""
    app = _build_app(ctx.obj["config_path"])
    with _lock(app):
        updated = app.admin_assign_group(user_id, group_id, _actor(ctx.obj["actor"]))
    _emit(ctx, {"user_id": user_id, "groups": sorted(updated.group_ids)},
          f"{user_id}: {', '.join(sorted(updated.group_ids))}")


@user.command("list")
@click.pass_context
def user_list(ctx):
    app = _build_app(ctx.obj["config_path"])
    users = [
        {"user_id": u.user_id, "groups": sorted(u.group_ids), "active": u.active}
        for u in app.acl.users.values()
    ]
    _emit(ctx, {"users": users},
          "\n".join(f"{u['user_id']}\t{','.join(u['groups'])}" for u in users) or "(no users)")


@cli.group()
def audit():
    """Audit log inspection."""


@audit.command("verify")
@click.pass_context
def audit_verify(ctx):
    app = _build_app(ctx.obj["config_path"])
    report = app.audit.verify_chain()
    _emit(ctx, {"ok": report.ok, "first_broken_seq": report.first_broken_seq,
                "checked": report.checked},
          "ok" if report.ok else f"broken at seq {report.first_broken_seq}")
    if not report.ok:
        sys.exit(1)


@cli.group()
def analytics():
    """Ticket analytics."""


@analytics.command("report")
@click.option("--from", "start", default="")
@click.option("--to", "end", default="")
@click.pass_context
def analytics_report(ctx, start, end):
    app = _build_app(ctx.obj["config_path"])
    report = app.feedback.ticket_analytics(_actor(ctx.obj["actor"]), start, end or "￿")
    _emit(ctx, report,
          f"tickets={report['total_tickets']} "
          f"insufficient={report['counts_by_flag']['insufficient']} "
          f"extend={report['counts_by_flag']['extend']} "
          f"rate_of_incomplete_answers={report['rate_of_incomplete_answers']:.4f}")


@cli.group()
def state():
    """Domain state snapshots."""


@state.command("export")
@click.pass_context
def state_export(ctx):
    """Print a canonical JSON snapshot of all domain aggregates."""
    app = _build_app(ctx.obj["config_path"])
    click.echo(app.export_domain_state())


def main():
    cli(obj={})


if __name__ == "__main__":
    main()
