"""Append-only, hash-chained audit trail.

Records are persisted as one JSON object per line. The digest is SHA-256
over a canonical byte serialization: each field UTF-8 encoded and prefixed
with its 8-byte big-endian length, in fixed order
(seq, event_kind, subject, actor, detail, timestamp, prev_hash).
The detail payload is canonicalized as compact JSON with sorted keys.

Writes are fail-closed: the triggering operation must not acknowledge
before the record is durable.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Optional

from .errors import StorageError

GENESIS_HASH = "0" * 64


def _canonical_detail(detail: dict) -> str:
    return json.dumps(detail, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def _digest(seq: int, event_kind: str, subject: str, actor: str, detail_json: str,
            timestamp: str, prev_hash: str) -> str:
    h = hashlib.sha256()
    for part in (str(seq), event_kind, subject, actor, detail_json, timestamp, prev_hash):
        raw = part.encode("utf-8")
        h.update(len(raw).to_bytes(8, "big"))
        h.update(raw)
    return h.hexdigest()


@dataclass(frozen=True)
class AuditRecord:
    seq: int
    event_kind: str
    subject: str
    actor: str
    detail: dict
    timestamp: str
    prev_hash: str
    this_hash: str

    def recompute_hash(self) -> str:
        return _digest(
            self.seq, self.event_kind, self.subject, self.actor,
            _canonical_detail(self.detail), self.timestamp, self.prev_hash,
        )


@dataclass(frozen=True)
class VerificationReport:
    ok: bool
    first_broken_seq: Optional[int] = None
    checked: int = 0


class AuditLog:
    """Single-writer hash-chained log over a JSONL file."""

    def __init__(self, path: Path, clock=None):
        from .clock import utc_now_iso

        self.path = Path(path)
        self._clock = clock or utc_now_iso
        self._lock = threading.Lock()
        self._records: list[AuditRecord] = []
        if self.path.exists():
            self._records = list(self._load())

    def _load(self) -> Iterable[AuditRecord]:
        with self.path.open("r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    yield AuditRecord(**json.loads(line))

    @property
    def records(self) -> list[AuditRecord]:
        return list(self._records)

    def __len__(self) -> int:
        return len(self._records)

    def record(self, event_kind: str, subject: str, actor: str, detail: dict) -> AuditRecord:
        """Append one record; durable before return."""
        with self._lock:
            seq = len(self._records) + 1
            prev_hash = self._records[-1].this_hash if self._records else GENESIS_HASH
            timestamp = self._clock()
            detail_json = _canonical_detail(detail)
            rec = AuditRecord(
                seq=seq,
                event_kind=event_kind,
                subject=subject,
                actor=actor,
                detail=json.loads(detail_json),
                timestamp=timestamp,
                prev_hash=prev_hash,
                this_hash=_digest(seq, event_kind, subject, actor, detail_json, timestamp, prev_hash),
            )
            try:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with self.path.open("a", encoding="utf-8") as fh:
                    fh.write(json.dumps(asdict(rec), sort_keys=True, ensure_ascii=False) + "\n")
                    fh.flush()
            except OSError as exc:
                raise StorageError(f"audit append failed: {exc}") from exc
            self._records.append(rec)
            return rec

    def verify_chain(self, start: int = 1, end: Optional[int] = None) -> VerificationReport:
        """Recompute every digest in [start, end]; report the first inconsistency.

        Re-reads from disk so on-disk tampering is detected even while the
        in-memory copy is intact.
        """
        try:
            records = list(self._load()) if self.path.exists() else []
        except (json.JSONDecodeError, TypeError, ValueError):
            return VerificationReport(ok=False, first_broken_seq=start, checked=0)
        end = end if end is not None else len(records)
        prev_hash = GENESIS_HASH
        checked = 0
        for i, rec in enumerate(records[: end], start=1):
            expected_prev = prev_hash
            prev_hash = rec.this_hash
            if i < start:
                continue
            checked += 1
            if rec.seq != i or rec.prev_hash != expected_prev or rec.recompute_hash() != rec.this_hash:
                return VerificationReport(ok=False, first_broken_seq=i, checked=checked)
        return VerificationReport(ok=True, checked=checked)

    def export(self, start: int = 1, end: Optional[int] = None) -> list[dict]:
        end = end if end is not None else len(self._records)
        return [asdict(r) for r in self._records if start <= r.seq <= end]
