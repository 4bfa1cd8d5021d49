"""Versioned document corpus with an exhaustive-scan vector store.

One canonical JSON file per document version plus an index file mapping
chunk_id -> (doc_id, version, span, vector). Versions are immutable and
append-only; exactly one version per doc_id is active. Retrieval is an
exhaustive cosine-similarity scan over active-version chunks (desk scale).
"""

from __future__ import annotations

import json
import threading
from pathlib import Path
from typing import Optional

import numpy as np

from .access_control import AccessControl
from .audit import AuditLog
from .chunking import Chunk, ChunkSpan, chunk_document
from .clock import Clock, utc_now_iso
from .documents import (
    CanonicalDocument,
    Block,
    DocumentVersion,
    content_checksum,
    unify,
)
from .embedding import EmbeddingBackend, HashedBagEmbedder
from .errors import IllegalStateError, NotFoundError, ValidationError


class CorpusStore:
    """Document versions plus the retrieval index, persisted under one directory."""

    def __init__(
        self,
        root: Path,
        embedder: Optional[EmbeddingBackend] = None,
        audit: Optional[AuditLog] = None,
        acl: Optional[AccessControl] = None,
        clock: Optional[Clock] = None,
        window: int = 512,
        overlap: int = 64,
    ):
        self.root = Path(root)
        self.docs_dir = self.root / "docs"
        self.index_path = self.root / "index.json"
        self.embedder = embedder or HashedBagEmbedder()
        self.audit = audit
        self.acl = acl
        self.clock = clock or utc_now_iso
        self.window = window
        self.overlap = overlap
        self._lock = threading.RLock()
        self._versions: dict[tuple[str, int], DocumentVersion] = {}
        self._chunks: dict[str, Chunk] = {}
        self._load()

    # -- persistence ------------------------------------------------------

    def _load(self) -> None:
        if self.docs_dir.exists():
            for path in sorted(self.docs_dir.glob("*/v*.json")):
                version = DocumentVersion.from_dict(json.loads(path.read_text(encoding="utf-8")))
                self._versions[(version.doc_id, version.version)] = version
        if self.index_path.exists():
            index = json.loads(self.index_path.read_text(encoding="utf-8"))
            for chunk_id, entry in index.items():
                self._chunks[chunk_id] = Chunk(
                    chunk_id=chunk_id,
                    doc_id=entry["doc_id"],
                    version=entry["version"],
                    span=ChunkSpan.from_dict(entry["span"]),
                    text=entry["text"],
                    embedding=entry["vector"],
                    oversize=entry.get("oversize", False),
                )

    def _write_version(self, version: DocumentVersion) -> None:
        doc_dir = self.docs_dir / version.doc_id
        doc_dir.mkdir(parents=True, exist_ok=True)
        path = doc_dir / f"v{version.version}.json"
        path.write_text(
            json.dumps(version.to_dict(), sort_keys=True, ensure_ascii=False, indent=2) + "\n",
            encoding="utf-8",
        )

    def _write_index(self) -> None:
        index = {
            chunk_id: {
                "doc_id": c.doc_id,
                "version": c.version,
                "span": c.span.to_dict(),
                "text": c.text,
                "vector": list(c.embedding),
                "oversize": c.oversize,
            }
            for chunk_id, c in sorted(self._chunks.items())
        }
        self.index_path.parent.mkdir(parents=True, exist_ok=True)
        self.index_path.write_text(
            json.dumps(index, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8"
        )

    # -- queries ----------------------------------------------------------

    def get_version(self, doc_id: str, version: int) -> DocumentVersion:
        key = (doc_id, version)
        if key not in self._versions:
            raise NotFoundError(f"no version {version} of document {doc_id!r}")
        return self._versions[key]

    def active_version(self, doc_id: str) -> DocumentVersion:
        for version in self.versions_of(doc_id):
            if version.status == "active":
                return version
        raise NotFoundError(f"unknown document {doc_id!r}")

    def versions_of(self, doc_id: str) -> list[DocumentVersion]:
        found = sorted(
            (v for (d, _), v in self._versions.items() if d == doc_id),
            key=lambda v: v.version,
        )
        if not found:
            raise NotFoundError(f"unknown document {doc_id!r}")
        return found

    def doc_ids(self) -> list[str]:
        return sorted({doc_id for doc_id, _ in self._versions})

    def chunks(self, scope: str = "active") -> list[Chunk]:
        if scope == "active":
            active = {
                (v.doc_id, v.version) for v in self._versions.values() if v.status == "active"
            }
            return [c for c in self._chunks.values() if (c.doc_id, c.version) in active]
        if scope == "all_versions":
            return list(self._chunks.values())
        raise ValidationError(f"unknown retrieval scope {scope!r}")

    # -- ingestion --------------------------------------------------------

    def ingest_document(
        self,
        raw: bytes,
        format_tag: str,
        actor: str,
        doc_id: str,
        title: Optional[str] = None,
        source_uri: str = "",
        doc_kind: str = "other",
    ) -> DocumentVersion:
        """Unify, version, chunk, embed, and index a raw document.

        Re-ingesting byte-identical content still creates a new version:
        the submission itself is an auditable event.
        """
        if self.acl is not None:
            self.acl.require(actor, "manage_corpus")
        doc = unify(raw, format_tag, doc_id, title or doc_id, source_uri, doc_kind)
        return self._store_new_version(doc, created_by=f"user:{actor}",
                                       event_kind="document_ingested", actor=actor)

    def _store_new_version(self, doc: CanonicalDocument, created_by: str,
                           event_kind: str, actor: str) -> DocumentVersion:
        with self._lock:
            try:
                previous = self.active_version(doc.doc_id)
            except NotFoundError:
                previous = None
            number = previous.version + 1 if previous else 1
            version = DocumentVersion(
                doc_id=doc.doc_id,
                version=number,
                content=doc,
                checksum=content_checksum(doc),
                created_at=self.clock(),
                created_by=created_by,
                status="active",
            )
            chunks = chunk_document(doc, doc.doc_id, number, self.window, self.overlap)
            for chunk in chunks:
                chunk.embedding = list(self.embedder.embed(chunk.text))
            if previous is not None:
                superseded = DocumentVersion(**{**previous.to_dict(), "content": previous.content,
                                                "status": "superseded"})
                self._versions[(doc.doc_id, previous.version)] = superseded
                self._write_version(superseded)
            self._versions[(doc.doc_id, number)] = version
            for chunk in chunks:
                self._chunks[chunk.chunk_id] = chunk
            self._write_version(version)
            self._write_index()
            if self.audit is not None:
                self.audit.record(
                    event_kind,
                    subject=f"doc:{doc.doc_id}",
                    actor=actor,
                    detail={
                        "version": number,
                        "checksum": version.checksum,
                        "chunks": len(chunks),
                        "superseded": previous.version if previous else None,
                        "created_by": created_by,
                    },
                )
            return version

    # -- retrieval --------------------------------------------------------

    def retrieve(self, query: str, top_k: int = 3, scope: str = "active") -> list[tuple[Chunk, float]]:
        """Top-k chunks by cosine similarity; ties broken by
        (doc_id, version, chunk_id) so the ranking is total."""
        if top_k < 1:
            raise ValidationError("top_k must be >= 1")
        candidates = self.chunks(scope)
        if not candidates:
            return []
        q = self.embedder.embed(query)
        # Per-row dot products: bit-identical to a per-chunk scan, so ranks
        # never drift from a reference implementation on near-ties.
        scores = [float(np.dot(np.asarray(c.embedding, dtype=np.float64), q))
                  for c in candidates]
        order = sorted(
            range(len(candidates)),
            key=lambda i: (
                -scores[i],
                candidates[i].doc_id,
                candidates[i].version,
                candidates[i].chunk_id,
            ),
        )
        return [(candidates[i], float(scores[i])) for i in order[:top_k]]

    # -- feedback integration ---------------------------------------------

    def apply_ticket_update(self, ticket_payload: dict) -> DocumentVersion:
        """Integrate an approved feedback ticket into the corpus.

        Defense in depth: approval state and both check outcomes are
        re-verified here even though the feedback workflow already gates them.
        """
        state = ticket_payload.get("state")
        if state != "APPROVED":
            raise IllegalStateError(f"ticket is {state}, not APPROVED")
        checks = ticket_payload.get("check_results", [])
        passed = {c["check_kind"] for c in checks if c.get("outcome") == "pass"}
        if not {"jailbreak", "fact"} <= passed:
            raise IllegalStateError("ticket lacks two passing security checks")
        revision = ticket_payload.get("revision") or ""
        if not revision.strip():
            raise ValidationError("ticket has no revision text")
        ticket_id = ticket_payload["ticket_id"]
        target = ticket_payload.get("target_doc_id")

        blocks = [Block("paragraph", " ".join(p.split()))
                  for p in revision.split("\n\n") if p.strip()]
        for attachment in ticket_payload.get("attachments", []):
            text = " ".join(attachment.get("text", "").split())
            if text:
                blocks.append(Block("paragraph", text))

        if target:
            previous = self.active_version(target)
            doc = CanonicalDocument(
                doc_id=target,
                title=previous.content.title,
                blocks=previous.content.blocks + tuple(blocks),
                source_uri=f"ticket:{ticket_id}",
                doc_kind="feedback_derived",
            )
        else:
            doc = CanonicalDocument(
                doc_id=f"feedback-{ticket_id}",
                title=ticket_payload.get("original_question", f"feedback {ticket_id}"),
                blocks=tuple(blocks),
                source_uri=f"ticket:{ticket_id}",
                doc_kind="feedback_derived",
            )
        return self._store_new_version(
            doc,
            created_by=f"ticket:{ticket_id}",
            event_kind="document_updated_from_ticket",
            actor=ticket_payload.get("actor", "system"),
        )

    # -- export ------------------------------------------------------------

    def export_state(self) -> dict:
        """Canonical snapshot of every version, for parity/audit comparison."""
        return {
            "versions": [
                self._versions[key].to_dict() for key in sorted(self._versions)
            ],
            "chunk_ids": sorted(self._chunks),
        }
