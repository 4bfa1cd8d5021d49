"""Canonical document format, format unification, and version records.

Input formats (.txt, .md, pre-canonicalized JSON) are unified into an
ordered list of typed blocks; layout structure that matters for retrieval
(headings, paragraphs, list items, pipe tables) is preserved. A document
version is immutable once written; its checksum is SHA-256 over the
canonical JSON serialization.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from typing import Optional

from .errors import ValidationError

BLOCK_KINDS = ("heading", "paragraph", "table", "list_item")
DOC_KINDS = ("work_instruction", "best_practice", "machine_manual", "feedback_derived", "other")
SUPPORTED_FORMATS = ("txt", "md", "json")


@dataclass(frozen=True)
class Block:
    block_kind: str
    text: str
    table_cells: Optional[list[list[str]]] = None

    def __post_init__(self):
        if self.block_kind not in BLOCK_KINDS:
            raise ValidationError(f"unknown block kind {self.block_kind!r}")
        if (self.table_cells is not None) != (self.block_kind == "table"):
            raise ValidationError("table_cells present iff block_kind is table")
        if self.table_cells is not None:
            widths = {len(row) for row in self.table_cells}
            if len(widths) > 1:
                raise ValidationError("table rows have unequal width")

    def to_dict(self) -> dict:
        d: dict = {"block_kind": self.block_kind, "text": self.text}
        if self.table_cells is not None:
            d["table_cells"] = self.table_cells
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Block":
        return cls(d["block_kind"], d["text"], d.get("table_cells"))


@dataclass(frozen=True)
class CanonicalDocument:
    doc_id: str
    title: str
    blocks: tuple[Block, ...]
    source_uri: str
    doc_kind: str = "other"

    def __post_init__(self):
        if not self.blocks:
            raise ValidationError("document has zero blocks")
        if self.doc_kind not in DOC_KINDS:
            raise ValidationError(f"unknown doc kind {self.doc_kind!r}")

    def to_dict(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "title": self.title,
            "blocks": [b.to_dict() for b in self.blocks],
            "source_uri": self.source_uri,
            "doc_kind": self.doc_kind,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CanonicalDocument":
        return cls(
            doc_id=d["doc_id"],
            title=d["title"],
            blocks=tuple(Block.from_dict(b) for b in d["blocks"]),
            source_uri=d.get("source_uri", ""),
            doc_kind=d.get("doc_kind", "other"),
        )


def canonical_json(doc: CanonicalDocument) -> str:
    return json.dumps(doc.to_dict(), sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def content_checksum(doc: CanonicalDocument) -> str:
    return hashlib.sha256(canonical_json(doc).encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class DocumentVersion:
    doc_id: str
    version: int
    content: CanonicalDocument
    checksum: str
    created_at: str
    created_by: str  # "user:<id>" or "ticket:<id>"
    status: str = "active"  # active | superseded

    def to_dict(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "version": self.version,
            "content": self.content.to_dict(),
            "checksum": self.checksum,
            "created_at": self.created_at,
            "created_by": self.created_by,
            "status": self.status,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DocumentVersion":
        return cls(
            doc_id=d["doc_id"],
            version=d["version"],
            content=CanonicalDocument.from_dict(d["content"]),
            checksum=d["checksum"],
            created_at=d["created_at"],
            created_by=d["created_by"],
            status=d["status"],
        )


# -- format unification ----------------------------------------------------

_TABLE_ROW = re.compile(r"^\s*\|.*\|\s*$")
_TABLE_SEPARATOR = re.compile(r"^\s*\|(\s*:?-+:?\s*\|)+\s*$")
_HEADING = re.compile(r"^(#{1,6})\s+(.*)$")
_LIST_ITEM = re.compile(r"^\s*[-*+]\s+(.*)$")


def _parse_table_row(line: str) -> list[str]:
    return [cell.strip() for cell in line.strip().strip("|").split("|")]


def parse_text(raw: str) -> list[Block]:
    """Plain text: blank-line separated paragraphs."""
    blocks = []
    for para in re.split(r"\n\s*\n", raw.strip()):
        text = " ".join(para.split())
        if text:
            blocks.append(Block("paragraph", text))
    return blocks


def parse_markdown(raw: str) -> list[Block]:
    """Markdown-class input: headings, paragraphs, list items, pipe tables."""
    blocks: list[Block] = []
    lines = raw.splitlines()
    i = 0
    para_lines: list[str] = []

    def flush_paragraph():
        nonlocal para_lines
        text = " ".join(" ".join(para_lines).split())
        if text:
            blocks.append(Block("paragraph", text))
        para_lines = []

    while i < len(lines):
        line = lines[i]
        heading = _HEADING.match(line)
        if heading:
            flush_paragraph()
            blocks.append(Block("heading", heading.group(2).strip()))
            i += 1
            continue
        if _TABLE_ROW.match(line):
            flush_paragraph()
            rows = []
            while i < len(lines) and _TABLE_ROW.match(lines[i]):
                if not _TABLE_SEPARATOR.match(lines[i]):
                    rows.append(_parse_table_row(lines[i]))
                i += 1
            width = max(len(r) for r in rows)
            cells = [r + [""] * (width - len(r)) for r in rows]
            text = "\n".join(" | ".join(r) for r in cells)
            blocks.append(Block("table", text, cells))
            continue
        item = _LIST_ITEM.match(line)
        if item:
            flush_paragraph()
            blocks.append(Block("list_item", item.group(1).strip()))
            i += 1
            continue
        if not line.strip():
            flush_paragraph()
        else:
            para_lines.append(line)
        i += 1
    flush_paragraph()
    return blocks


def unify(raw: bytes, format_tag: str, doc_id: str, title: str, source_uri: str,
          doc_kind: str = "other") -> CanonicalDocument:
    """Analyze a raw document and unify it into the canonical block format."""
    if format_tag not in SUPPORTED_FORMATS:
        raise ValidationError(f"unsupported format {format_tag!r}; supported: {SUPPORTED_FORMATS}")
    text = raw.decode("utf-8")
    if format_tag == "json":
        data = json.loads(text)
        data.setdefault("doc_id", doc_id)
        data.setdefault("title", title)
        data.setdefault("source_uri", source_uri)
        data.setdefault("doc_kind", doc_kind)
        doc = CanonicalDocument.from_dict(data)
        if not doc.blocks:  # pragma: no cover - from_dict already rejects
            raise ValidationError("document has zero blocks")
        return doc
    blocks = parse_markdown(text) if format_tag == "md" else parse_text(text)
    if not blocks:
        raise ValidationError("empty document: zero blocks after unification")
    return CanonicalDocument(
        doc_id=doc_id, title=title, blocks=tuple(blocks),
        source_uri=source_uri, doc_kind=doc_kind,
    )
