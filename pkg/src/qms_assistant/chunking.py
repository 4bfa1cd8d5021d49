"""Sliding-window chunking over canonical documents.

Fixed-size windows of whitespace-delimited tokens with a fixed overlap.
Tables are atomic: a table block always becomes exactly one chunk, never
split mid-row; tables longer than the window produce a single oversized
chunk flagged in metadata.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .documents import CanonicalDocument

DEFAULT_WINDOW = 512
DEFAULT_OVERLAP = 64


@dataclass(frozen=True)
class ChunkSpan:
    """Location of a chunk inside its document version.

    block_start/block_end delimit the contributing blocks (inclusive);
    token_start/token_end index into the whitespace-token stream of those
    blocks' concatenated texts (end exclusive).
    """

    block_start: int
    block_end: int
    token_start: int
    token_end: int

    def to_dict(self) -> dict:
        return {
            "block_start": self.block_start,
            "block_end": self.block_end,
            "token_start": self.token_start,
            "token_end": self.token_end,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ChunkSpan":
        return cls(d["block_start"], d["block_end"], d["token_start"], d["token_end"])


@dataclass
class Chunk:
    chunk_id: str
    doc_id: str
    version: int
    span: ChunkSpan
    text: str
    embedding: Optional[list[float]] = None
    oversize: bool = False

    def provenance(self) -> dict:
        return {"doc_id": self.doc_id, "version": self.version, "chunk_id": self.chunk_id}


def chunk_document(doc: CanonicalDocument, doc_id: str, version: int,
                   window: int = DEFAULT_WINDOW, overlap: int = DEFAULT_OVERLAP) -> list[Chunk]:
    """Chunk a document version; embeddings are attached later by the store.

    Consecutive non-table blocks are concatenated into one token stream and
    windowed; each table block is emitted as its own atomic chunk.
    """
    if not (0 <= overlap < window):
        raise ValueError("overlap must be non-negative and smaller than window")

    chunks: list[Chunk] = []
    counter = 0

    def next_id() -> str:
        nonlocal counter
        cid = f"{doc_id}:v{version}:c{counter:04d}"
        counter += 1
        return cid

    def flush_run(start_block: int, end_block: int, tokens: list[str]) -> None:
        if not tokens:
            return
        step = window - overlap
        start = 0
        while start < len(tokens):
            end = min(start + window, len(tokens))
            chunks.append(
                Chunk(
                    chunk_id=next_id(),
                    doc_id=doc_id,
                    version=version,
                    span=ChunkSpan(start_block, end_block, start, end),
                    text=" ".join(tokens[start:end]),
                )
            )
            if end == len(tokens):
                break
            start += step

    run_start: Optional[int] = None
    run_tokens: list[str] = []
    for idx, block in enumerate(doc.blocks):
        if block.block_kind == "table":
            if run_start is not None:
                flush_run(run_start, idx - 1, run_tokens)
                run_start, run_tokens = None, []
            n_tokens = len(block.text.split())
            chunks.append(
                Chunk(
                    chunk_id=next_id(),
                    doc_id=doc_id,
                    version=version,
                    span=ChunkSpan(idx, idx, 0, n_tokens),
                    text=block.text,
                    oversize=n_tokens > window,
                )
            )
        else:
            if run_start is None:
                run_start = idx
            run_tokens.extend(block.text.split())
    if run_start is not None:
        flush_run(run_start, len(doc.blocks) - 1, run_tokens)
    return chunks


def block_tokens(doc: CanonicalDocument, block_start: int, block_end: int) -> list[str]:
    """Token stream a non-table chunk span indexes into."""
    tokens: list[str] = []
    for block in doc.blocks[block_start : block_end + 1]:
        tokens.extend(block.text.split())
    return tokens


def reconstruct_text(doc: CanonicalDocument, chunks: list[Chunk],
                     overlap: int = DEFAULT_OVERLAP) -> str:
    """Concatenate chunk texts, dropping overlap regions; used by tests to
    check chunking reproduces the source block texts in order."""
    parts: list[str] = []
    prev_key: Optional[tuple[int, int]] = None
    for chunk in chunks:
        tokens = chunk.text.split()
        key = (chunk.span.block_start, chunk.span.block_end)
        if key == prev_key and chunk.span.token_start > 0:
            tokens = tokens[overlap:]
        parts.extend(tokens)
        prev_key = key
    return " ".join(parts)
