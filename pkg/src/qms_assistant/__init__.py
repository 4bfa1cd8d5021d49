"""Guardrailed, retrieval-augmented cognitive assistant backend with a
human-in-the-loop feedback workflow, versioned corpus, role-based access
control, and a hash-chained audit trail."""

__version__ = "0.1.0"
