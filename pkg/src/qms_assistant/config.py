"""Application configuration loading.

One YAML file configures the whole deployment: storage paths, retrieval
parameters, guardrail policy, adapter profiles, generation backend,
access-control seed, and login credentials. Secrets never live in the
file; they come from environment variables.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import yaml

from .errors import ConfigurationError

CONFIG_ENV_VAR = "QMS_ASSISTANT_CONFIG"


@dataclass
class AppConfig:
    data_dir: Path = Path("data")
    policy_path: Optional[Path] = None
    host: str = "127.0.0.1"
    port: int = 8080
    session_ttl_seconds: int = 3600
    top_k: int = 3
    embedding_dim: int = 256
    chunk_window: int = 512
    chunk_overlap: int = 64
    fact_threshold: float = 0.5
    loop_cap: int = 4
    dialog_tail: int = 6
    backend_kind: str = "scripted"  # scripted | http
    backend_script: Optional[Path] = None
    profiles: list[dict] = field(default_factory=list)
    access_control: dict = field(default_factory=dict)
    credentials: dict = field(default_factory=dict)
    voice_transcriber: str = "stub"  # stub | none
    voice_synthesizer: str = "stub"  # stub | none

    @classmethod
    def from_file(cls, path: Path) -> "AppConfig":
        try:
            data = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigurationError(f"cannot load config {path}: {exc}") from exc
        base = Path(path).parent
        server = data.get("server", {})
        retrieval = data.get("retrieval", {})
        agent = data.get("agent", {})
        checks = data.get("checks", {})
        voice = data.get("voice", {})

        def _resolve(p: Optional[str]) -> Optional[Path]:
            if p is None:
                return None
            candidate = Path(p)
            return candidate if candidate.is_absolute() else base / candidate

        return cls(
            data_dir=_resolve(data.get("data_dir", "data")),
            policy_path=_resolve(data.get("policy_path")),
            host=server.get("host", "127.0.0.1"),
            port=int(server.get("port", 8080)),
            session_ttl_seconds=int(server.get("session_ttl_seconds", 3600)),
            top_k=int(retrieval.get("top_k", 3)),
            embedding_dim=int(retrieval.get("dim", 256)),
            chunk_window=int(retrieval.get("window", 512)),
            chunk_overlap=int(retrieval.get("overlap", 64)),
            fact_threshold=float(checks.get("fact_threshold", 0.5)),
            loop_cap=int(agent.get("loop_cap", 4)),
            dialog_tail=int(agent.get("dialog_tail", 6)),
            backend_kind=agent.get("backend", "scripted"),
            backend_script=_resolve(agent.get("script_path")),
            profiles=agent.get("profiles", []),
            access_control=data.get("access_control", {}),
            credentials=data.get("credentials", {}),
            voice_transcriber=voice.get("transcriber", "stub"),
            voice_synthesizer=voice.get("synthesizer", "stub"),
        )

    @classmethod
    def from_env_or_path(cls, path: Optional[str]) -> "AppConfig":
        resolved = path or os.environ.get(CONFIG_ENV_VAR)
        if resolved is None:
            raise ConfigurationError(
                f"no config path given and {CONFIG_ENV_VAR} is unset"
            )
        return cls.from_file(Path(resolved))
