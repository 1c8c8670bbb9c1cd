"""RunManifest: what a command was asked to do and how it ended."""
import os
import logging
from dataclasses import dataclass, field, asdict
from datetime import datetime, timezone

from config import TOOL_VERSION, RUN_MANIFEST
from utils.helpers import read_json, write_json_atomic

logger = logging.getLogger("ops.cli")


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunManifest:
    command: str
    config: dict
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    seed: int = 0
    tool_version: str = TOOL_VERSION
    started_at: str = field(default_factory=_now)
    ended_at: str | None = None
    status: str = "running"
    error: str | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunManifest":
        return cls(**{k: v for k, v in d.items() if k in cls.__dataclass_fields__})

    def start(self, out_dir: str) -> str:
        path = os.path.join(out_dir, RUN_MANIFEST)
        write_json_atomic(self.to_dict(), path)
        return path

    def finish(self, out_dir: str, status: str = "ok", error: str | None = None, **outputs) -> str:
        self.ended_at = _now()
        self.status = status
        self.error = error
        self.outputs.update(outputs)
        path = os.path.join(out_dir, RUN_MANIFEST)
        write_json_atomic(self.to_dict(), path)
        logger.info(f"{self.command}: {status} -> {path}")
        return path


def load_manifest(path: str) -> RunManifest:
    if os.path.isdir(path):
        path = os.path.join(path, RUN_MANIFEST)
    return RunManifest.from_dict(read_json(path))
