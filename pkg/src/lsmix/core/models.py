from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any


@dataclass(frozen=True)
class CommandResult:
    """
    Structured result of one command run (CLI or tool server).

    Commands return this instead of printing so that both front ends emit the
    same payload schema.
    """
    command: str
    seed: int | None
    fingerprint: str
    outputs: dict[str, str] = field(default_factory=dict)
    summary: dict[str, Any] = field(default_factory=dict)
    duration_ms: int = 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "command": self.command,
            "seed": self.seed,
            "fingerprint": self.fingerprint,
            "outputs": dict(self.outputs),
            "summary": self.summary,
            "duration_ms": self.duration_ms,
        }
