from __future__ import annotations

import hashlib
import json
import time
from pathlib import Path
from typing import Any

import numpy as np

RUNS_FILE = "runs.jsonl"


def _now() -> float:
    """Unix timestamp (seconds). Kept as a function for testability/mocking."""
    return time.time()


def fingerprint(text: str) -> str:
    """sha256 of the canonical config text."""
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _default(o: Any) -> Any:
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return o.as_posix()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def to_json(data: Any) -> str:
    return json.dumps(data, ensure_ascii=False, indent=2, sort_keys=True, default=_default)


def write_json_atomic(path: Path, data: Any) -> Path:
    """
    Write JSON using tmp + replace so readers never observe a partial file.
    """
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(to_json(data) + "\n", encoding="utf-8")
    tmp.replace(path)
    return path


def append_run_record(
    out_dir: Path,
    command: str,
    config_fingerprint: str,
    seed: int | None,
    outputs: dict[str, str],
    wall_time_s: float,
    extra: dict[str, Any] | None = None,
) -> Path:
    """Append one line to `runs.jsonl` in the output directory."""
    line = {
        "ts": round(_now(), 3),
        "command": command,
        "fingerprint": config_fingerprint,
        "seed": seed,
        "outputs": outputs,
        "wall_time_s": round(float(wall_time_s), 6),
        **(extra or {}),
    }
    path = out_dir / RUNS_FILE
    with path.open("a", encoding="utf-8") as f:
        f.write(json.dumps(line, ensure_ascii=False, default=_default) + "\n")
    return path


def read_run_records(out_dir: Path) -> list[dict[str, Any]]:
    path = out_dir / RUNS_FILE
    if not path.exists():
        return []
    return [json.loads(ln) for ln in path.read_text(encoding="utf-8").splitlines() if ln.strip()]
