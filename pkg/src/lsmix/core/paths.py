from __future__ import annotations

from pathlib import Path

from .errors import DataError


def resolve_input_file(path: str | Path | None, *, what: str = "input file") -> Path:
    """Resolve and validate an input file path."""
    if path is None or str(path).strip() == "":
        raise DataError(f"no {what} given")
    p = Path(path).expanduser().resolve()

    if not p.exists():
        raise DataError(f"{what} does not exist: {p}")
    if not p.is_file():
        raise DataError(f"{what} is not a file: {p}")

    return p


def resolve_out_dir(path: str | Path | None) -> Path:
    """Resolve the output directory, creating it when missing."""
    p = Path(path or ".").expanduser().resolve()
    if p.exists() and not p.is_dir():
        raise DataError(f"output path is not a directory: {p}")
    p.mkdir(parents=True, exist_ok=True)
    return p


def ensure_within(root: Path, target: Path) -> Path:
    """
    Ensure `target` is inside `root`; output file names from tool calls are
    not allowed to escape the output directory.
    """
    root = root.resolve()
    target = target.expanduser().resolve()

    try:
        target.relative_to(root)
    except ValueError as e:
        raise DataError(f"path escapes output directory. root={root} target={target}") from e

    return target
