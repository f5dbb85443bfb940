"""Comma separated tables with a one-line header and 17 significant digits."""
from __future__ import annotations

from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import DataError
from .limits import FLOAT_FMT
from .paths import resolve_input_file

EGPD_COLUMNS = ("sigma", "xi", "p", "kappa1", "kappa2")


def write_matrix(path: Path, values: ArrayLike, header: Sequence[str] | None = None) -> Path:
    v = np.atleast_2d(np.asarray(values, dtype=float))
    cols = list(header) if header is not None else [f"s{j}" for j in range(v.shape[1])]
    if len(cols) != v.shape[1]:
        raise DataError("header length does not match the column count", context={"header": len(cols), "columns": v.shape[1]})
    np.savetxt(path, v, fmt=FLOAT_FMT, delimiter=",", header=",".join(cols), comments="")
    return path


def _looks_numeric(line: str) -> bool:
    try:
        [float(t) for t in line.split(",")]
    except ValueError:
        return False
    return True


def read_matrix(path: str | Path, *, what: str = "data file", header: bool | None = True) -> NDArray[np.float64]:
    """
    Read an (n, k) float table. `header=None` sniffs the first line and skips
    it only when it is not numeric.
    """
    p = resolve_input_file(path, what=what)
    text = p.read_text(encoding="utf-8").splitlines()
    lines = [ln for ln in text if ln.strip()]
    if not lines:
        raise DataError(f"{what} is empty: {p}")
    skip = 1 if header else 0
    if header is None:
        skip = 0 if _looks_numeric(lines[0]) else 1
    if len(lines) <= skip:
        raise DataError(f"{what} has no rows: {p}")
    try:
        out = np.loadtxt(lines[skip:], delimiter=",", ndmin=2, dtype=float)
    except ValueError as e:
        raise DataError(f"malformed {what}: {p}", context={"detail": str(e)}) from e
    if not np.all(np.isfinite(out)):
        raise DataError(f"{what} contains missing or non-finite values: {p}")
    return out


def read_sites(path: str | Path) -> NDArray[np.float64]:
    """Site coordinates, two columns; the header line is optional."""
    coords = read_matrix(path, what="site file", header=None)
    if coords.shape[1] != 2:
        raise DataError("site file must have exactly two columns", context={"columns": coords.shape[1]})
    return coords


def write_sites(path: Path, coords: ArrayLike) -> Path:
    return write_matrix(path, coords, header=("x", "y"))


def read_egpd_table(path: str | Path) -> NDArray[np.float64]:
    table = read_matrix(path, what="marginal parameter file")
    if table.shape[1] != len(EGPD_COLUMNS):
        raise DataError("marginal parameter file needs columns " + ",".join(EGPD_COLUMNS))
    return table


def write_egpd_table(path: Path, rows: Iterable[Sequence[float]]) -> Path:
    return write_matrix(path, np.array(list(rows), dtype=float).reshape(-1, len(EGPD_COLUMNS)), header=EGPD_COLUMNS)


def write_records(path: Path, header: Sequence[str], rows: Iterable[Sequence[object]]) -> Path:
    """Mixed text/number rows; numbers use the table float format."""
    def cell(v: object) -> str:
        if isinstance(v, (float, np.floating)):
            return FLOAT_FMT % float(v)
        return str(v)

    lines = [",".join(header)]
    lines += [",".join(cell(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
