"""Deterministic file-output helpers shared by the CLI and experiment writers.

All writers are atomic (write to a temp file, then rename) and all numeric
formatting is fixed at full round-trip precision so repeated runs with the
same inputs produce byte-identical artifacts.
"""

from __future__ import annotations

import json
import os
import subprocess
import tempfile
from typing import Iterable, Sequence

FLOAT_FORMAT = ".17g"

_generator_id: str | None = None


def fmt_float(value: float) -> str:
    return format(float(value), FLOAT_FORMAT)


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    lines = [",".join(header)]
    for row in rows:
        cells = []
        for cell in row:
            if isinstance(cell, float):
                cells.append(fmt_float(cell))
            elif isinstance(cell, bool):
                cells.append("1" if cell else "0")
            else:
                cells.append(str(cell))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def write_text_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w", newline="\n") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json_atomic(path: str, obj) -> None:
    write_text_atomic(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def generator_id() -> str:
    """Identifier of the code that produced an artifact (version + git state)."""
    global _generator_id
    if _generator_id is None:
        version = "mosindy 0.1.0"
        try:
            described = subprocess.run(
                ["git", "describe", "--always", "--dirty"],
                cwd=os.path.dirname(os.path.abspath(__file__)),
                capture_output=True,
                text=True,
                timeout=5,
            )
            if described.returncode == 0 and described.stdout.strip():
                version = f"{version} ({described.stdout.strip()})"
        except (OSError, subprocess.SubprocessError):
            pass
        _generator_id = version
    return _generator_id
