"""Two-column whitespace-separated text tables."""
from __future__ import annotations

from pathlib import Path

import numpy as np


def load_table(path) -> tuple[np.ndarray, np.ndarray]:
    """Read ``x y`` rows; ``#`` starts a comment. ``x`` must strictly increase."""
    path = Path(path)
    rows = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"{path}:{lineno}: expected two columns, got {len(parts)}")
        try:
            rows.append((float(parts[0]), float(parts[1])))
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from None
    if len(rows) < 2:
        raise ValueError(f"{path}: need at least two rows")
    x, y = np.array(rows).T
    check_increasing(x, str(path))
    return x, y


def check_increasing(x, what: str = "table") -> None:
    bad = np.flatnonzero(np.diff(x) <= 0)
    if bad.size:
        i = bad[0] + 1
        raise ValueError(f"{what}: first column not strictly increasing at row {i} "
                         f"({x[i - 1]!r} -> {x[i]!r})")
