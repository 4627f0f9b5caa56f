"""Plain-text tables: one header line, comma-separated, 17 significant digits."""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


def fmt(value: float) -> str:
    return format(float(value), ".17g")


def write_table(path, header: Sequence[str], rows: Iterable[Sequence[float]]) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(fmt(v) for v in row) for row in rows)
    Path(path).write_text("\n".join(lines) + "\n")


def read_table(path) -> tuple[list[str], np.ndarray]:
    text = Path(path).read_text().splitlines()
    header = text[0].split(",")
    data = np.array([[float(v) for v in line.split(",")] for line in text[1:] if line.strip()])
    return header, data.reshape(-1, len(header))
