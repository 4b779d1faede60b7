"""CSV and JSON emission helpers with round-trip fidelity.

Reals are written with 17 significant digits so that ``float(fmt(x)) == x``
for every finite double; line terminators are fixed to ``"\\n"`` so output
bytes do not depend on the platform.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Sequence

from .errors import IngestionError


def fmt(x: float) -> str:
    """Shortest 17-significant-digit representation; exact on round trip."""
    return format(float(x), ".17g")


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence[str]]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(header))
        for row in rows:
            writer.writerow(list(row))


def read_csv(path: str | Path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestionError(f"{path}: empty file") from None
        rows = [row for row in reader]
    return header, rows


def write_json(path: str | Path, obj: object) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2)
        fh.write("\n")


def parse_float(path: str | Path, lineno: int, field: str, text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise IngestionError(f"{path}:{lineno}: field '{field}' is not a number: {text!r}") from None
