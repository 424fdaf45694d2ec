"""CSV persistence with a versioned header line and round-trip float formatting."""
from __future__ import annotations

import csv
import hashlib
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1
FLOAT_FORMAT = ".17g"


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), FLOAT_FORMAT)
    return str(v)


def write_csv(path, header, rows, kind: str | None = None) -> Path:
    """Write rows under a ``# eljunction-csv v<N> <kind>`` line and a column header."""
    path = Path(path)
    kind = kind or path.stem
    with path.open("w", newline="") as fh:
        fh.write(f"# eljunction-csv v{FORMAT_VERSION} {kind}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_value(v) for v in row])
    return path


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    """Inverse of write_csv: (header, rows as strings); the version line is checked."""
    with Path(path).open(newline="") as fh:
        first = fh.readline()
        if not first.startswith("# eljunction-csv v"):
            raise ValueError(f"{path}: missing version line")
        version = int(first.split()[2][1:])
        if version > FORMAT_VERSION:
            raise ValueError(f"{path}: format v{version} is newer than supported v{FORMAT_VERSION}")
        reader = csv.reader(fh)
        header = next(reader)
        return header, [row for row in reader]


def read_columns(path) -> dict[str, np.ndarray]:
    """Numeric columns by name."""
    header, rows = read_csv(path)
    data = np.array(rows, dtype=float).reshape(-1, len(header))
    return {name: data[:, i] for i, name in enumerate(header)}


def matrix_rows(A, value: str = "complex"):
    """Long-format rows (l, l_tilde, ...) of a square matrix, 1-based."""
    A = np.asarray(A)
    for i in range(A.shape[0]):
        for j in range(A.shape[1]):
            if value == "complex":
                yield (i + 1, j + 1, A[i, j].real, A[i, j].imag)
            else:
                yield (i + 1, j + 1, A[i, j])


def sha256(path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()
