"""On-disk formats for datasets, fits and reports.

CSV numbers are written with Python's shortest round-trip float repr, so a
file read back and rewritten is byte-identical. Group indices in JSON files
are 1-based; everything in memory is 0-based.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import ConsistencyError


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ConsistencyError(f"{path}: empty file") from None
        rows = [row for row in reader if row]
    width = len(header)
    for i, row in enumerate(rows):
        if len(row) != width:
            raise ConsistencyError(f"{path}: row {i + 1} has {len(row)} fields, header has {width}")
    return header, rows


def _parse_cell(s: str):
    for kind in (int, float):
        try:
            return kind(s)
        except ValueError:
            pass
    return s


def read_table(path) -> tuple[list[str], list[list]]:
    """Header and rows with ints kept as ints, so rewriting reproduces the file."""
    header, rows = read_csv(path)
    return header, [[_parse_cell(c) for c in row] for row in rows]


def read_matrix(path) -> np.ndarray:
    header, rows = read_csv(path)
    try:
        return np.array([[float(c) for c in row] for row in rows], dtype=float).reshape(len(rows), len(header))
    except ValueError as exc:
        raise ConsistencyError(f"{path}: non-numeric entry ({exc})") from None


def write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, Path):
        return str(obj)
    return obj


# ---------------------------------------------------------------- datasets


def write_design(path, x: np.ndarray) -> None:
    write_csv(path, [f"col_{k + 1}" for k in range(x.shape[1])], x)


def write_labels(path, e) -> None:
    write_csv(path, ["e"], ([int(v)] for v in np.asarray(e)))


def read_labels(path) -> np.ndarray:
    vals = read_matrix(path)
    if vals.shape[1] != 1:
        raise ConsistencyError(f"{path}: expected a single column")
    e = vals[:, 0]
    bad = np.flatnonzero((e != 0) & (e != 1))
    if bad.size:
        raise ConsistencyError(f"{path}: row {bad[0] + 1} is not 0/1")
    return e.astype(np.int64)


def write_groups(path, groups) -> None:
    # one group per line keeps the file readable for r in the hundreds
    lines = [json.dumps([int(c) + 1 for c in g]) for g in groups]
    with open(path, "w") as fh:
        fh.write("[\n  " + ",\n  ".join(lines) + "\n]\n")


def read_groups(path, p: int) -> list[np.ndarray]:
    raw = read_json(path)
    if not isinstance(raw, list):
        raise ConsistencyError(f"{path}: expected a list of index lists")
    groups = []
    for j, g in enumerate(raw):
        idx = np.asarray(g, dtype=np.int64) - 1
        bad = idx[(idx < 0) | (idx >= p)]
        if bad.size:
            raise ConsistencyError(
                f"group {j + 1} refers to column {int(bad[0]) + 1} but X.csv has {p} columns", index=int(bad[0]) + 1
            )
        groups.append(idx)
    return groups


def write_draws_csv(path, z: np.ndarray) -> None:
    write_csv(path, [f"g_{j + 1}" for j in range(z.shape[1])], z.astype(np.int64))


def write_draws_bin(path, z: np.ndarray) -> None:
    """Bit-packed rows preceded by two little-endian uint64: n_samples, r."""
    z = np.asarray(z, dtype=np.uint8)
    with open(path, "wb") as fh:
        fh.write(np.array(z.shape, dtype="<u8").tobytes())
        fh.write(np.packbits(z, axis=1).tobytes())


def read_draws_bin(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    n, r = (int(v) for v in np.frombuffer(raw[:16], dtype="<u8"))
    packed = np.frombuffer(raw[16:], dtype=np.uint8).reshape(n, -1)
    return np.unpackbits(packed, axis=1, count=r).astype(np.int8)


def read_draws(folder) -> np.ndarray:
    folder = Path(folder)
    if (folder / "draws.bin").exists():
        return read_draws_bin(folder / "draws.bin")
    return read_matrix(folder / "draws.csv").astype(np.int8)
