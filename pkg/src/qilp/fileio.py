"""On-disk formats: instances, datasets, indicator matrices, batch streams.

Instances are versioned JSON documents; datasets are whitespace-delimited
text with one row per observation and an optional trailing integer batch
tag.  All floats are written with ``repr``, which round-trips exactly.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .biclique import BiAdjacency
from .errors import DimensionError
from .polytope import Dataset, ForwardInstance

INSTANCE_FORMAT = "qilp-instance"
INSTANCE_VERSION = 1
STREAM_FORMAT = "qilp-stream"
STREAM_VERSION = 1


def dump_json(payload, path) -> None:
    """Canonical JSON: sorted keys, newline-terminated, byte-stable."""
    text = json.dumps(payload, indent=2, sort_keys=True)
    Path(path).write_text(text + "\n")


def save_instance(inst: ForwardInstance, path, metadata: dict | None = None) -> None:
    payload = {
        "format": INSTANCE_FORMAT,
        "version": INSTANCE_VERSION,
        "name": inst.name,
        "n": inst.n,
        "m": inst.m,
        "normalization_p": inst.normalization_p,
        "full_dimensional": inst.full_dimensional,
        "rows": [
            {
                "a": [float(v) for v in inst.A[i]],
                "b": float(inst.b[i]),
                "sense": inst.row_senses[i],
            }
            for i in range(inst.m)
        ],
        "metadata": metadata or {},
    }
    dump_json(payload, path)


def load_instance(path):
    """Read an instance file; returns (instance, metadata)."""
    payload = json.loads(Path(path).read_text())
    if payload.get("format") != INSTANCE_FORMAT:
        raise DimensionError(f"{path}: not an instance file")
    if payload.get("version") != INSTANCE_VERSION:
        raise DimensionError(f"{path}: unsupported version {payload.get('version')}")
    rows = payload["rows"]
    A = np.array([r["a"] for r in rows], dtype=float)
    b = np.array([r["b"] for r in rows], dtype=float)
    senses = tuple(r["sense"] for r in rows)
    inst = ForwardInstance(
        A,
        b,
        senses,
        payload.get("name", "instance"),
        float(payload.get("normalization_p", 2.0)),
        bool(payload.get("full_dimensional", True)),
    )
    if inst.m != payload["m"] or inst.n != payload["n"]:
        raise DimensionError(f"{path}: header dimensions disagree with rows")
    return inst, payload.get("metadata", {})


def save_dataset(data: Dataset, path) -> None:
    lines = []
    for k in range(len(data)):
        parts = [repr(float(v)) for v in data.points[k]]
        if data.tags is not None:
            parts.append(str(int(data.tags[k])))
        lines.append(" ".join(parts))
    Path(path).write_text("\n".join(lines) + "\n")


def load_dataset(path) -> Dataset:
    """Whitespace-delimited points; a trailing integer column is a batch tag."""
    rows = []
    tags = []
    has_tags = None
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        tagged = _is_int(parts[-1]) and len(parts) > 1
        if has_tags is None:
            has_tags = tagged
        if tagged != has_tags:
            raise DimensionError(f"{path}: inconsistent batch tag column")
        if has_tags:
            rows.append([float(v) for v in parts[:-1]])
            tags.append(int(parts[-1]))
        else:
            rows.append([float(v) for v in parts])
    if not rows:
        raise DimensionError(f"{path}: empty dataset")
    return Dataset(np.array(rows), np.array(tags) if has_tags else None)


def _is_int(token: str) -> bool:
    try:
        int(token)
        return True
    except ValueError:
        return False


def save_biadjacency(mat: BiAdjacency, path, theta: float | None = None) -> None:
    header = f"# kind={mat.kind} row_order={','.join(str(r) for r in mat.row_order)}"
    if theta is not None:
        header += f" theta={theta!r}"
    if mat.infeasible_rows:
        header += f" infeasible={','.join(str(r) for r in mat.infeasible_rows)}"
    lines = [header]
    for row in mat.entries:
        lines.append(" ".join(str(int(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def load_biadjacency(path) -> BiAdjacency:
    text = Path(path).read_text().splitlines()
    if not text or not text[0].startswith("#"):
        raise DimensionError(f"{path}: missing indicator-matrix header")
    fields = dict(
        part.split("=", 1) for part in text[0][1:].split() if "=" in part
    )
    entries = [
        [int(v) for v in line.split()] for line in text[1:] if line.strip()
    ]
    row_order = tuple(int(v) for v in fields["row_order"].split(","))
    infeasible = tuple(
        int(v) for v in fields.get("infeasible", "").split(",") if v
    )
    return BiAdjacency(
        np.array(entries, dtype=np.int8), fields.get("kind", "Dbar"),
        row_order, None, infeasible,
    )


def save_stream(batches, path, metadata: dict | None = None) -> None:
    payload = {
        "format": STREAM_FORMAT,
        "version": STREAM_VERSION,
        "metadata": metadata or {},
        "batches": [
            {
                "rhs": [float(v) for v in b.rhs],
                "tau": float(b.tau),
                "points": [[float(v) for v in p] for p in b.points],
            }
            for b in batches
        ],
    }
    dump_json(payload, path)


def load_stream(path):
    """Read a batch stream; returns (batches, metadata)."""
    from .online import Batch

    payload = json.loads(Path(path).read_text())
    if payload.get("format") != STREAM_FORMAT:
        raise DimensionError(f"{path}: not a stream file")
    batches = [
        Batch(np.array(b["rhs"]), np.array(b["points"]), float(b["tau"]))
        for b in payload["batches"]
    ]
    return batches, payload.get("metadata", {})


def write_csv(path, header, rows) -> None:
    """Minimal deterministic CSV writer (repr floats, no quoting needed)."""
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_csv_cell(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_csv(path):
    lines = [l for l in Path(path).read_text().splitlines() if l.strip()]
    if not lines:
        raise DimensionError(f"{path}: empty table")
    header = lines[0].split(",")
    return header, [line.split(",") for line in lines[1:]]


def _csv_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)
