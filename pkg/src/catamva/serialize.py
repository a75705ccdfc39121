"""Text serialization of tables and fitted models.

Two formats are used, both exact for float64 (Python's shortest round-trip
repr, never more than 17 significant digits):

Labeled matrix (``.tsv``)::

    # catamva labeled-matrix 1
    <corner>\t<col 1>\t<col 2>...
    <row 1>\t<value>\t<value>...

Model document (``.json``): a JSON object whose ``__type__`` names the model
class. Arrays are stored as ``{"__array__": shape, "dtype": ..., "data": flat}``
and every JSON list decodes to a tuple.
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import numpy as np

from .ca import CAModel, ContributionTable
from .gsvd import Decomposition
from .hca import Dendrogram
from .inference import ConfidenceEllipse, ResampleResult, WelchResult
from .ingest import CoOccurrenceMatrix, ContingencyTable
from .mds import MDSModel
from .mfa import MFAModel
from .plsc import LatentPair

MATRIX_HEADER = "# catamva labeled-matrix 1"
MODEL_FORMAT = "catamva-model/1"

_TYPES = {
    cls.__name__: cls
    for cls in (
        CAModel, ContributionTable, Decomposition, Dendrogram, ConfidenceEllipse,
        ResampleResult, WelchResult, CoOccurrenceMatrix, ContingencyTable,
        MDSModel, MFAModel, LatentPair,
    )
}


def _fmt(x: float) -> str:
    return repr(float(x))


def _check_label(label: str):
    if any(ch in label for ch in "\t\r\n"):
        raise ValueError(f"label {label!r} contains a tab or newline")
    return label


def format_matrix(rows, cols, cells, corner: str = "") -> str:
    cells = np.asarray(cells, dtype=float)
    lines = [MATRIX_HEADER, "\t".join([_check_label(corner)] + [_check_label(str(c)) for c in cols])]
    for r, vals in zip(rows, cells):
        lines.append("\t".join([_check_label(str(r))] + [_fmt(v) for v in vals]))
    return "\n".join(lines) + "\n"


def parse_matrix(text: str):
    """Inverse of :func:`format_matrix`; returns ``(rows, cols, cells, corner)``."""
    lines = [l for l in text.splitlines() if l and not l.startswith("#")]
    if not lines:
        raise ValueError("empty labeled matrix")
    head = lines[0].split("\t")
    corner, cols = head[0], head[1:]
    rows, data = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split("\t")
        if len(parts) != len(cols) + 1:
            raise ValueError(f"line {lineno}: expected {len(cols) + 1} fields, got {len(parts)}")
        rows.append(parts[0])
        data.append([float(v) for v in parts[1:]])
    cells = np.array(data, dtype=float).reshape(len(rows), len(cols))
    return rows, cols, cells, corner


def write_table(table: ContingencyTable, path, corner: str = "") -> None:
    Path(path).write_text(format_matrix(table.rows, table.cols, table.cells, corner), encoding="utf-8")


def read_table(path) -> ContingencyTable:
    rows, cols, cells, _ = parse_matrix(Path(path).read_text(encoding="utf-8"))
    return ContingencyTable(rows, cols, cells)


def write_merge_list(tree: Dendrogram, path) -> None:
    """Dendrogram as text: a leaf block followed by one ``a b height size`` line per merge."""
    lines = [f"# catamva dendrogram 1 linkage={tree.linkage}", "leaves"]
    lines += [_check_label(l) for l in tree.labels]
    lines.append("merges")
    lines += [f"{a}\t{b}\t{_fmt(h)}\t{s}" for a, b, h, s in tree.merges]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_merge_list(path) -> Dendrogram:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    linkage = lines[0].split("linkage=")[1].strip()
    i = lines.index("merges")
    labels = lines[2:i]
    merges = []
    for line in lines[i + 1:]:
        if line:
            a, b, h, s = line.split("\t")
            merges.append((int(a), int(b), float(h), int(s)))
    return Dendrogram(tuple(merges), tuple(labels), linkage)


# ---------------------------------------------------------------------------
# models


def _encode(v):
    if isinstance(v, np.ndarray):
        if v.dtype == bool:
            data = [bool(x) for x in v.ravel()]
        elif np.issubdtype(v.dtype, np.integer):
            data = [int(x) for x in v.ravel()]
        else:
            data = [float(x) for x in v.ravel()]
        return {"__array__": list(v.shape), "dtype": str(v.dtype), "data": data}
    if dataclasses.is_dataclass(v) and not isinstance(v, type):
        out = {"__type__": type(v).__name__}
        for f in dataclasses.fields(v):
            out[f.name] = _encode(getattr(v, f.name))
        return out
    if isinstance(v, dict):
        return {"__dict__": [[_encode(k), _encode(x)] for k, x in v.items()]}
    if isinstance(v, (list, tuple)):
        return [_encode(x) for x in v]
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return float(v)
    return v


def _decode(v):
    if isinstance(v, list):
        return tuple(_decode(x) for x in v)
    if isinstance(v, dict):
        if "__array__" in v:
            return np.array(v["data"], dtype=v["dtype"]).reshape(v["__array__"])
        if "__dict__" in v:
            return {_decode(k): _decode(x) for k, x in v["__dict__"]}
        if "__type__" in v:
            cls = _TYPES[v["__type__"]]
            kw = {k: _decode(x) for k, x in v.items() if k != "__type__"}
            return cls(**kw)
        return {k: _decode(x) for k, x in v.items()}
    return v


def dumps_model(obj) -> str:
    doc = {"format": MODEL_FORMAT, "model": _encode(obj)}
    return json.dumps(doc, indent=1, ensure_ascii=False) + "\n"


def loads_model(text: str):
    doc = json.loads(text)
    if doc.get("format") != MODEL_FORMAT:
        raise ValueError(f"not a {MODEL_FORMAT} document")
    return _decode(doc["model"])


def save_model(obj, path) -> None:
    Path(path).write_text(dumps_model(obj), encoding="utf-8")


def load_model(path):
    return loads_model(Path(path).read_text(encoding="utf-8"))
