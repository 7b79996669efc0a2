"""Tab-separated file formats: edge lists, label files, dense matrices, annotations.

All files are UTF-8 with LF line endings. Floats are written with ``repr``
so that a write/read round trip is exact.
"""
from __future__ import annotations

import csv
import json
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .core import MultiplexNetwork, MultiplexNMFError, validate_layer

EDGE_HEADER = ("src", "dst", "weight")


class FormatError(MultiplexNMFError, ValueError):
    pass


class NodeSetMismatch(MultiplexNMFError, ValueError):
    pass


class MissingNode(MultiplexNMFError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


def fmt(x: float) -> str:
    return repr(float(x))


def _rows(path) -> list[list[str]]:
    with open(path, encoding="utf-8", newline="") as fh:
        return [row for row in csv.reader(fh, delimiter="\t") if row]


def _writer(fh):
    return csv.writer(fh, delimiter="\t", lineterminator="\n")


def read_node_list(path) -> list[str]:
    rows = _rows(path)
    if not rows or rows[0] != ["node"]:
        raise FormatError(f"{path}: expected header 'node'")
    names = [r[0] for r in rows[1:]]
    if len(set(names)) != len(names):
        raise FormatError(f"{path}: duplicate node ids")
    return names


def write_node_list(path, names: Sequence[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(["node"])
        for name in names:
            w.writerow([name])


def _parse_edges(path) -> list[tuple[str, str, float]]:
    rows = _rows(path)
    if not rows or tuple(rows[0]) != EDGE_HEADER:
        raise FormatError(f"{path}: expected header src<TAB>dst<TAB>weight")
    edges = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != 3:
            raise FormatError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
        try:
            w = float(row[2])
        except ValueError:
            raise FormatError(f"{path}:{lineno}: weight {row[2]!r} is not a number") from None
        if not np.isfinite(w) or w < 0:
            raise FormatError(f"{path}:{lineno}: weight must be finite and >= 0, got {w}")
        edges.append((row[0], row[1], w))
    return edges


def read_layers(paths: Sequence, nodes: Optional[Sequence[str]] = None) -> MultiplexNetwork:
    """Load edge-list files into one multiplex network.

    Without ``nodes``, ids get dense indices in first-seen order across all
    files; nodes absent from a layer are isolated there. With ``nodes``, that
    order is used and any other id is an error.
    """
    if not paths:
        raise FormatError("at least one layer file is required")
    parsed = [_parse_edges(p) for p in paths]
    index: dict[str, int] = {}
    if nodes is not None:
        index = {name: i for i, name in enumerate(nodes)}
    for path, edges in zip(paths, parsed):
        for u, v, _ in edges:
            for x in (u, v):
                if x not in index:
                    if nodes is not None:
                        raise NodeSetMismatch(f"{path}: node {x!r} is not in the node list")
                    index[x] = len(index)
    n = len(index)
    if n == 0:
        raise FormatError("layer files contain no nodes")
    layers = []
    for path, edges in zip(paths, parsed):
        A = np.zeros((n, n))
        seen = set()
        for u, v, w in edges:
            i, j = index[u], index[v]
            key = (min(i, j), max(i, j))
            if key in seen:
                raise FormatError(f"{path}: edge {u}-{v} listed more than once")
            seen.add(key)
            A[i, j] = w
            A[j, i] = w
        layers.append(validate_layer(A))
    names = sorted(index, key=index.__getitem__)
    return MultiplexNetwork(layers=tuple(layers), node_names=tuple(names))


def write_layer(path, A, names: Sequence[str]) -> None:
    """Write the upper triangle (diagonal included) of ``A`` as an edge list."""
    A = np.asarray(A, dtype=float)
    iu, ju = np.nonzero(np.triu(A))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(EDGE_HEADER)
        for i, j in zip(iu.tolist(), ju.tolist()):
            w.writerow([names[i], names[j], fmt(A[i, j])])


def read_labels(path, value_name: str) -> dict[str, int]:
    rows = _rows(path)
    if not rows or rows[0] != ["node", value_name]:
        raise FormatError(f"{path}: expected header 'node\\t{value_name}'")
    out: dict[str, int] = {}
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != 2:
            raise FormatError(f"{path}:{lineno}: expected 2 fields")
        if row[0] in out:
            raise FormatError(f"{path}:{lineno}: node {row[0]!r} listed twice")
        try:
            label = int(row[1])
        except ValueError:
            raise FormatError(f"{path}:{lineno}: label {row[1]!r} is not an integer") from None
        if label < 0:
            raise FormatError(f"{path}:{lineno}: labels must be non-negative")
        out[row[0]] = label
    return out


def write_labels(path, names: Sequence[str], labels: Iterable[int], value_name: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(["node", value_name])
        for name, lab in zip(names, labels):
            w.writerow([name, int(lab)])


def align_labels(reference: Mapping[str, int], other: Mapping[str, int],
                 what: str = "truth") -> tuple[list[str], np.ndarray, np.ndarray]:
    """Pair two node->label maps; every node must appear in both."""
    missing = [x for x in reference if x not in other]
    extra = [x for x in other if x not in reference]
    if missing:
        raise MissingNode(f"{len(missing)} assigned nodes missing from {what}, e.g. {missing[0]!r}")
    if extra:
        raise MissingNode(f"{len(extra)} {what} nodes not in the assignment, e.g. {extra[0]!r}")
    names = list(reference)
    return (names, np.array([reference[x] for x in names]),
            np.array([other[x] for x in names]))


def write_matrix(path, M, names: Sequence[str], prefix: str = "h") -> None:
    M = np.asarray(M, dtype=float)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(["node"] + [f"{prefix}{j}" for j in range(M.shape[1])])
        for name, row in zip(names, M):
            w.writerow([name] + [fmt(x) for x in row])


def read_matrix(path) -> tuple[list[str], np.ndarray]:
    rows = _rows(path)
    if not rows or rows[0][0] != "node":
        raise FormatError(f"{path}: expected a 'node' header column")
    names = [r[0] for r in rows[1:]]
    try:
        M = np.array([[float(x) for x in r[1:]] for r in rows[1:]])
    except ValueError:
        raise FormatError(f"{path}: non-numeric matrix entry") from None
    return names, M


def read_annotations(path) -> dict[str, set[str]]:
    """Long-format ``node<TAB>term`` file -> node -> set of terms."""
    rows = _rows(path)
    if not rows or rows[0] != ["node", "term"]:
        raise FormatError(f"{path}: expected header 'node\\tterm'")
    out: dict[str, set[str]] = {}
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != 2:
            raise FormatError(f"{path}:{lineno}: expected 2 fields")
        out.setdefault(row[0], set()).add(row[1])
    return out


def write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(x) if isinstance(x, float) else x for x in row])
