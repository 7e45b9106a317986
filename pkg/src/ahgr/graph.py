"""Attributed graph container and plain-text file formats.

All ids are 0-based, lines starting with ``#`` are comments and fields are
whitespace separated.  Matrices are dense ``float64`` numpy arrays.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional

import numpy as np

from .errors import (
    DuplicateLabelError,
    FormatError,
    IdRangeError,
    IncompleteLabelsError,
    NumericalError,
    ParameterError,
    ParseError,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AttributedGraph:
    """Undirected simple graph with binary node attributes.

    ``adjacency`` is a symmetric 0/1 matrix with an empty diagonal,
    ``attributes`` an N x M 0/1 matrix (M may be 0) and ``labels`` an optional
    length-N vector of class ids.
    """

    adjacency: np.ndarray
    attributes: np.ndarray = field(default=None)  # type: ignore[assignment]
    labels: Optional[np.ndarray] = None

    def __post_init__(self):
        A = np.asarray(self.adjacency, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ParameterError(f"adjacency must be square, got {A.shape}")
        if not np.array_equal(A, A.T):
            raise ParameterError("adjacency must be symmetric")
        if not np.isin(A, (0.0, 1.0)).all():
            raise ParameterError("adjacency entries must be 0 or 1")
        if np.any(np.diag(A) != 0):
            raise ParameterError("adjacency must have an empty diagonal")
        n = A.shape[0]
        C = self.attributes
        C = np.zeros((n, 0)) if C is None else np.asarray(C, dtype=float)
        if C.ndim != 2 or C.shape[0] != n:
            raise ParameterError(f"attributes must have {n} rows, got {C.shape}")
        if not np.isin(C, (0.0, 1.0)).all():
            raise ParameterError("attribute entries must be 0 or 1")
        y = self.labels
        if y is not None:
            y = np.asarray(y, dtype=np.int64)
            if y.shape != (n,):
                raise ParameterError(f"labels must have length {n}, got {y.shape}")
            if np.any(y < 0):
                raise ParameterError("labels must be non-negative")
            y.setflags(write=False)
        A.setflags(write=False)
        C.setflags(write=False)
        object.__setattr__(self, "adjacency", A)
        object.__setattr__(self, "attributes", C)
        object.__setattr__(self, "labels", y)

    @property
    def n_nodes(self) -> int:
        return self.adjacency.shape[0]

    @property
    def n_attrs(self) -> int:
        return self.attributes.shape[1]

    @property
    def n_edges(self) -> int:
        return int(self.adjacency.sum()) // 2

    @property
    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)

    @property
    def n_classes(self) -> int:
        if self.labels is None:
            return 0
        return len(np.unique(self.labels))


def _int_pairs(path) -> Iterator[tuple[int, int, int]]:
    """Yield ``(lineno, a, b)`` for every data line of a two-column file."""
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            parts = s.split()
            if len(parts) != 2:
                raise ParseError(path, lineno, f"expected 2 fields, got {len(parts)}")
            try:
                a, b = int(parts[0]), int(parts[1])
            except ValueError:
                raise ParseError(path, lineno, f"non-integer field in {s!r}") from None
            if a < 0 or b < 0:
                raise ParseError(path, lineno, "ids must be non-negative")
            yield lineno, a, b


def read_edge_list(path, n_nodes: Optional[int] = None) -> tuple[np.ndarray, int]:
    """Read an undirected edge list into a dense symmetric 0/1 adjacency.

    Duplicate edges (in either direction) collapse to a single edge and
    self-loops are dropped.  Without ``n_nodes`` the node count is the largest
    id plus one.  Returns the adjacency and the number of dropped self-loops.
    """
    edges = []
    loops = 0
    max_id = -1
    for lineno, u, v in _int_pairs(path):
        max_id = max(max_id, u, v)
        if n_nodes is not None and max(u, v) >= n_nodes:
            raise IdRangeError(f"{path}:{lineno}: node id {max(u, v)} >= n_nodes={n_nodes}")
        if u == v:
            loops += 1
            continue
        edges.append((u, v))
    if loops:
        log.warning("%s: dropped %d self-loop line(s)", path, loops)
    if n_nodes is None:
        n_nodes = max_id + 1
    A = np.zeros((n_nodes, n_nodes))
    if edges:
        idx = np.asarray(edges)
        A[idx[:, 0], idx[:, 1]] = 1.0
        A[idx[:, 1], idx[:, 0]] = 1.0
    return A, loops


def load_edge_list(path, n_nodes: Optional[int] = None) -> np.ndarray:
    return read_edge_list(path, n_nodes)[0]


def load_attributes(path, n_nodes: int, n_attrs: Optional[int] = None) -> np.ndarray:
    pairs = []
    for lineno, i, w in _int_pairs(path):
        if i >= n_nodes:
            raise IdRangeError(f"{path}:{lineno}: node id {i} >= n_nodes={n_nodes}")
        if n_attrs is not None and w >= n_attrs:
            raise IdRangeError(f"{path}:{lineno}: attribute id {w} >= n_attrs={n_attrs}")
        pairs.append((i, w))
    if n_attrs is None:
        n_attrs = 1 + max((w for _, w in pairs), default=-1)
    C = np.zeros((n_nodes, n_attrs))
    if pairs:
        idx = np.asarray(pairs)
        C[idx[:, 0], idx[:, 1]] = 1.0
    return C


def load_labels(path, n_nodes: int) -> np.ndarray:
    labels = np.full(n_nodes, -1, dtype=np.int64)
    for lineno, i, c in _int_pairs(path):
        if i >= n_nodes:
            raise IdRangeError(f"{path}:{lineno}: node id {i} >= n_nodes={n_nodes}")
        if labels[i] >= 0:
            raise DuplicateLabelError(f"{path}:{lineno}: node {i} labelled twice")
        labels[i] = c
    missing = np.flatnonzero(labels < 0)
    if missing.size:
        head = ", ".join(map(str, missing[:5]))
        raise IncompleteLabelsError(
            f"{path}: {missing.size} node(s) without a label (first: {head})"
        )
    return labels


def load_graph(edges, attrs=None, labels=None, n_nodes: Optional[int] = None) -> AttributedGraph:
    A = load_edge_list(edges, n_nodes)
    n = A.shape[0]
    C = load_attributes(attrs, n) if attrs is not None else None
    y = load_labels(labels, n) if labels is not None else None
    return AttributedGraph(A, C, y)


def save_embedding(path, embedding) -> None:
    """Write an N x K matrix as text: header ``N K``, then ``id v1 ... vK``.

    Values are written with 17 significant digits so a reload is exact.
    """
    X = np.asarray(embedding, dtype=float)
    if X.ndim != 2:
        raise ParameterError(f"embedding must be 2-D, got shape {X.shape}")
    if not np.isfinite(X).all():
        raise NumericalError("embedding contains non-finite values; refusing to save")
    n, k = X.shape
    lines = [f"{n} {k}"]
    for i, row in enumerate(X):
        lines.append(" ".join([str(i)] + ["%.17g" % v for v in row]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def load_embedding(path) -> np.ndarray:
    with open(path, "r", encoding="ascii") as fh:
        rows = [(n, ln.split()) for n, ln in enumerate(fh, start=1)
                if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows:
        raise FormatError(f"{path}: empty embedding file")
    lineno, head = rows[0]
    try:
        n, k = (int(t) for t in head)
    except ValueError:
        raise FormatError(f"{path}:{lineno}: header must be 'N K'") from None
    body = rows[1:]
    if len(body) != n:
        raise FormatError(f"{path}: header declares {n} rows, found {len(body)}")
    X = np.empty((n, k))
    seen = np.zeros(n, dtype=bool)
    for lineno, parts in body:
        if len(parts) != k + 1:
            raise FormatError(f"{path}:{lineno}: expected {k + 1} fields, got {len(parts)}")
        try:
            i = int(parts[0])
            vals = [float(t) for t in parts[1:]]
        except ValueError:
            raise FormatError(f"{path}:{lineno}: malformed row") from None
        if not 0 <= i < n or seen[i]:
            raise FormatError(f"{path}:{lineno}: bad or repeated node id {i}")
        if not all(math.isfinite(v) for v in vals):
            raise FormatError(f"{path}:{lineno}: non-finite value")
        seen[i] = True
        X[i] = vals
    return X
