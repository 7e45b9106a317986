"""Encode information sources of an attributed graph as weighted graphs.

Each source becomes a symmetric N x N matrix (a "view") that is rescaled to
[0, 1] by a z-score followed by min-max normalisation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DegenerateGraphError, ParameterError
from .graph import AttributedGraph


@dataclass(frozen=True)
class SourceKind:
    """Tag for a view: ``proximity`` (with step ``h``), ``community``,
    ``attributes`` or ``external`` (with a free-form ``name``)."""

    kind: str
    h: Optional[int] = None
    name: Optional[str] = None

    def __str__(self):
        if self.kind == "proximity":
            return f"proximity{self.h}"
        if self.kind == "external":
            return f"external:{self.name}"
        return self.kind

    @property
    def family(self) -> str:
        """Short source family used for default hyper-parameters: T, C, A or E."""
        return {"proximity": "T", "community": "C", "attributes": "A"}.get(self.kind, "E")


def Proximity(h: int) -> SourceKind:
    return SourceKind("proximity", h=h)


COMMUNITY = SourceKind("community")
ATTRIBUTES = SourceKind("attributes")


def External(name: str) -> SourceKind:
    return SourceKind("external", name=name)


@dataclass(frozen=True)
class SourceView:
    kind: SourceKind
    matrix: np.ndarray


def proximity_views(A, h_max: int) -> list[np.ndarray]:
    """Walk-count matrices ``[A, A^2, ..., A^h_max]``.

    Counts are held in float64, exact while they stay below 2**53.
    """
    if h_max < 1:
        raise ParameterError(f"h_max must be >= 1, got {h_max}")
    A = np.asarray(A, dtype=float)
    out = [A.copy()]
    for _ in range(1, h_max):
        out.append(out[-1] @ A)
    return out


def modularity_view(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    d = A.sum(axis=1)
    two_e = d.sum()
    if two_e <= 0:
        raise DegenerateGraphError("modularity matrix undefined for a graph with no edges")
    return A - np.outer(d, d) / two_e


def attribute_view(C) -> np.ndarray:
    """Cosine similarity of attribute rows; rows without attributes get 0."""
    C = np.asarray(C, dtype=float)
    norms = np.linalg.norm(C, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    Cn = C / safe[:, None]
    S = Cn @ Cn.T
    # BLAS may round (i, j) and (j, i) differently
    S = (S + S.T) / 2
    return np.clip(S, 0.0, 1.0)


def znorm(z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    sigma = z.std()
    if not sigma > 0:
        return np.zeros_like(z)
    return (z - z.mean()) / sigma


def mnorm(z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    lo, hi = z.min(), z.max()
    if not hi > lo:
        return np.zeros_like(z)
    return (z - lo) / (hi - lo)


def normalize(raw) -> np.ndarray:
    """Z-score then min-max over all entries; constant input maps to zeros."""
    raw = np.asarray(raw, dtype=float)
    if raw.size == 0:
        return raw.copy()
    out = mnorm(znorm(raw))
    return np.clip(out, 0.0, 1.0)


def build_views(
    graph: AttributedGraph,
    h_max: int = 1,
    include_community: bool = False,
    include_attributes: bool = False,
) -> list[SourceView]:
    """Normalised views in the order proximity 1..h_max, community, attributes.

    ``h_max = 0`` skips the proximity views; at least one view must remain.
    """
    if h_max < 0:
        raise ParameterError(f"h_max must be >= 0, got {h_max}")
    if h_max == 0 and not (include_community or include_attributes):
        raise ParameterError("no information source selected")
    views = []
    if h_max:
        for h, P in enumerate(proximity_views(graph.adjacency, h_max), start=1):
            views.append(SourceView(Proximity(h), normalize(P)))
    if include_community:
        views.append(SourceView(COMMUNITY, normalize(modularity_view(graph.adjacency))))
    if include_attributes:
        if graph.n_attrs == 0:
            raise ParameterError("attribute view requested but the graph has no attributes")
        views.append(SourceView(ATTRIBUTES, normalize(attribute_view(graph.attributes))))
    return views
