"""Graph view of an effective Hamiltonian.

Nodes are Fock configurations (1-based l); an edge joins l != l' whenever
|H_eff[l, l']| exceeds a cutoff C, given in units of g0.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import networkx as nx
import numpy as np

from .errors import ValidationError

DEFAULT_CUTOFF = 1e-2


def adjacency(H_eff, C: float = DEFAULT_CUTOFF) -> np.ndarray:
    H = np.asarray(H_eff)
    if C < 0:
        raise ValidationError("cutoff", f"must be >= 0, got {C}")
    mag = np.abs(H)
    # symmetrize magnitudes so round-off asymmetry cannot break a_{ll'} = a_{l'l}
    mag = np.maximum(mag, mag.T)
    a = (mag > C).astype(np.int8)
    np.fill_diagonal(a, 0)
    return a


def degrees(a) -> np.ndarray:
    return np.asarray(a).sum(axis=1).astype(np.int64)


def edge_count(a) -> int:
    return int(np.asarray(a).sum()) // 2


def density(a) -> float:
    """2|E| / (|V|(|V|-1)); equals 1 only for a clique."""
    V = np.asarray(a).shape[0]
    if V < 2:
        raise ValidationError("graph", "density needs at least two nodes")
    return 2.0 * edge_count(a) / (V * (V - 1))


@dataclass(frozen=True)
class GraphSummary:
    degrees: np.ndarray
    edge_count: int
    density: float

    @classmethod
    def of(cls, a) -> "GraphSummary":
        return cls(degrees=degrees(a), edge_count=edge_count(a), density=density(a))


@dataclass
class DegreeHistogram:
    """Pooled node-degree counts over K = 0..D-1, merged by integer addition."""

    counts: np.ndarray
    graphs: int = 0

    @classmethod
    def empty(cls, D: int) -> "DegreeHistogram":
        return cls(counts=np.zeros(D, dtype=np.int64))

    def add(self, a) -> "DegreeHistogram":
        k = degrees(a)
        if len(k) != len(self.counts):
            raise ValidationError("graph", f"expected {len(self.counts)} nodes, got {len(k)}")
        self.counts = self.counts + np.bincount(k, minlength=len(self.counts))
        self.graphs += 1
        return self

    def merge(self, other: "DegreeHistogram") -> "DegreeHistogram":
        if len(other.counts) != len(self.counts):
            raise ValidationError("graph", "cannot merge degree histograms of different sizes")
        return DegreeHistogram(self.counts + other.counts, self.graphs + other.graphs)

    @property
    def probability(self) -> np.ndarray:
        return self.counts / self.counts.sum()

    @property
    def mean(self) -> float:
        K = np.arange(len(self.counts))
        return float(np.sum(K * self.counts) / self.counts.sum())

    @property
    def variance(self) -> float:
        K = np.arange(len(self.counts))
        return float(np.sum((K - self.mean) ** 2 * self.counts) / self.counts.sum())


def degree_distribution(graphs) -> DegreeHistogram:
    """P(K) pooled over every node of every graph in the ensemble."""
    graphs = list(graphs)
    if not graphs:
        raise ValidationError("ensemble", "need at least one graph")
    hist = DegreeHistogram.empty(np.asarray(graphs[0]).shape[0])
    for a in graphs:
        hist.add(a)
    return hist


def _edges(a, H_eff=None):
    a = np.asarray(a)
    rows, cols = np.nonzero(np.triu(a, k=1))
    if H_eff is None:
        weights = np.ones(len(rows))
    else:
        weights = np.abs(np.asarray(H_eff))[rows, cols]
    return [(int(i) + 1, int(j) + 1, float(w)) for i, j, w in zip(rows, cols, weights)]


def to_networkx(a, H_eff=None, labels=None) -> nx.Graph:
    g = nx.Graph()
    for l in range(1, np.asarray(a).shape[0] + 1):
        attrs = {"occupation": labels[l - 1]} if labels is not None else {}
        g.add_node(l, **attrs)
    for i, j, w in _edges(a, H_eff):
        g.add_edge(i, j, weight=w)
    return g


def export_graph(a, path, H_eff=None, fmt: str | None = None, labels=None) -> Path:
    """Write the graph as DOT, GraphML or an edge-list CSV.

    Edge weights are |H_eff| entries when ``H_eff`` is given. ``labels`` is an
    optional sequence of occupation strings, one per node.
    """
    path = Path(path)
    fmt = (fmt or path.suffix.lstrip(".")).lower()
    if not path.parent.exists():
        raise ValidationError("out", f"directory {path.parent} does not exist")
    if fmt == "dot":
        lines = ["graph heff {"]
        for l in range(1, np.asarray(a).shape[0] + 1):
            extra = f' [label="{l}", occupation="{labels[l - 1]}"]' if labels is not None else ""
            lines.append(f"  {l}{extra};")
        for i, j, w in _edges(a, H_eff):
            lines.append(f"  {i} -- {j} [weight={w:.17g}];")
        lines.append("}")
        path.write_text("\n".join(lines) + "\n")
    elif fmt == "graphml":
        nx.write_graphml(to_networkx(a, H_eff, labels), path)
    elif fmt in ("csv", "edge-csv"):
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["# nodes", np.asarray(a).shape[0]])
            writer.writerow(["l", "l_tilde", "weight"])
            for i, j, w in _edges(a, H_eff):
                writer.writerow([i, j, f"{w:.17g}"])
    else:
        raise ValidationError("format", f"unknown graph format {fmt!r}")
    return path


def read_edge_csv(path) -> tuple[np.ndarray, dict]:
    """Inverse of the edge-CSV export: (adjacency, {(l, l'): weight})."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    D = int(rows[0][1])
    a = np.zeros((D, D), dtype=np.int8)
    weights = {}
    for i, j, w in rows[2:]:
        i, j = int(i), int(j)
        a[i - 1, j - 1] = a[j - 1, i - 1] = 1
        weights[(i, j)] = float(w)
    return a, weights
