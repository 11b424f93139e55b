"""
Connectivity graph export.

Nodes are countries carrying their weighted degree; undirected edges carry
the mutual proximity S_ij. Rendering is left to external graph tools.
"""

from pathlib import Path
from typing import Union

import networkx as nx

from ..core.errors import ExportError, UsageError
from ..core.logging import get_logger
from .matrix import WeightMatrix

logger = get_logger("weights.graph")


def to_graph(w: WeightMatrix) -> nx.Graph:
    """Undirected weighted graph over the proximity base."""
    if not w.has_base:
        raise UsageError("graph export needs the proximity base; W alone fixes only row shares")
    graph = nx.Graph()
    degrees = w.S.sum(axis=1)
    for label, degree in zip(w.labels, degrees):
        graph.add_node(label, weighted_degree=float(degree))
    for i in range(w.n):
        for j in range(i + 1, w.n):
            if w.S[i, j] > 0:
                graph.add_edge(w.labels[i], w.labels[j], weight=float(w.S[i, j]))
    return graph


def export_graph(w: WeightMatrix, path: Union[str, Path]) -> Path:
    """Write the connectivity graph as GraphML (or GML for a .gml suffix)."""
    path = Path(path)
    graph = to_graph(w)
    try:
        if path.suffix.lower() == ".gml":
            nx.write_gml(graph, path)
        else:
            nx.write_graphml(graph, path)
    except OSError as exc:
        raise ExportError(f"cannot write graph to {path}: {exc}") from exc
    logger.info("Exported graph", path=str(path), nodes=graph.number_of_nodes(), edges=graph.number_of_edges())
    return path
