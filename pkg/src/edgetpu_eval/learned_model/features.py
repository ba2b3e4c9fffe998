"""Cell -> graph features, and batching of many graphs into one disjoint graph."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from ..nas_graph import CellGraph, OperationKind

NODE_CODE = {
    OperationKind.INPUT: 1.0,
    OperationKind.CONV3X3: 2.0,
    OperationKind.MAXPOOL3X3: 3.0,
    OperationKind.CONV1X1: 4.0,
    OperationKind.OUTPUT: 5.0,
}


@dataclass(frozen=True)
class GraphFeatures:
    node_features: np.ndarray  # (V, F_node)
    senders: np.ndarray  # (E,)
    receivers: np.ndarray  # (E,)
    edge_features: np.ndarray  # (E, F_edge)
    global_feature: np.ndarray  # (F_global,)

    def __post_init__(self):
        nv = len(self.node_features)
        if len(self.senders) != len(self.receivers) or len(self.senders) != len(self.edge_features):
            raise ValueError("senders, receivers and edge features must align")
        if len(self.senders) and (
            min(self.senders.min(), self.receivers.min()) < 0
            or max(self.senders.max(), self.receivers.max()) >= nv
        ):
            raise ValueError("edge endpoint out of range")


def encode_cell(cell: CellGraph) -> GraphFeatures:
    edges = cell.edges
    return GraphFeatures(
        node_features=np.array([[NODE_CODE[op]] for op in cell.ops]),
        senders=np.array([i for i, _ in edges], dtype=np.int64),
        receivers=np.array([j for _, j in edges], dtype=np.int64),
        edge_features=np.ones((len(edges), 1)),
        global_feature=np.ones(1),
    )


@dataclass
class GraphBatch:
    """Disjoint union of graphs with sparse aggregation operators.

    ``recv_agg`` / ``send_agg`` (nodes x edges) sum edge rows into their
    receivers / senders;
    ``edge_graph`` / ``node_graph`` (graphs x edges / nodes) sum per graph.
    """

    nodes: np.ndarray
    edges: np.ndarray
    globals_: np.ndarray
    senders: np.ndarray
    receivers: np.ndarray
    edge_gid: np.ndarray
    node_gid: np.ndarray
    recv_agg: sp.csr_matrix
    send_agg: sp.csr_matrix
    edge_graph: sp.csr_matrix
    node_graph: sp.csr_matrix

    @property
    def num_graphs(self) -> int:
        return len(self.globals_)

    @classmethod
    def from_features(cls, feats: Sequence[GraphFeatures]) -> "GraphBatch":
        node_counts = np.array([len(f.node_features) for f in feats], dtype=np.int64)
        edge_counts = np.array([len(f.senders) for f in feats], dtype=np.int64)
        offsets = np.concatenate([[0], np.cumsum(node_counts)[:-1]])
        n_nodes = int(node_counts.sum())
        n_edges = int(edge_counts.sum())
        n_graphs = len(feats)
        senders = np.concatenate([f.senders + o for f, o in zip(feats, offsets)]) if n_edges else np.zeros(0, np.int64)
        receivers = np.concatenate([f.receivers + o for f, o in zip(feats, offsets)]) if n_edges else np.zeros(0, np.int64)
        edge_gid = np.repeat(np.arange(n_graphs), edge_counts)
        node_gid = np.repeat(np.arange(n_graphs), node_counts)
        ones_e = np.ones(n_edges)
        return cls(
            nodes=np.concatenate([f.node_features for f in feats]),
            edges=np.concatenate([f.edge_features for f in feats]) if n_edges else np.zeros((0, 1)),
            globals_=np.stack([f.global_feature for f in feats]),
            senders=senders.astype(np.int64),
            receivers=receivers.astype(np.int64),
            edge_gid=edge_gid,
            node_gid=node_gid,
            recv_agg=sp.csr_matrix((ones_e, (receivers, np.arange(n_edges))), shape=(n_nodes, n_edges)),
            send_agg=sp.csr_matrix((ones_e, (senders, np.arange(n_edges))), shape=(n_nodes, n_edges)),
            edge_graph=sp.csr_matrix((ones_e, (edge_gid, np.arange(n_edges))), shape=(n_graphs, n_edges)),
            node_graph=sp.csr_matrix((np.ones(n_nodes), (node_gid, np.arange(n_nodes))), shape=(n_graphs, n_nodes)),
        )

    @classmethod
    def from_cells(cls, cells: Sequence[CellGraph]) -> "GraphBatch":
        return cls.from_features([encode_cell(c) for c in cells])
