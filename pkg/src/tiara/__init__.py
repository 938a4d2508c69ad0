"""Time-aware random-walk diffusion matrices for dynamic graph snapshots."""

__version__ = "0.1.0"

from .diffusion import (DiffusionConfig, DiffusionState, Kernel, combine,
                        iter_augmented, power_iteration,
                        power_iteration_error_bound, run, sparsify,
                        spatial_augmenter, step, temporal_augmenter)
from .dynamics import (NodeRemoval, PostProcessConfig, apply_post, delete_node,
                       drop_weights, insert_node, symmetric_trick,
                       undirected_average)
from .ingest import (ParseError, SnapshotSequence, TemporalEdgeList,
                     activated_nodes, bin_snapshots, delete_edge, insert_edge,
                     load_edge_list, parse_edge_list, sequence_from_pairs)
from .sparse import (NodeSet, SparseMatrix, column_normalize, extract_block,
                     read_mtx, read_tsv, row_normalize, spmm, transpose,
                     write_mtx, write_tsv)

__all__ = [
    "DiffusionConfig", "DiffusionState", "Kernel", "NodeRemoval", "NodeSet",
    "ParseError", "PostProcessConfig", "SnapshotSequence", "SparseMatrix",
    "TemporalEdgeList", "activated_nodes", "apply_post", "bin_snapshots",
    "column_normalize", "combine", "delete_edge", "delete_node",
    "drop_weights", "extract_block", "insert_edge", "insert_node",
    "iter_augmented", "load_edge_list", "parse_edge_list", "power_iteration",
    "power_iteration_error_bound", "read_mtx", "read_tsv", "row_normalize",
    "run", "sequence_from_pairs", "sparsify", "spatial_augmenter", "spmm",
    "step", "symmetric_trick", "temporal_augmenter", "transpose",
    "undirected_average", "write_mtx", "write_tsv",
]
