"""Eulerian spectral sparsification and graphical sketches.

Names are imported lazily so that ``python -m eulersparse --threads k``
can cap BLAS threads before numpy loads.
"""

from importlib import import_module

_EXPORTS = {
    "DirectedGraph": "graph_core",
    "build_graph": "graph_core",
    "read_edge_list": "graph_core",
    "write_edge_list": "graph_core",
    "random_eulerian": "graph_core",
    "random_bidirected": "graph_core",
    "random_undirected": "graph_core",
    "bipartite_lift": "graph_core",
    "spanning_tree": "graph_core",
    "LaplacianSolver": "lap_solver",
    "approx_er": "resistance",
    "er_decomp": "decomposition",
    "expander_decomp": "decomposition",
    "rounding": "projection_rounding",
    "proj_minus_rank_one": "projection_rounding",
    "SparsifyConfig": "sparsify",
    "fast_sparsify": "sparsify",
    "run_fast_sparsify": "sparsify",
    "SketchConfig": "sketch",
    "spectral_sketch": "sketch",
    "undirected_sketch": "sketch",
    "eulerian_solve": "solver_apps",
    "stationary_distribution": "solver_apps",
    "sparsifier_error": "dense_oracle",
    "verify_sparsifier": "dense_oracle",
}

__all__ = sorted(_EXPORTS)
__version__ = "0.1.0"


def __getattr__(name):
    if name in _EXPORTS:
        return getattr(import_module(f".{_EXPORTS[name]}", __name__), name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
