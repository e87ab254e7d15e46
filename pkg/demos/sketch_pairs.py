"""Graphical spectral sketch: per-pair bilinear error against a fixed vector family."""

import numpy as np

from eulersparse.graph_core import random_bidirected
from eulersparse.sketch import SketchConfig, bilinear_errors, pair_family, run_spectral_sketch

G = random_bidirected(64, None, U=1, seed=0)
A, Z = pair_family(G.n, 500, seed=1)  # fixed before sketching
for beta in (None, 32, 16):
    res = run_spectral_sketch(G, config=SketchConfig(eps=0.5, delta=0.1, beta=beta, seed=0))
    err = bilinear_errors(G, res.graph, A, Z)
    print(f"beta={res.info['beta']:.0f}: {G.m} -> {res.graph.m} edges, "
          f"{np.mean(err <= 0.5):.0%} of pairs within 0.5, median error {np.median(err):.3f}")
