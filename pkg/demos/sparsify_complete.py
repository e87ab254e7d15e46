"""Sparsify a bidirected complete graph and check it with the dense oracle."""

import argparse

from eulersparse.dense_oracle import verify_sparsifier
from eulersparse.graph_core import random_bidirected
from eulersparse.sparsify import SparsifyConfig, run_fast_sparsify


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=64)
    ap.add_argument("--eps", type=float, default=0.3)
    ap.add_argument("--seed", type=int, default=0)
    a = ap.parse_args()

    G = random_bidirected(a.n, None, U=1, seed=a.seed)
    res = run_fast_sparsify(G, config=SparsifyConfig(eps=a.eps, seed=a.seed))
    for row in res.trajectory:
        print(f"round {row['round']}: {row['nnz']} edges, {row['processed']} pieces walked")
    rep = verify_sparsifier(G, res.graph, a.eps)
    print(f"{G.m} -> {res.graph.m} edges, operator-norm error "
          f"{rep.opnorm_error:.3f}, pass={rep.passed}")


if __name__ == "__main__":
    main()
