"""Stationary distribution of a random sparse Markov chain."""

import numpy as np
import scipy.sparse as sp

from eulersparse.solver_apps import stationary_distribution

rng = np.random.default_rng(7)
n = 300
P = sp.random(n, n, density=0.02, random_state=rng, format="csr")
P = P + sp.diags(np.ones(n - 1), 1, shape=(n, n)) + sp.csr_matrix(([1.0], ([n - 1], [0])), shape=(n, n))
P = sp.diags(1.0 / np.asarray(P.sum(axis=1)).ravel()) @ P

res = stationary_distribution(P.tocsr(), eps=1e-10, return_info=True)
print(f"residual ||pi P - pi||_1 = {res.residual:.2e}")
print("largest entries:", np.round(np.sort(res.pi)[-5:], 5))
