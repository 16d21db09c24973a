"""
Sparse propagation from the ground up
=====================================

Build a small graph, turn it into the four transition matrices and watch
repeated propagation smooth node features.
"""

import numpy as np

from a2gnn.data import adjacency_from_edges
from a2gnn.linalg import spmm
from a2gnn.spectral import operator_norm, second_eigenvalue_magnitude
from a2gnn.transition import build_transition, propagate

# a 6-node graph: two triangles joined by one bridge edge
edges = [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (2, 3)]
A = adjacency_from_edges(6, edges)
print("adjacency (CSR):", A)
print(A.to_dense().astype(int))

# transition matrices; sym and rw add self-loops, no_loop does not
for kind in ("sym", "no_loop", "rw", "diff"):
    P = build_transition(A, kind)
    print(f"\n{kind:8s} nnz={P.nnz:3d}  row sums={np.round(P.row_sums(), 3)}")
    print(f"{'':8s} largest singular value {operator_norm(P):.4f}")

# one SpMM is one round of neighbour averaging
P = build_transition(A, "sym")
X = np.eye(6, 2, dtype=np.float32)  # node 0 and node 1 carry a signal
print("\nP X =")
print(np.round(spmm(P, X), 3))

# more rounds spread the signal over the whole graph
for k in (1, 2, 5, 20):
    H = propagate(P, X, k)
    print(f"k={k:2d} column spread (std over nodes): {H.std(axis=0).round(4)}")

# the decay rate of the non-principal part is set by |lambda_2|
lam = second_eigenvalue_magnitude(P)
print(f"\n|lambda_2| = {lam:.4f}; after 5 steps that mode is scaled by {lam ** 5:.4f}")
