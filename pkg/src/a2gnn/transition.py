"""Transition matrices (sym / no_loop / rw / diff) and k-step propagation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .linalg import ACC, CsrMatrix, ShapeError, spmm

SCHEMES = ("sym", "no_loop", "rw", "diff")
DIFF_DROP_TOL = 1e-8


@dataclass(frozen=True)
class TransitionScheme:
    kind: str = "sym"
    diffusion_truncation: int = 10

    def __post_init__(self):
        kind = self.kind.replace("-", "_")
        if kind not in SCHEMES:
            raise ValueError(f"unknown transition scheme {self.kind!r}; expected one of {SCHEMES}")
        object.__setattr__(self, "kind", kind)
        if kind == "diff" and self.diffusion_truncation < 1:
            raise ValueError("diffusion_truncation must be >= 1")

    @property
    def symmetric(self) -> bool:
        return self.kind in ("sym", "no_loop")


def _with_self_loops(adjacency: CsrMatrix) -> CsrMatrix:
    n = adjacency.rows
    eye = np.arange(n)
    return CsrMatrix.from_coo(n, n, np.concatenate([adjacency.row_ids(), eye]),
                              np.concatenate([adjacency.col_indices, eye]),
                              np.concatenate([adjacency.values.astype(ACC), np.ones(n)]))


def _inv_pow(deg: np.ndarray, power: float) -> np.ndarray:
    out = np.zeros_like(deg, dtype=ACC)
    nz = deg > 0
    out[nz] = deg[nz] ** power
    return out


def _to_scipy(m: CsrMatrix) -> sp.csr_matrix:
    return sp.csr_matrix((m.values.astype(ACC), m.col_indices, m.row_offsets), shape=m.shape)


def _diffusion(rw: CsrMatrix, truncation: int) -> CsrMatrix:
    T = _to_scipy(rw)
    term = sp.identity(rw.rows, dtype=ACC, format="csr")
    total = term.copy()
    for p in range(1, truncation + 1):
        term = term @ T
        total = total + term / math.factorial(p)
    total = (total / math.e).tocoo()
    keep = np.abs(total.data) >= DIFF_DROP_TOL
    return CsrMatrix.from_coo(rw.rows, rw.cols, total.row[keep], total.col[keep], total.data[keep])


def build_transition(adjacency: CsrMatrix, scheme: TransitionScheme | str = "sym") -> CsrMatrix:
    """Normalized propagation matrix for ``adjacency`` under ``scheme``.

    ``sym``: D̃^-1/2 (A+I) D̃^-1/2; ``no_loop``: D^-1/2 A D^-1/2 with isolated
    nodes left as zero rows; ``rw``: D̃^-1 (A+I); ``diff``: the heat-kernel
    series sum_p (D̃^-1 Ã)^p / (e p!) truncated at ``diffusion_truncation``,
    with entries below 1e-8 dropped.
    """
    if isinstance(scheme, str):
        scheme = TransitionScheme(scheme)
    if adjacency.rows != adjacency.cols:
        raise ShapeError(f"adjacency must be square, got {adjacency.shape}")
    if scheme.kind == "no_loop":
        d = _inv_pow(adjacency.row_sums(), -0.5)
        return adjacency.scale(d, d)
    a_tilde = _with_self_loops(adjacency)
    deg = a_tilde.row_sums()
    if scheme.kind == "sym":
        d = _inv_pow(deg, -0.5)
        return a_tilde.scale(d, d)
    rw = a_tilde.scale(_inv_pow(deg, -1.0))
    if scheme.kind == "rw":
        return rw
    return _diffusion(rw, scheme.diffusion_truncation)


def propagate(P: CsrMatrix, X, k: int, threads: int | None = None) -> np.ndarray:
    """Return P^k X by k successive SpMM calls (X itself, copied, when k == 0)."""
    if k < 0:
        raise ValueError("k must be non-negative")
    X = np.asarray(X)
    if P.cols != X.shape[0]:
        raise ShapeError(f"propagate: matrix is {P.rows}x{P.cols} but features have "
                         f"{X.shape[0]} rows")
    out = X.copy()
    for _ in range(k):
        out = spmm(P, out, threads=threads)
    return out


def propagate_transpose(P: CsrMatrix, G, k: int, threads: int | None = None) -> np.ndarray:
    """(P^k)^T G, the adjoint of :func:`propagate` used in backward passes."""
    return propagate(P.transpose(), G, k, threads=threads) if k else np.array(G, copy=True)
