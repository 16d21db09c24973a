"""Dense/sparse kernels, nonlinearities, the classification loss and Adam.

Dense matrices are plain 2-D numpy arrays. Storage defaults to float32, but
every reduction is accumulated in float64 and the result is cast back to the
promoted input dtype, so passing float64 arrays gives a pure float64 path
(used by the gradient checks).
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

ACC = np.float64


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible."""


def _out_dtype(*arrays) -> np.dtype:
    return np.result_type(np.float32, *[a.dtype for a in arrays])


def as_dense(x, dtype=np.float32) -> np.ndarray:
    a = np.asarray(x, dtype=dtype)
    if a.ndim == 1:
        a = a.reshape(-1, 1)
    if a.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got shape {a.shape}")
    return a


def default_threads() -> int:
    env = os.environ.get("A2GNN_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


class CsrMatrix:
    """Compressed sparse row matrix with sorted, zero-free rows."""

    __slots__ = ("rows", "cols", "row_offsets", "col_indices", "values")

    def __init__(self, rows, cols, row_offsets, col_indices, values, check=True):
        self.rows = int(rows)
        self.cols = int(cols)
        self.row_offsets = np.asarray(row_offsets, dtype=np.int64)
        self.col_indices = np.asarray(col_indices, dtype=np.int64)
        self.values = np.asarray(values, dtype=np.float32)
        for a in (self.row_offsets, self.col_indices, self.values):
            a.setflags(write=False)
        if check:
            self.validate()

    def validate(self) -> None:
        ro, ci, v = self.row_offsets, self.col_indices, self.values
        if ro.shape != (self.rows + 1,):
            raise ShapeError(f"row_offsets must have length {self.rows + 1}, got {ro.shape[0]}")
        if ro[0] != 0 or ro[-1] != len(v) or len(ci) != len(v):
            raise ValueError("row_offsets inconsistent with stored entries")
        if np.any(np.diff(ro) < 0):
            raise ValueError("row_offsets must be non-decreasing")
        if len(ci) and (ci.min() < 0 or ci.max() >= self.cols):
            raise ValueError(f"column index out of range [0, {self.cols})")
        if len(ci) > 1:
            same_row = np.repeat(np.arange(self.rows), np.diff(ro))
            step = np.diff(ci)
            if np.any((step <= 0) & (same_row[1:] == same_row[:-1])):
                raise ValueError("column indices must be strictly increasing within a row")
        if np.any(v == 0):
            raise ValueError("explicit zeros are not allowed")
        if not np.all(np.isfinite(v)):
            raise ValueError("non-finite stored value")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    @property
    def nnz(self) -> int:
        return len(self.values)

    def row_ids(self) -> np.ndarray:
        return np.repeat(np.arange(self.rows, dtype=np.int64), np.diff(self.row_offsets))

    @classmethod
    def from_coo(cls, rows, cols, row_idx, col_idx, values=None, sum_duplicates=True):
        """Build from coordinate triples; duplicates are summed, zeros dropped."""
        r = np.asarray(row_idx, dtype=np.int64).ravel()
        c = np.asarray(col_idx, dtype=np.int64).ravel()
        if values is None:
            v = np.ones(len(r), dtype=ACC)
        else:
            v = np.asarray(values, dtype=ACC).ravel()
        if not (len(r) == len(c) == len(v)):
            raise ShapeError("coordinate arrays differ in length")
        if len(r) and (r.min() < 0 or r.max() >= rows or c.min() < 0 or c.max() >= cols):
            raise ValueError(f"coordinate out of range for shape ({rows}, {cols})")
        order = np.lexsort((c, r))
        r, c, v = r[order], c[order], v[order]
        if len(r):
            new = np.ones(len(r), dtype=bool)
            new[1:] = (r[1:] != r[:-1]) | (c[1:] != c[:-1])
            if sum_duplicates:
                starts = np.flatnonzero(new)
                v = np.add.reduceat(v, starts)
            else:
                v = v[new]
            r, c = r[new], c[new]
        v = v.astype(np.float32)
        keep = v != 0
        r, c, v = r[keep], c[keep], v[keep]
        offsets = np.zeros(rows + 1, dtype=np.int64)
        np.cumsum(np.bincount(r, minlength=rows), out=offsets[1:])
        return cls(rows, cols, offsets, c, v)

    @classmethod
    def from_dense(cls, a):
        a = np.asarray(a)
        r, c = np.nonzero(a)
        return cls.from_coo(a.shape[0], a.shape[1], r, c, a[r, c])

    @classmethod
    def identity(cls, n: int):
        idx = np.arange(n)
        return cls(n, n, np.arange(n + 1), idx, np.ones(n, dtype=np.float32))

    @classmethod
    def zeros(cls, rows: int, cols: int):
        return cls(rows, cols, np.zeros(rows + 1, dtype=np.int64), [], [])

    def to_dense(self, dtype=np.float32) -> np.ndarray:
        out = np.zeros(self.shape, dtype=dtype)
        out[self.row_ids(), self.col_indices] = self.values
        return out

    def transpose(self) -> CsrMatrix:
        return CsrMatrix.from_coo(self.cols, self.rows, self.col_indices, self.row_ids(), self.values)

    @property
    def T(self) -> CsrMatrix:
        return self.transpose()

    def diagonal(self) -> np.ndarray:
        d = np.zeros(min(self.shape), dtype=np.float32)
        r = self.row_ids()
        on = r == self.col_indices
        d[r[on]] = self.values[on]
        return d

    def row_sums(self) -> np.ndarray:
        return np.bincount(self.row_ids(), weights=self.values.astype(ACC), minlength=self.rows)

    def scale(self, left=None, right=None) -> CsrMatrix:
        """Return diag(left) @ self @ diag(right), dropping resulting zeros."""
        v = self.values.astype(ACC)
        if left is not None:
            v = v * np.asarray(left, dtype=ACC)[self.row_ids()]
        if right is not None:
            v = v * np.asarray(right, dtype=ACC)[self.col_indices]
        return CsrMatrix.from_coo(self.rows, self.cols, self.row_ids(), self.col_indices, v)

    def is_symmetric(self, tol: float = 0.0) -> bool:
        if self.rows != self.cols:
            return False
        t = self.transpose()
        if not (np.array_equal(t.row_offsets, self.row_offsets)
                and np.array_equal(t.col_indices, self.col_indices)):
            return False
        return bool(np.all(np.abs(t.values - self.values) <= tol))

    def __eq__(self, other) -> bool:
        if not isinstance(other, CsrMatrix):
            return NotImplemented
        return (self.shape == other.shape
                and np.array_equal(self.row_offsets, other.row_offsets)
                and np.array_equal(self.col_indices, other.col_indices)
                and np.array_equal(self.values, other.values))

    __hash__ = None

    def __repr__(self) -> str:
        return f"CsrMatrix(shape={self.shape}, nnz={self.nnz})"


def _spmm_rows(P: CsrMatrix, X: np.ndarray, start: int, stop: int) -> np.ndarray:
    ro = P.row_offsets
    lo, hi = ro[start], ro[stop]
    out = np.zeros((stop - start, X.shape[1]), dtype=ACC)
    if hi == lo:
        return out
    contrib = P.values[lo:hi, None].astype(ACC) * X[P.col_indices[lo:hi]]
    counts = np.diff(ro[start:stop + 1])
    nonempty = np.flatnonzero(counts)
    # reduceat sums each row segment left to right: fixed accumulation order
    out[nonempty] = np.add.reduceat(contrib, (ro[start:stop] - lo)[nonempty], axis=0)
    return out


def spmm(P: CsrMatrix, X, threads: int | None = None, block_rows: int = 4096) -> np.ndarray:
    """Sparse-dense product ``P @ X``.

    Rows are processed in independent blocks; each row is reduced in column
    order, so the result does not depend on the number of threads.
    """
    X = as_dense(X, dtype=np.result_type(np.float32, np.asarray(X).dtype))
    if P.cols != X.shape[0]:
        raise ShapeError(f"spmm: sparse operand is {P.rows}x{P.cols} but dense operand is "
                         f"{X.shape[0]}x{X.shape[1]}")
    Xa = X.astype(ACC, copy=False)
    bounds = [(s, min(s + block_rows, P.rows)) for s in range(0, P.rows, block_rows)]
    threads = default_threads() if threads is None else threads
    if threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda b: _spmm_rows(P, Xa, *b), bounds))
    else:
        parts = [_spmm_rows(P, Xa, *b) for b in bounds]
    out = np.concatenate(parts, axis=0) if parts else np.zeros((0, X.shape[1]), dtype=ACC)
    return out.astype(X.dtype, copy=False)


def gemm(A, B, transpose_a: bool = False, transpose_b: bool = False) -> np.ndarray:
    A = as_dense(A, dtype=np.asarray(A).dtype if np.asarray(A).dtype.kind == "f" else np.float32)
    B = as_dense(B, dtype=np.asarray(B).dtype if np.asarray(B).dtype.kind == "f" else np.float32)
    dtype = _out_dtype(A, B)
    a = A.T if transpose_a else A
    b = B.T if transpose_b else B
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"gemm: inner dimensions differ ({a.shape[0]}x{a.shape[1]} "
                         f"times {b.shape[0]}x{b.shape[1]})")
    return (a.astype(ACC) @ b.astype(ACC)).astype(dtype, copy=False)


def relu(X) -> np.ndarray:
    X = np.asarray(X)
    return np.maximum(X, 0).astype(X.dtype, copy=False)


def relu_backward(X, dY) -> np.ndarray:
    X, dY = np.asarray(X), np.asarray(dY)
    if X.shape != dY.shape:
        raise ShapeError(f"relu_backward: input {X.shape} vs upstream gradient {dY.shape}")
    return np.where(X > 0, dY, 0).astype(dY.dtype, copy=False)


def softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=ACC)
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_cross_entropy(logits, labels, mask=None) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over the masked rows and its gradient w.r.t. logits."""
    logits = as_dense(logits, dtype=np.asarray(logits).dtype)
    n, c = logits.shape
    labels = np.asarray(labels, dtype=np.int64)
    mask = np.ones(n, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    if mask.shape != (n,) or labels.shape != (n,):
        raise ShapeError(f"labels/mask must have length {n}")
    count = int(mask.sum())
    if count == 0:
        raise ValueError("softmax_cross_entropy: empty mask")
    y = labels[mask]
    if y.min() < 0 or y.max() >= c:
        raise ValueError(f"label out of range [0, {c})")
    z = logits[mask].astype(ACC)
    z = z - z.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=1))
    loss = float(np.mean(logsum - z[np.arange(count), y]))
    p = np.exp(z - logsum[:, None])
    p[np.arange(count), y] -= 1.0
    grad = np.zeros((n, c), dtype=ACC)
    grad[mask] = p / count
    return loss, grad.astype(_out_dtype(logits), copy=False)


@dataclass
class AdamState:
    first_moment: dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: dict[str, np.ndarray] = field(default_factory=dict)
    step_count: int = 0


def adam_step(params: dict, grads: dict, state: AdamState, lr: float = 0.005,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8,
              weight_decay: float = 0.0) -> tuple[dict, AdamState]:
    """One bias-corrected Adam update with L2 weight decay folded into the gradient.

    Returns new parameter and state objects; the inputs are left untouched.
    """
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient for parameter '{name}'")
        if np.shape(g) != np.shape(params[name]):
            raise ShapeError(f"gradient for '{name}' has shape {np.shape(g)}, "
                             f"parameter has {np.shape(params[name])}")
    t = state.step_count + 1
    bc1 = 1.0 - beta1 ** t
    bc2 = 1.0 - beta2 ** t
    new_params, m_new, v_new = {}, {}, {}
    for name, p in params.items():
        p = np.asarray(p)
        if name not in grads:
            new_params[name] = p.copy()
            if name in state.first_moment:
                m_new[name] = state.first_moment[name].copy()
                v_new[name] = state.second_moment[name].copy()
            continue
        g = np.asarray(grads[name], dtype=ACC) + weight_decay * p.astype(ACC)
        m = state.first_moment.get(name)
        v = state.second_moment.get(name)
        m = np.zeros_like(g) if m is None else m.astype(ACC)
        v = np.zeros_like(g) if v is None else v.astype(ACC)
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * g * g
        update = lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
        new_params[name] = (p.astype(ACC) - update).astype(p.dtype)
        m_new[name] = m.astype(p.dtype)
        v_new[name] = v.astype(p.dtype)
    return new_params, AdamState(m_new, v_new, t)
