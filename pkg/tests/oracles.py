"""Independent reference computations used by the tests.

Nothing here imports the kernels under test except for data containers.
"""

import numpy as np


def numeric_grad(f, x, h=1e-6):
    """Central finite differences of scalar ``f`` at float64 array ``x``."""
    x = np.array(x, dtype=np.float64)
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + h
        fp = f(x)
        x[i] = old - h
        fm = f(x)
        x[i] = old
        g[i] = (fp - fm) / (2 * h)
    return g


def rel_err(a, b):
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    denom = max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)
    return float(np.linalg.norm(a - b) / denom)


def random_adjacency(rng, n, p=None):
    """Dense symmetric 0/1 matrix with zero diagonal."""
    p = rng.uniform(0.05, 0.5) if p is None else p
    upper = np.triu(rng.random((n, n)) < p, k=1)
    return (upper | upper.T).astype(np.float64)


def dense_transition(A, kind, truncation=10):
    """Transition matrices built with plain dense numpy."""
    n = A.shape[0]
    if kind == "no_loop":
        deg = A.sum(1)
        d = np.where(deg > 0, 1.0 / np.sqrt(np.where(deg > 0, deg, 1)), 0.0)
        return d[:, None] * A * d[None, :]
    At = A + np.eye(n)
    deg = At.sum(1)
    if kind == "sym":
        d = 1.0 / np.sqrt(deg)
        return d[:, None] * At * d[None, :]
    T = At / deg[:, None]
    if kind == "rw":
        return T
    out = np.zeros_like(T)
    term = np.eye(n)
    fact = 1.0
    for p in range(truncation + 1):
        if p:
            term = term @ T
            fact *= p
        out += term / (np.e * fact)
    out[np.abs(out) < 1e-8] = 0.0
    return out


def dense_sigma_max(M):
    return float(np.linalg.svd(np.asarray(M, dtype=np.float64), compute_uv=False)[0]) if M.size else 0.0


def jacobi_eigvals(S, sweeps=100, tol=1e-13):
    """Cyclic Jacobi eigenvalues of a symmetric matrix (small n only)."""
    A = np.array(S, dtype=np.float64)
    n = A.shape[0]
    for _ in range(sweeps):
        off = np.sqrt(max(np.sum(A ** 2) - np.sum(np.diag(A) ** 2), 0.0))
        if off < tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(A[p, q]) < 1e-14 * (abs(A[p, p]) + abs(A[q, q]) + 1e-300):
                    continue
                theta = (A[q, q] - A[p, p]) / (2 * A[p, q])
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta ** 2 + 1)) if theta else 1.0
                c = 1 / np.sqrt(t ** 2 + 1)
                s = t * c
                J = np.eye(n)
                J[p, p] = J[q, q] = c
                J[p, q] = s
                J[q, p] = -s
                A = J.T @ A @ J
    return np.sort(np.diag(A))


def mmd_brute(X, Y, sigmas):
    """Biased squared MMD by explicit triple loops over pairs."""
    def k(a, b):
        return sum(np.exp(-np.sum((a - b) ** 2) / (2 * s * s)) for s in sigmas)
    n, m = len(X), len(Y)
    xx = sum(k(X[i], X[j]) for i in range(n) for j in range(n)) / n ** 2
    yy = sum(k(Y[i], Y[j]) for i in range(m) for j in range(m)) / m ** 2
    xy = sum(k(X[i], Y[j]) for i in range(n) for j in range(m)) / (n * m)
    return xx + yy - 2 * xy


def f1_brute(pred, truth, num_classes):
    """Per-class precision/recall loops; absent classes score 0."""
    f1s = []
    for c in range(num_classes):
        tp = sum(1 for p, t in zip(pred, truth) if p == c and t == c)
        fp = sum(1 for p, t in zip(pred, truth) if p == c and t != c)
        fn = sum(1 for p, t in zip(pred, truth) if p != c and t == c)
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        f1s.append(2 * prec * rec / (prec + rec) if prec + rec else 0.0)
    acc = sum(1 for p, t in zip(pred, truth) if p == t) / len(pred)
    return sum(f1s) / num_classes, acc
