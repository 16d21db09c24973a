"""Domain alignment losses: Gaussian-kernel MMD and adversarial discrimination
behind a gradient reversal layer."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .linalg import ACC, ShapeError, relu, relu_backward
from .model import glorot

KERNEL_BLOCK_ROWS = 1024


class DegenerateBandwidthWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class MmdConfig:
    """``bandwidths=None`` selects the median heuristic with scales {1/2, 1, 2}."""

    bandwidths: tuple[float, ...] | None = None
    subsample_limit: int | None = None
    median_sample_cap: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.bandwidths is not None:
            if len(self.bandwidths) == 0:
                raise ValueError("at least one bandwidth is required")
            if any(not b > 0 for b in self.bandwidths):
                raise ValueError("bandwidths must be positive")
            object.__setattr__(self, "bandwidths", tuple(float(b) for b in self.bandwidths))
        if self.subsample_limit is not None and self.subsample_limit < 2:
            raise ValueError("subsample_limit must be at least 2")

    @property
    def auto(self) -> bool:
        return self.bandwidths is None


def _sq_dists(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    d = (X * X).sum(1)[:, None] + (Y * Y).sum(1)[None, :] - 2.0 * (X @ Y.T)
    return np.maximum(d, 0.0)


def _cross_term(X, Y, inv_two_sigma_sq, weight):
    """weight * sum_ij sum_b k_b(x_i, y_j) with gradients w.r.t. X and Y."""
    total = 0.0
    gX = np.zeros_like(X)
    gY = np.zeros_like(Y)
    for start in range(0, X.shape[0], KERNEL_BLOCK_ROWS):
        xb = X[start:start + KERNEL_BLOCK_ROWS]
        d2 = _sq_dists(xb, Y)
        G = np.zeros_like(d2)
        for c in inv_two_sigma_sq:
            K = np.exp(-c * d2)
            total += K.sum()
            G += (2.0 * c) * K
        G *= weight
        # d k(x, y) / dx = -k(x, y) (x - y) / sigma^2
        gX[start:start + KERNEL_BLOCK_ROWS] = -(G.sum(1)[:, None] * xb - G @ Y)
        gY -= G.sum(0)[:, None] * Y - G.T @ xb
    return weight * total, gX, gY


def median_bandwidth(H_s, H_t, sample_cap: int = 1000, seed: int = 0) -> float:
    """Median heuristic: sigma^2 = median squared pairwise distance of the pooled rows.

    Falls back to 1.0 (with a DegenerateBandwidthWarning) when the median is zero.
    """
    Z = np.concatenate([np.asarray(H_s, dtype=ACC), np.asarray(H_t, dtype=ACC)], axis=0)
    if Z.shape[0] < 2:
        raise ValueError("median_bandwidth needs at least two rows")
    if Z.shape[0] > sample_cap:
        rng = np.random.default_rng(seed)
        Z = Z[np.sort(rng.choice(Z.shape[0], size=sample_cap, replace=False))]
    iu = np.triu_indices(Z.shape[0], k=1)
    med = float(np.median(_sq_dists(Z, Z)[iu]))
    if not med > 0:
        warnings.warn("all sampled points coincide; using bandwidth 1.0",
                      DegenerateBandwidthWarning, stacklevel=2)
        return 1.0
    return float(np.sqrt(med))


def resolve_bandwidths(H_s, H_t, cfg: MmdConfig) -> tuple[float, ...]:
    if not cfg.auto:
        return cfg.bandwidths
    sigma = median_bandwidth(H_s, H_t, cfg.median_sample_cap, cfg.seed)
    return (sigma / 2.0, sigma, 2.0 * sigma)


def mmd_squared(H_s, H_t, cfg: MmdConfig | None = None):
    """Biased (V-statistic) squared MMD summed over Gaussian bandwidths.

    Returns ``(loss, grad_H_s, grad_H_t)``. With ``subsample_limit`` set, rows
    beyond the limit are dropped at random (seeded) and receive zero gradient.
    """
    cfg = cfg or MmdConfig()
    H_s = np.asarray(H_s)
    H_t = np.asarray(H_t)
    if H_s.ndim != 2 or H_t.ndim != 2 or H_s.shape[0] == 0 or H_t.shape[0] == 0:
        raise ValueError("mmd_squared needs two non-empty matrices")
    if H_s.shape[1] != H_t.shape[1]:
        raise ShapeError(f"column counts differ: {H_s.shape[1]} vs {H_t.shape[1]}")
    out_dtype = np.result_type(np.float32, H_s.dtype, H_t.dtype)
    idx_s, idx_t = np.arange(H_s.shape[0]), np.arange(H_t.shape[0])
    if cfg.subsample_limit is not None:
        rng = np.random.default_rng(cfg.seed)
        if len(idx_s) > cfg.subsample_limit:
            idx_s = np.sort(rng.choice(idx_s, cfg.subsample_limit, replace=False))
        if len(idx_t) > cfg.subsample_limit:
            idx_t = np.sort(rng.choice(idx_t, cfg.subsample_limit, replace=False))
    S = H_s[idx_s].astype(ACC)
    T = H_t[idx_t].astype(ACC)
    sigmas = resolve_bandwidths(S, T, cfg)
    coeffs = [1.0 / (2.0 * s * s) for s in sigmas]
    ns, nt = S.shape[0], T.shape[0]

    ss, gs1, gs2 = _cross_term(S, S, coeffs, 1.0 / ns ** 2)
    tt, gt1, gt2 = _cross_term(T, T, coeffs, 1.0 / nt ** 2)
    st, gs3, gt3 = _cross_term(S, T, coeffs, -2.0 / (ns * nt))
    loss = float(ss + tt + st)

    grad_s = np.zeros(H_s.shape, dtype=ACC)
    grad_t = np.zeros(H_t.shape, dtype=ACC)
    grad_s[idx_s] = gs1 + gs2 + gs3
    grad_t[idx_t] = gt1 + gt2 + gt3
    return loss, grad_s.astype(out_dtype), grad_t.astype(out_dtype)


# ---------------------------------------------------------------------------
# adversarial alignment


@dataclass
class DiscriminatorParams:
    hidden_weight: np.ndarray
    hidden_bias: np.ndarray
    out_weight: np.ndarray
    out_bias: np.ndarray

    def to_dict(self) -> dict[str, np.ndarray]:
        return {f"disc_{k}": v for k, v in vars(self).items()}

    @classmethod
    def from_dict(cls, d: dict) -> DiscriminatorParams:
        return cls(*(d[f"disc_{k}"] for k in ("hidden_weight", "hidden_bias", "out_weight",
                                              "out_bias")))

    def copy(self) -> DiscriminatorParams:
        return DiscriminatorParams(*(np.array(v, copy=True) for v in vars(self).values()))


def init_discriminator(hidden_dim: int, disc_hidden: int = 128, seed: int = 0) -> DiscriminatorParams:
    """Glorot hidden layer; zero output layer so every prediction starts at 0.5."""
    if disc_hidden < 1:
        raise ValueError("disc_hidden must be >= 1")
    rng = np.random.default_rng(seed)
    return DiscriminatorParams(glorot(rng, hidden_dim, disc_hidden),
                               np.zeros(disc_hidden, dtype=np.float32),
                               np.zeros((disc_hidden, 1), dtype=np.float32),
                               np.zeros(1, dtype=np.float32))


def discriminator_logits(disc: DiscriminatorParams, Z) -> np.ndarray:
    a = np.asarray(Z, dtype=ACC) @ disc.hidden_weight.astype(ACC) + disc.hidden_bias
    return (relu(a) @ disc.out_weight.astype(ACC) + disc.out_bias).ravel()


def adversarial_loss(H_s, H_t, disc: DiscriminatorParams, grl_scale: float = 1.0):
    """Binary domain-classification loss (source = 0, target = 1).

    Returns ``(loss, grad_disc, grad_H_s, grad_H_t)``. ``grad_disc`` is the
    true gradient for the discriminator; the representation gradients pass
    through gradient reversal and are multiplied by ``-grl_scale``.
    """
    H_s = np.asarray(H_s)
    H_t = np.asarray(H_t)
    if H_s.shape[0] == 0 or H_t.shape[0] == 0:
        raise ValueError("adversarial_loss needs rows from both domains")
    if H_s.shape[1] != H_t.shape[1]:
        raise ShapeError(f"column counts differ: {H_s.shape[1]} vs {H_t.shape[1]}")
    if grl_scale < 0:
        raise ValueError("grl_scale must be non-negative")
    ns = H_s.shape[0]
    Z = np.concatenate([H_s, H_t], axis=0).astype(ACC)
    n = Z.shape[0]
    d = np.concatenate([np.zeros(ns), np.ones(H_t.shape[0])])

    Wh, bh = disc.hidden_weight.astype(ACC), disc.hidden_bias.astype(ACC)
    Wo, bo = disc.out_weight.astype(ACC), disc.out_bias.astype(ACC)
    a = Z @ Wh + bh
    r = relu(a)
    s = (r @ Wo + bo).ravel()
    # BCE with logits: softplus(s) - d*s
    loss = float(np.mean(np.logaddexp(0.0, s) - d * s))

    ds = ((1.0 / (1.0 + np.exp(-s))) - d)[:, None] / n
    dr = ds @ Wo.T
    da = relu_backward(a, dr)
    dtype = np.result_type(np.float32, disc.hidden_weight.dtype)
    grad_disc = DiscriminatorParams((Z.T @ da).astype(dtype), da.sum(0).astype(dtype),
                                    (r.T @ ds).astype(dtype), ds.sum(0).astype(dtype))
    dZ = -grl_scale * (da @ Wh.T)
    out_dtype = np.result_type(np.float32, H_s.dtype, H_t.dtype)
    return loss, grad_disc, dZ[:ns].astype(out_dtype), dZ[ns:].astype(out_dtype)
