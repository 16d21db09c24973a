"""Encoder architectures, forward/backward passes and prediction.

Four families share one code path:

``a2gnn``      source H = relu(X W), target H = relu(P^k X W), one shared W
``p_stack_t``  [P]T: propagate k times, then ``num_layers`` transformations
``t_stack_p``  [T]P: ``num_layers`` transformations, propagation before the last activation
``pt_stack``   [PT]: ``num_layers`` GCN-style layers relu(P^k H W)

``a2gnn`` and ``p_stack_t`` consume pre-propagated features, so the sparse
products run once before training. ``pt_stack`` and ``t_stack_p`` interleave
propagation with learnable layers and carry the transition matrix instead.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .linalg import CsrMatrix, ShapeError, gemm, relu, relu_backward
from .transition import propagate, propagate_transpose

ARCHS = ("a2gnn", "p_stack_t", "t_stack_p", "pt_stack")
ARCH_ALIASES = {"pt": "pt_stack", "p-t": "p_stack_t", "t-p": "t_stack_p"}
PRECOMPUTED = ("a2gnn", "p_stack_t")


@dataclass(frozen=True)
class ModelSpec:
    arch: str = "a2gnn"
    num_layers: int = 1
    k: int = 5
    # None resolves to 0 for a2gnn and to k for the symmetric families
    source_prop_layers: int | None = None
    hidden_dim: int = 128
    num_classes: int = 2
    feat_dim: int = 1

    def __post_init__(self):
        arch = ARCH_ALIASES.get(self.arch, self.arch)
        if arch not in ARCHS:
            raise ValueError(f"unknown architecture {self.arch!r}")
        object.__setattr__(self, "arch", arch)
        if self.source_prop_layers is None:
            object.__setattr__(self, "source_prop_layers", 0 if arch == "a2gnn" else self.k)
        if self.hidden_dim < 1 or self.num_layers < 1 or self.num_classes < 1 or self.feat_dim < 1:
            raise ValueError("hidden_dim, num_layers, num_classes and feat_dim must be >= 1")
        if self.k < 0 or self.source_prop_layers < 0:
            raise ValueError("propagation counts must be non-negative")
        if arch == "a2gnn" and (self.source_prop_layers != 0 or self.num_layers != 1):
            raise ValueError("a2gnn has no source propagation and exactly one transformation")

    @property
    def precomputed(self) -> bool:
        return self.arch in PRECOMPUTED

    def branch_prop(self, branch: str) -> int:
        return self.source_prop_layers if branch == "source" else self.k

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ModelParams:
    encoder_weights: list[np.ndarray]
    classifier_weight: np.ndarray
    classifier_bias: np.ndarray

    def to_dict(self) -> dict[str, np.ndarray]:
        d = {f"encoder_{i}": w for i, w in enumerate(self.encoder_weights)}
        d["classifier_weight"] = self.classifier_weight
        d["classifier_bias"] = self.classifier_bias
        return d

    @classmethod
    def from_dict(cls, d: dict) -> ModelParams:
        n = sum(1 for key in d if key.startswith("encoder_"))
        return cls([d[f"encoder_{i}"] for i in range(n)], d["classifier_weight"],
                   d["classifier_bias"])

    def copy(self) -> ModelParams:
        return ModelParams([w.copy() for w in self.encoder_weights],
                           self.classifier_weight.copy(), self.classifier_bias.copy())

    def astype(self, dtype) -> ModelParams:
        return ModelParams([w.astype(dtype) for w in self.encoder_weights],
                           self.classifier_weight.astype(dtype), self.classifier_bias.astype(dtype))


@dataclass
class BranchInput:
    """Features for one branch plus, for interleaved families, the matrix to apply."""

    features: np.ndarray
    transition: CsrMatrix | None = None
    prop: int = 0


def glorot(rng, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out)).astype(np.float32)


def init_params(spec: ModelSpec, seed: int = 0) -> ModelParams:
    rng = np.random.default_rng(seed)
    dims = [spec.feat_dim] + [spec.hidden_dim] * spec.num_layers
    enc = [glorot(rng, a, b) for a, b in zip(dims[:-1], dims[1:])]
    wc = glorot(rng, spec.hidden_dim, spec.num_classes)
    return ModelParams(enc, wc, np.zeros(spec.num_classes, dtype=np.float32))


def prepare_input(spec: ModelSpec, branch: str, X, P: CsrMatrix | None,
                  precompute: bool = True) -> BranchInput:
    """Build a branch input, running the one-off propagation when the family allows it.

    ``precompute=False`` keeps the raw features and the matrix, so a2gnn and
    [P]T re-propagate on every forward call (a slow reference path).
    """
    k = spec.branch_prop(branch)
    X = np.asarray(X)
    if spec.precomputed and precompute:
        if k and P is None:
            raise ValueError(f"{branch} branch needs a transition matrix for k={k}")
        return BranchInput(propagate(P, X, k) if k else X, None, 0)
    if k and P is None:
        raise ValueError(f"{spec.arch} needs the transition matrix of the {branch} graph")
    return BranchInput(X, P, k)


def _as_input(x) -> BranchInput:
    return x if isinstance(x, BranchInput) else BranchInput(np.asarray(x))


def _encode(params: ModelParams, spec: ModelSpec, inp: BranchInput):
    h = inp.features
    if h.shape[1] != spec.feat_dim:
        raise ShapeError(f"features have {h.shape[1]} columns, model expects {spec.feat_dim}")
    P, k = inp.transition, inp.prop
    if spec.precomputed and P is not None and k:
        # reference path: propagate inside the forward pass instead of once up front
        h = propagate(P, h, k)
        k = 0
    layers = []
    L = len(params.encoder_weights)
    for l, W in enumerate(params.encoder_weights):
        if spec.arch == "pt_stack" and k:
            h = propagate(P, h, k)
        z = gemm(h, W)
        if spec.arch == "t_stack_p" and l == L - 1 and k:
            pre = propagate(P, z, k)
        else:
            pre = z
        layers.append((h, pre))
        h = relu(pre)
    return h, layers


def _encode_backward(params: ModelParams, spec: ModelSpec, inp: BranchInput, layers, dH,
                     grads: list[np.ndarray]) -> None:
    P, k = inp.transition, inp.prop
    if spec.precomputed:
        k = 0
    L = len(params.encoder_weights)
    for l in range(L - 1, -1, -1):
        layer_in, pre = layers[l]
        W = params.encoder_weights[l]
        d = relu_backward(pre, dH)
        if spec.arch == "t_stack_p" and l == L - 1 and k:
            d = propagate_transpose(P, d, k)
        grads[l] += gemm(layer_in, d, transpose_a=True)
        if l == 0:
            break
        dH = gemm(d, W, transpose_b=True)
        if spec.arch == "pt_stack" and k:
            dH = propagate_transpose(P, dH, k)


@dataclass
class ForwardCache:
    params: ModelParams
    spec: ModelSpec
    inputs: dict = field(default_factory=dict)
    layers: dict = field(default_factory=dict)
    reps: dict = field(default_factory=dict)


def forward(params: ModelParams, spec: ModelSpec, X_source_prop, X_target_prop):
    """Run both branches. Returns (H_s, H_t, logits_s, logits_t, cache)."""
    cache = ForwardCache(params, spec)
    out = {}
    for branch, x in (("source", X_source_prop), ("target", X_target_prop)):
        inp = _as_input(x)
        h, layers = _encode(params, spec, inp)
        logits = gemm(h, params.classifier_weight) + params.classifier_bias
        cache.inputs[branch], cache.layers[branch], cache.reps[branch] = inp, layers, h
        out[branch] = (h, logits.astype(h.dtype, copy=False))
    return out["source"][0], out["target"][0], out["source"][1], out["target"][1], cache


def backward(cache: ForwardCache, grad_logits_source, grad_H_source=None, grad_H_target=None,
             grad_logits_target=None) -> ModelParams:
    """Gradients of all parameters given upstream gradients of the forward outputs.

    The shared encoder weights collect contributions from both branches.
    """
    params, spec = cache.params, cache.spec
    dtype = np.result_type(params.classifier_weight.dtype, np.float32)
    enc = [np.zeros(w.shape, dtype=np.float64) for w in params.encoder_weights]
    dwc = np.zeros(params.classifier_weight.shape, dtype=np.float64)
    db = np.zeros(params.classifier_bias.shape, dtype=np.float64)
    upstream = {"source": (grad_logits_source, grad_H_source),
                "target": (grad_logits_target, grad_H_target)}
    for branch, (g_logits, g_h) in upstream.items():
        h = cache.reps[branch]
        dH = None
        if g_logits is not None:
            g_logits = np.asarray(g_logits)
            if g_logits.shape != (h.shape[0], params.classifier_weight.shape[1]):
                raise ShapeError(f"{branch} logits gradient has shape {g_logits.shape}")
            dwc += gemm(h, g_logits, transpose_a=True)
            db += g_logits.sum(axis=0, dtype=np.float64)
            dH = gemm(g_logits, params.classifier_weight, transpose_b=True).astype(np.float64)
        if g_h is not None:
            g_h = np.asarray(g_h)
            if g_h.shape != h.shape:
                raise ShapeError(f"{branch} representation gradient has shape {g_h.shape}, "
                                 f"expected {h.shape}")
            dH = g_h.astype(np.float64) if dH is None else dH + g_h
        if dH is None or not np.any(dH):
            continue
        _encode_backward(params, spec, cache.inputs[branch], cache.layers[branch], dH, enc)
    return ModelParams([g.astype(dtype) for g in enc], dwc.astype(dtype), db.astype(dtype))


def logits_for(params: ModelParams, spec: ModelSpec, X_prop) -> np.ndarray:
    h, _ = _encode(params, spec, _as_input(X_prop))
    return gemm(h, params.classifier_weight) + params.classifier_bias


def predict_from_logits(logits) -> np.ndarray:
    # argmax returns the first maximum, i.e. ties go to the lower class index
    return np.argmax(np.asarray(logits), axis=1)


def predict(params: ModelParams, spec: ModelSpec, X_prop) -> np.ndarray:
    return predict_from_logits(logits_for(params, spec, X_prop))


def with_spec(spec: ModelSpec, **changes) -> ModelSpec:
    if "k" in changes and "source_prop_layers" not in changes and spec.arch != "a2gnn":
        changes["source_prop_layers"] = None
    return replace(spec, **changes)
