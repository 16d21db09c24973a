"""Training loop for L = L_cls + alpha * L_align, the seed protocol and ablation grids."""

from __future__ import annotations

import itertools
import json
import logging
import warnings
from dataclasses import asdict, dataclass, field, replace
from typing import Callable

import numpy as np

from . import __version__
from .alignment import (DegenerateBandwidthWarning, DiscriminatorParams, MmdConfig,
                        adversarial_loss, init_discriminator, mmd_squared)
from .data import GraphDataset, split_source
from .linalg import AdamState, CsrMatrix, adam_step, softmax_cross_entropy
from .metrics import f1_scores
from .model import (ModelParams, ModelSpec, backward, forward, init_params, logits_for,
                    predict_from_logits, prepare_input)
from .transition import DIFF_DROP_TOL, TransitionScheme, build_transition

log = logging.getLogger(__name__)

ALIGNS = ("mmd", "adv", "none")


class TrainingDivergedError(FloatingPointError):
    def __init__(self, epoch: int, seed: int):
        super().__init__(f"non-finite loss at epoch {epoch} (seed {seed})")
        self.epoch = epoch
        self.seed = seed


@dataclass(frozen=True)
class TrainConfig:
    spec: ModelSpec = field(default_factory=ModelSpec)
    align: str = "mmd"
    alpha: float = 1.0
    lr: float = 0.005
    weight_decay: float = 0.001
    epochs: int = 300
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    scheme: TransitionScheme = field(default_factory=TransitionScheme)
    patience: int | None = None
    mmd: MmdConfig = field(default_factory=MmdConfig)
    grl_scale: float = 1.0
    disc_hidden: int = 128
    train_fraction: float = 0.8

    def __post_init__(self):
        if self.align not in ALIGNS:
            raise ValueError(f"align must be one of {ALIGNS}")
        if not self.alpha >= 0:
            raise ValueError("alpha must be non-negative")
        if not self.lr > 0:
            raise ValueError("lr must be positive")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be non-negative")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if self.grl_scale < 0:
            raise ValueError("grl_scale must be non-negative")
        if self.patience is not None and self.patience < 1:
            raise ValueError("patience must be >= 1")
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["mmd"]["bandwidths"] = ("auto" if self.mmd.bandwidths is None
                                  else list(self.mmd.bandwidths))
        d["seeds"] = list(self.seeds)
        d["scheme"]["diff_drop_tol"] = DIFF_DROP_TOL
        return d


@dataclass
class LossBreakdown:
    l_cls: float
    l_align: float
    total: float


@dataclass
class SeedResult:
    seed: int
    epochs: list[dict]
    best_epoch: int
    best_val_macro_f1: float
    target_macro_f1: float
    target_micro_f1: float
    degenerate_bandwidth_epochs: int = 0
    params: ModelParams | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        d = {k: v for k, v in vars(self).items() if k != "params"}
        return d


@dataclass
class TrainReport:
    config: dict
    runs: list[SeedResult]
    version: str = __version__

    @property
    def macro_f1(self) -> np.ndarray:
        return np.array([r.target_macro_f1 for r in self.runs])

    @property
    def micro_f1(self) -> np.ndarray:
        return np.array([r.target_micro_f1 for r in self.runs])

    def summary(self) -> dict:
        return {"macro_f1_mean": float(self.macro_f1.mean()),
                "macro_f1_std": float(self.macro_f1.std()),
                "micro_f1_mean": float(self.micro_f1.mean()),
                "micro_f1_std": float(self.micro_f1.std())}

    def to_dict(self) -> dict:
        return {"version": self.version, "config": self.config,
                "runs": [r.to_dict() for r in self.runs], "summary": self.summary()}

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kwargs)


@dataclass
class Metrics:
    macro_f1: float
    micro_f1: float


def evaluate(params: ModelParams, spec: ModelSpec, target: GraphDataset,
             P_target: CsrMatrix | None) -> Metrics:
    """Macro/Micro-F1 of the target-branch predictions over labeled target nodes."""
    mask = target.labeled_mask
    if not mask.any():
        raise ValueError("target graph has no labeled nodes to evaluate")
    inp = prepare_input(spec, "target", target.features, P_target)
    pred = predict_from_logits(logits_for(params, spec, inp))
    return Metrics(*f1_scores(pred[mask], target.labels[mask], target.num_classes))


def _check_pair(spec: ModelSpec, source: GraphDataset, target: GraphDataset) -> None:
    if source.feat_dim != target.feat_dim:
        raise ValueError(f"feature dimensions differ: {source.feat_dim} vs {target.feat_dim}")
    if spec.feat_dim != source.feat_dim:
        raise ValueError(f"model expects {spec.feat_dim} features, data has {source.feat_dim}")
    if source.num_classes != target.num_classes or spec.num_classes != source.num_classes:
        raise ValueError("class counts disagree between model, source and target")
    if not source.labeled_mask.any():
        raise ValueError("source graph has no labels")


def _alignment(cfg: TrainConfig, H_s, H_t, disc, seed: int, epoch: int):
    if cfg.align == "mmd":
        mcfg = replace(cfg.mmd, seed=cfg.mmd.seed + 1_000_003 * seed + epoch)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", DegenerateBandwidthWarning)
            loss, gs, gt = mmd_squared(H_s, H_t, mcfg)
        degenerate = any(issubclass(w.category, DegenerateBandwidthWarning) for w in caught)
        return loss, gs, gt, None, degenerate
    if cfg.align == "adv":
        loss, gdisc, gs, gt = adversarial_loss(H_s, H_t, disc, cfg.grl_scale)
        return loss, gs, gt, gdisc, False
    return 0.0, None, None, None, False


def train_seed(cfg: TrainConfig, source: GraphDataset, target: GraphDataset, seed: int,
               transitions: tuple[CsrMatrix, CsrMatrix] | None = None,
               precompute: bool = True,
               on_epoch: Callable[[dict], None] | None = None) -> SeedResult:
    spec = cfg.spec
    _check_pair(spec, source, target)
    if transitions is None:
        transitions = (build_transition(source.adjacency, cfg.scheme),
                       build_transition(target.adjacency, cfg.scheme))
    P_s, P_t = transitions
    x_s = prepare_input(spec, "source", source.features, P_s, precompute)
    x_t = prepare_input(spec, "target", target.features, P_t, precompute)
    split = split_source(source, cfg.train_fraction, seed)
    y = np.where(source.labeled_mask, source.labels, 0)

    params = init_params(spec, seed)
    disc = init_discriminator(spec.hidden_dim, cfg.disc_hidden, seed + 7919) if cfg.align == "adv" else None
    state = AdamState()
    best = (-1.0, -1, None)
    history = []
    degenerate_epochs = 0
    since_best = 0
    for epoch in range(cfg.epochs):
        H_s, H_t, logits_s, _, cache = forward(params, spec, x_s, x_t)
        l_cls, g_logits = softmax_cross_entropy(logits_s, y, split.train_mask)
        l_align, g_s, g_t, g_disc, degenerate = _alignment(cfg, H_s, H_t, disc, seed, epoch)
        degenerate_epochs += degenerate
        total = l_cls + cfg.alpha * l_align
        if not np.isfinite(total):
            raise TrainingDivergedError(epoch, seed)

        # validation score of the parameters that produced this forward pass
        pred = predict_from_logits(logits_s)
        val_macro, val_micro = f1_scores(pred[split.val_mask], source.labels[split.val_mask],
                                         source.num_classes)
        record = {"epoch": epoch, "l_cls": l_cls, "l_align": l_align, "total": total,
                  "val_macro_f1": val_macro, "val_micro_f1": val_micro}
        history.append(record)
        if on_epoch is not None:
            on_epoch({"seed": seed, **record})
        # ties move the selection to the later epoch; only strict gains reset patience
        improved = val_macro > best[0]
        if val_macro >= best[0]:
            best = (val_macro, epoch, params.copy())
        since_best = 0 if improved else since_best + 1
        if cfg.patience is not None and since_best >= cfg.patience:
            break

        a = cfg.alpha
        grads = backward(cache, g_logits,
                         None if g_s is None else a * g_s,
                         None if g_t is None else a * g_t)
        flat_params = params.to_dict()
        flat_grads = grads.to_dict()
        if disc is not None:
            flat_params.update(disc.to_dict())
            flat_grads.update({k: a * v for k, v in g_disc.to_dict().items()})
        flat_params, state = adam_step(flat_params, flat_grads, state, lr=cfg.lr,
                                       weight_decay=cfg.weight_decay)
        params = ModelParams.from_dict(flat_params)
        if disc is not None:
            disc = DiscriminatorParams.from_dict(flat_params)

    best_val, best_epoch, best_params = best
    metrics = evaluate(best_params, spec, target, P_t)
    log.info("seed %d: best epoch %d (val macro-F1 %.4f), target macro-F1 %.4f",
             seed, best_epoch, best_val, metrics.macro_f1)
    return SeedResult(seed, history, best_epoch, best_val, metrics.macro_f1, metrics.micro_f1,
                      degenerate_epochs, best_params)


def train(cfg: TrainConfig, source: GraphDataset, target: GraphDataset,
          on_epoch: Callable[[dict], None] | None = None, precompute: bool = True) -> TrainReport:
    """Train once per seed in ``cfg.seeds`` and collect target Macro/Micro-F1."""
    _check_pair(cfg.spec, source, target)
    transitions = (build_transition(source.adjacency, cfg.scheme),
                   build_transition(target.adjacency, cfg.scheme))
    runs = [train_seed(cfg, source, target, s, transitions, precompute, on_epoch)
            for s in cfg.seeds]
    return TrainReport(cfg.to_dict(), runs)


# ---------------------------------------------------------------------------
# ablations

SPEC_KEYS = {"arch": "arch", "k": "k", "source_prop": "source_prop_layers",
             "layers": "num_layers", "hidden": "hidden_dim"}


def apply_delta(cfg: TrainConfig, delta: dict) -> TrainConfig:
    """Return ``cfg`` with the grid-point overrides in ``delta`` applied.

    Recognised keys: arch, k, source_prop, layers, hidden, align, alpha, lr,
    weight_decay, epochs, scheme, diff_p, grl_scale.
    """
    spec_changes, cfg_changes = {}, {}
    scheme = cfg.scheme
    for key, value in delta.items():
        if key in SPEC_KEYS:
            spec_changes[SPEC_KEYS[key]] = value
        elif key == "scheme":
            scheme = TransitionScheme(value, scheme.diffusion_truncation)
        elif key == "diff_p":
            scheme = TransitionScheme(scheme.kind, int(value))
        elif key in ("align", "alpha", "lr", "weight_decay", "epochs", "grl_scale"):
            cfg_changes[key] = value
        else:
            raise KeyError(f"unknown ablation field {key!r}")
    spec = cfg.spec
    if spec_changes:
        arch = spec_changes.get("arch", spec.arch)
        if "source_prop_layers" not in spec_changes:
            spec_changes["source_prop_layers"] = None if arch != spec.arch or "k" in spec_changes \
                else spec.source_prop_layers
            if arch == "a2gnn":
                spec_changes["source_prop_layers"] = 0
        spec = replace(spec, **spec_changes)
    return replace(cfg, spec=spec, scheme=scheme, **cfg_changes)


def run_ablation(base: TrainConfig, grid: list[dict], source: GraphDataset,
                 target: GraphDataset) -> list[dict]:
    """One TrainReport per grid point, in grid order."""
    if not grid:
        raise ValueError("ablation grid is empty")
    rows = []
    for delta in grid:
        report = train(apply_delta(base, delta), source, target)
        rows.append({"point": dict(delta), "report": report, **report.summary()})
    return rows


def product_grid(**axes) -> list[dict]:
    keys = list(axes)
    return [dict(zip(keys, values)) for values in itertools.product(*axes.values())]


def preset_grid(name: str, k: int = 5) -> list[dict]:
    """Standard ablation grids, keyed by a short name."""
    if name == "propagation-location":
        return [{"arch": "p_stack_t", "layers": 1, "source_prop": s, "k": t}
                for s in (0, k) for t in (0, k)]
    if name == "k-sensitivity":
        return [{"arch": "a2gnn", "k": kk} for kk in (0, 1, 3, 5, 10)]
    if name == "alpha-sensitivity":
        return [{"alpha": a} for a in (0.0, 0.1, 0.5, 1.0, 2.0)]
    if name == "transition":
        return [{"scheme": s} for s in ("sym", "no_loop", "rw", "diff")]
    if name == "modules":
        return [{"arch": "a2gnn", "k": 0, "align": "none"},
                {"arch": "a2gnn", "k": 0, "align": "mmd"},
                {"arch": "p_stack_t", "layers": 1, "k": k, "source_prop": k, "align": "mmd"},
                {"arch": "a2gnn", "k": k, "align": "mmd"}]
    if name == "architectures":
        return [{"arch": a, "layers": layers, "k": k}
                for a in ("pt_stack", "p_stack_t", "t_stack_p") for layers in (1, 2)]
    raise KeyError(f"unknown preset {name!r}")


PRESETS = ("propagation-location", "k-sensitivity", "alpha-sensitivity", "transition",
           "modules", "architectures")
