"""Asymmetric propagation networks for unsupervised graph domain adaptation."""

__version__ = "0.1.0"

from .linalg import CsrMatrix, adam_step, gemm, relu, softmax_cross_entropy, spmm  # noqa: E402
from .data import (GraphDataset, ShiftConfig, generate_shifted_pair, load_bundle,  # noqa: E402
                   save_bundle, split_source)
from .transition import TransitionScheme, build_transition, propagate  # noqa: E402
from .model import ModelSpec, ModelParams, backward, forward, init_params, predict  # noqa: E402
from .alignment import (MmdConfig, adversarial_loss, init_discriminator,  # noqa: E402
                        median_bandwidth, mmd_squared)
from .metrics import confusion, macro_micro_f1  # noqa: E402
from .trainer import TrainConfig, TrainReport, evaluate, run_ablation, train  # noqa: E402
from .spectral import (bound_report, edge_perturbation, kf_bound, lemma2_check,  # noqa: E402
                       operator_norm, theorem1_sample_term)
