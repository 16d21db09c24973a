"""Command line entry point: ``a2gnn {train,ablate,analyze,gen-synth}``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .alignment import MmdConfig
from .data import BundleError, ShiftConfig, generate_shifted_pair, load_bundle, save_bundle
from .model import ARCH_ALIASES, ModelSpec
from .spectral import bound_report
from .trainer import PRESETS, TrainConfig, apply_delta, preset_grid, product_grid, run_ablation, train
from .transition import TransitionScheme

log = logging.getLogger("a2gnn")

ARCH_CHOICES = ("a2gnn", "pt", "p-t", "t-p")
SCHEME_CHOICES = ("sym", "no-loop", "rw", "diff")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _seeds(text: str) -> tuple[int, ...]:
    try:
        seeds = tuple(int(s) for s in text.split(",") if s.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed list {text!r}") from None
    if not seeds:
        raise argparse.ArgumentTypeError("empty seed list")
    return seeds


def _bandwidths(text: str):
    if text == "auto":
        return None
    try:
        values = tuple(float(s) for s in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'auto' or a float list, got {text!r}") from None
    if not values or any(not v > 0 for v in values):
        raise argparse.ArgumentTypeError("bandwidths must be positive")
    return values


def _nonneg_float(text: str) -> float:
    v = float(text)
    if not v >= 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative number, got {text}")
    return v


def _pos_float(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return v


def _nonneg_int(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text}")
    return v


def _pos_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _add_data_args(p):
    p.add_argument("--source", required=True, type=Path, help="source bundle directory")
    p.add_argument("--target", required=True, type=Path, help="target bundle directory")


def _add_scheme_args(p):
    p.add_argument("--scheme", choices=SCHEME_CHOICES, default="sym")
    p.add_argument("--diff-p", type=_pos_int, default=10, help="diffusion truncation order")


def _add_train_args(p):
    _add_data_args(p)
    p.add_argument("--arch", choices=ARCH_CHOICES, default="a2gnn")
    p.add_argument("--k", type=_nonneg_int, default=5, help="target propagation count")
    p.add_argument("--source-prop", type=_nonneg_int, default=None,
                   help="source propagation count (default: 0 for a2gnn, k otherwise)")
    p.add_argument("--layers", type=_pos_int, default=1, help="transformation layers")
    p.add_argument("--hidden", type=_pos_int, default=128)
    p.add_argument("--align", choices=("mmd", "adv", "none"), default="mmd")
    p.add_argument("--alpha", type=_nonneg_float, default=1.0)
    p.add_argument("--lr", type=_pos_float, default=0.005)
    p.add_argument("--wd", type=_nonneg_float, default=0.001)
    p.add_argument("--epochs", type=_pos_int, default=300)
    p.add_argument("--seeds", type=_seeds, default=(0, 1, 2, 3, 4))
    p.add_argument("--patience", type=_pos_int, default=None)
    p.add_argument("--mmd-bandwidth", type=_bandwidths, default=None, metavar="auto|F[,F...]")
    p.add_argument("--mmd-subsample", type=_pos_int, default=None)
    p.add_argument("--grl-scale", type=_nonneg_float, default=1.0)
    p.add_argument("--disc-hidden", type=_pos_int, default=128)
    _add_scheme_args(p)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="a2gnn", description=__doc__)
    parser.add_argument("--version", action="version", version=f"a2gnn {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train on a source/target bundle pair")
    _add_train_args(p)
    p.add_argument("--out", type=Path, required=True, help="report JSON path")
    p.add_argument("--log", type=Path, default=None, help="per-epoch JSON-lines log")

    p = sub.add_parser("ablate", help="train every point of an ablation grid")
    _add_train_args(p)
    p.add_argument("--preset", choices=PRESETS, default=None)
    p.add_argument("--vary", action="append", default=[], metavar="FIELD=V1,V2",
                   help="grid axis; repeat for a cartesian product")
    p.add_argument("--out", type=Path, required=True, help="table JSON path")
    p.add_argument("--csv", type=Path, default=None, help="optional tidy CSV table")

    p = sub.add_parser("analyze", help="evaluate the bound quantities for a graph pair")
    _add_data_args(p)
    _add_scheme_args(p)
    p.add_argument("--k", type=_nonneg_int, default=5)
    p.add_argument("--source-prop", type=_nonneg_int, default=0)
    p.add_argument("--layers", type=_pos_int, default=1)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--d-vc", type=_pos_int, default=1)
    p.add_argument("--k-lambda", type=_nonneg_float, default=1.0)
    p.add_argument("--tau", type=_nonneg_float, default=1.0)
    p.add_argument("--epsilon", type=_nonneg_float, default=1.0)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("gen-synth", help="write a synthetic covariate-shift bundle pair")
    p.add_argument("--nodes", type=_pos_int, default=200, help="nodes per domain")
    p.add_argument("--classes", type=_pos_int, default=2)
    p.add_argument("--feat-dim", type=_pos_int, default=ShiftConfig.feat_dim)
    p.add_argument("--p-in", type=float, default=ShiftConfig.intra_edge_prob)
    p.add_argument("--p-out", type=float, default=ShiftConfig.inter_edge_prob)
    p.add_argument("--shift", type=_nonneg_float, default=1.5)
    p.add_argument("--separation", type=_nonneg_float, default=ShiftConfig.class_separation)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-src", type=Path, required=True)
    p.add_argument("--out-tgt", type=Path, required=True)
    return parser


def _config_from_args(args, feat_dim: int, num_classes: int) -> TrainConfig:
    arch = ARCH_ALIASES.get(args.arch, args.arch)
    source_prop = args.source_prop
    if arch == "a2gnn" and source_prop not in (None, 0):
        raise UsageError("a2gnn has no source propagation; use --arch p-t --layers 1 "
                         "to vary --source-prop")
    spec = ModelSpec(arch=arch, num_layers=args.layers, k=args.k, source_prop_layers=source_prop,
                     hidden_dim=args.hidden, num_classes=num_classes, feat_dim=feat_dim)
    return TrainConfig(spec=spec, align=args.align, alpha=args.alpha, lr=args.lr,
                       weight_decay=args.wd, epochs=args.epochs, seeds=args.seeds,
                       scheme=TransitionScheme(args.scheme, args.diff_p), patience=args.patience,
                       mmd=MmdConfig(args.mmd_bandwidth, args.mmd_subsample),
                       grl_scale=args.grl_scale, disc_hidden=args.disc_hidden)


def _invocation(args) -> dict:
    out = {}
    for key, value in sorted(vars(args).items()):
        if isinstance(value, Path):
            value = str(value)
        elif isinstance(value, tuple):
            value = list(value)
        out[key] = value
    return out


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _timestamp() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _cmd_train(args) -> int:
    source, target = load_bundle(args.source), load_bundle(args.target)
    cfg = _config_from_args(args, source.feat_dim, source.num_classes)
    log_file = None
    if args.log is not None:
        args.log.parent.mkdir(parents=True, exist_ok=True)
        log_file = args.log.open("w", encoding="utf-8")

    def on_epoch(record):
        if log_file is not None:
            log_file.write(json.dumps(record, sort_keys=True) + "\n")

    try:
        report = train(cfg, source, target, on_epoch=on_epoch)
    finally:
        if log_file is not None:
            log_file.close()
    payload = report.to_dict()
    payload["invocation"] = _invocation(args)
    payload["timestamp"] = _timestamp()
    _write_json(args.out, payload)
    s = report.summary()
    print(f"target macro-F1 {100 * s['macro_f1_mean']:.2f} +/- {100 * s['macro_f1_std']:.2f}, "
          f"micro-F1 {100 * s['micro_f1_mean']:.2f} +/- {100 * s['micro_f1_std']:.2f}")
    return 0


def _parse_axis(text: str) -> tuple[str, list]:
    if "=" not in text:
        raise UsageError(f"--vary expects FIELD=V1,V2, got {text!r}")
    key, values = text.split("=", 1)
    key = key.strip().replace("-", "_")
    parsed = []
    for v in values.split(","):
        v = v.strip()
        for conv in (int, float):
            try:
                parsed.append(conv(v))
                break
            except ValueError:
                continue
        else:
            parsed.append(ARCH_ALIASES.get(v, v))
    return key, parsed


def _cmd_ablate(args) -> int:
    source, target = load_bundle(args.source), load_bundle(args.target)
    base = _config_from_args(args, source.feat_dim, source.num_classes)
    grid = preset_grid(args.preset, args.k) if args.preset else []
    if args.vary:
        axes = dict(_parse_axis(v) for v in args.vary)
        extra = product_grid(**axes)
        grid = [{**g, **e} for g in grid for e in extra] if grid else extra
    if not grid:
        raise UsageError("ablate needs --preset or at least one --vary axis")
    try:
        for point in grid:
            apply_delta(base, point)
    except (KeyError, ValueError) as exc:
        raise UsageError(f"invalid grid: {exc}") from None
    rows = run_ablation(base, grid, source, target)
    table = [{"point": r["point"], "macro_f1_mean": r["macro_f1_mean"],
              "macro_f1_std": r["macro_f1_std"], "micro_f1_mean": r["micro_f1_mean"],
              "micro_f1_std": r["micro_f1_std"], "report": r["report"].to_dict()} for r in rows]
    payload = {"version": __version__, "base_config": base.to_dict(), "table": table,
               "invocation": _invocation(args), "timestamp": _timestamp()}
    _write_json(args.out, payload)
    if args.csv is not None:
        keys = sorted({k for r in rows for k in r["point"]})
        args.csv.parent.mkdir(parents=True, exist_ok=True)
        with args.csv.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(keys + ["macro_f1_mean", "macro_f1_std", "micro_f1_mean", "micro_f1_std"])
            for r in rows:
                w.writerow([r["point"].get(k, "") for k in keys]
                           + [r["macro_f1_mean"], r["macro_f1_std"], r["micro_f1_mean"],
                              r["micro_f1_std"]])
    for r in rows:
        print(f"{json.dumps(r['point'], sort_keys=True)}: macro-F1 {100 * r['macro_f1_mean']:.2f}")
    return 0


def _cmd_analyze(args) -> int:
    if not 0 < args.delta <= 1:
        raise UsageError("--delta must lie in (0, 1]")
    source, target = load_bundle(args.source), load_bundle(args.target)
    report = bound_report(source, target, TransitionScheme(args.scheme, args.diff_p), k=args.k,
                          delta=args.delta, d_vc=args.d_vc, source_prop=args.source_prop,
                          num_layers=args.layers, k_lambda=args.k_lambda, tau=args.tau,
                          epsilon=args.epsilon)
    payload = {"version": __version__, "bounds": report.to_dict(),
               "invocation": _invocation(args), "timestamp": _timestamp()}
    _write_json(args.out, payload)
    print(f"sigma_max(P^k) {report.sigma_max_Pk:.6f}, EP {report.ep:.4f}, EP' {report.ep_prime:.4f}, "
          f"K_f {report.k_f:.4f}")
    return 0


def _cmd_gen_synth(args) -> int:
    cfg = ShiftConfig(nodes_per_domain=args.nodes, num_classes=args.classes,
                      feat_dim=args.feat_dim, intra_edge_prob=args.p_in,
                      inter_edge_prob=args.p_out, feature_shift_magnitude=args.shift,
                      seed=args.seed, class_separation=args.separation)
    try:
        cfg.validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    source, target = generate_shifted_pair(cfg)
    save_bundle(source, args.out_src)
    save_bundle(target, args.out_tgt)
    print(f"wrote {args.out_src} and {args.out_tgt}")
    return 0


COMMANDS = {"train": _cmd_train, "ablate": _cmd_ablate, "analyze": _cmd_analyze,
            "gen-synth": _cmd_gen_synth}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except (BundleError, OSError, FloatingPointError, ValueError) as exc:
        print(f"a2gnn: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
