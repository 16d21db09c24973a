"""Graph datasets, the on-disk bundle format, source splits and a synthetic
covariate-shift generator."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .linalg import CsrMatrix

UNLABELED = -1


class BundleError(ValueError):
    """A bundle directory is missing a file or contains malformed data."""


class MissingFileError(BundleError, FileNotFoundError):
    pass


class MalformedLineError(BundleError):
    pass


class IndexRangeError(BundleError):
    pass


class FeatureSizeError(BundleError):
    pass


@dataclass(eq=False)
class GraphDataset:
    name: str
    adjacency: CsrMatrix
    features: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        self.features = np.ascontiguousarray(self.features, dtype=np.float32)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        n = self.adjacency.rows
        if self.adjacency.cols != n:
            raise ValueError("adjacency must be square")
        if self.features.ndim != 2 or self.features.shape[0] != n:
            raise ValueError(f"features must have {n} rows, got shape {self.features.shape}")
        if self.labels.shape != (n,):
            raise ValueError(f"labels must have length {n}")
        bad = (self.labels != UNLABELED) & ((self.labels < 0) | (self.labels >= self.num_classes))
        if np.any(bad):
            raise ValueError(f"labels must lie in [0, {self.num_classes}) or be {UNLABELED}")
        if np.any(self.adjacency.diagonal() != 0):
            raise ValueError("stored adjacency must have a zero diagonal")
        if not self.adjacency.is_symmetric():
            raise ValueError("adjacency must be symmetric")

    @property
    def num_nodes(self) -> int:
        return self.adjacency.rows

    @property
    def feat_dim(self) -> int:
        return self.features.shape[1]

    @property
    def labeled_mask(self) -> np.ndarray:
        return self.labels != UNLABELED

    @property
    def num_edges(self) -> int:
        return self.adjacency.nnz // 2

    def undirected_edges(self) -> np.ndarray:
        r = self.adjacency.row_ids()
        c = self.adjacency.col_indices
        keep = r < c
        return np.stack([r[keep], c[keep]], axis=1)

    def __eq__(self, other) -> bool:
        if not isinstance(other, GraphDataset):
            return NotImplemented
        return (self.adjacency == other.adjacency
                and self.num_classes == other.num_classes
                and np.array_equal(self.features, other.features)
                and np.array_equal(self.labels, other.labels))


def adjacency_from_edges(n: int, edges) -> CsrMatrix:
    """Symmetric binary adjacency from an undirected edge list (deduplicated)."""
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if np.any(e[:, 0] == e[:, 1]):
        raise ValueError("self-loops are not allowed in the stored adjacency")
    r = np.concatenate([e[:, 0], e[:, 1]])
    c = np.concatenate([e[:, 1], e[:, 0]])
    return CsrMatrix.from_coo(n, n, r, c, sum_duplicates=False)


# ---------------------------------------------------------------------------
# bundle format


def _read_text(path: Path) -> str:
    if not path.is_file():
        raise MissingFileError(f"{path}: missing bundle file")
    try:
        return path.read_text(encoding="ascii" if path.suffix != ".json" else "utf-8")
    except UnicodeDecodeError as exc:
        raise MalformedLineError(f"{path}: not valid text ({exc})") from None


def load_bundle(path, name: str | None = None) -> GraphDataset:
    path = Path(path)
    meta_path = path / "meta.json"
    try:
        meta = json.loads(_read_text(meta_path))
        n, d, c = int(meta["num_nodes"]), int(meta["feat_dim"]), int(meta["num_classes"])
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, BundleError):
            raise
        raise MalformedLineError(f"{meta_path}: invalid metadata ({exc})") from None
    if n < 0 or d < 0 or c < 1:
        raise MalformedLineError(f"{meta_path}: invalid sizes n={n}, d={d}, classes={c}")

    edges_path = path / "edges.tsv"
    text = _read_text(edges_path)
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    edges = np.empty((len(lines), 2), dtype=np.int64)
    for i, line in enumerate(lines, start=1):
        parts = line.split("\t")
        if len(parts) != 2 or not all(p.isdigit() for p in parts):
            raise MalformedLineError(f"{edges_path}:{i}: expected 'u<TAB>v', got {line!r}")
        u, v = int(parts[0]), int(parts[1])
        if u >= n or v >= n:
            raise IndexRangeError(f"{edges_path}:{i}: node index out of range [0, {n})")
        if u == v:
            raise MalformedLineError(f"{edges_path}:{i}: self-loop {u}-{v} not allowed")
        edges[i - 1] = (u, v)

    feat_path = path / "features.f32"
    if not feat_path.is_file():
        raise MissingFileError(f"{feat_path}: missing bundle file")
    raw = feat_path.read_bytes()
    expected = n * d * 4
    if len(raw) != expected:
        raise FeatureSizeError(f"{feat_path}: expected {expected} bytes (n*d*4 = {n}*{d}*4), "
                               f"found {len(raw)}")
    features = np.frombuffer(raw, dtype="<f4").astype(np.float32).reshape(n, d)

    labels_path = path / "labels.txt"
    lab_lines = _read_text(labels_path).split("\n")
    if lab_lines and lab_lines[-1] == "":
        lab_lines.pop()
    if len(lab_lines) != n:
        raise MalformedLineError(f"{labels_path}: expected {n} lines, found {len(lab_lines)}")
    labels = np.empty(n, dtype=np.int64)
    for i, line in enumerate(lab_lines, start=1):
        try:
            y = int(line.strip())
        except ValueError:
            raise MalformedLineError(f"{labels_path}:{i}: not an integer: {line!r}") from None
        if y != UNLABELED and not 0 <= y < c:
            raise IndexRangeError(f"{labels_path}:{i}: label {y} outside [0, {c}) and not -1")
        labels[i - 1] = y

    return GraphDataset(name or path.name, adjacency_from_edges(n, edges), features, labels, c)


def save_bundle(dataset: GraphDataset, path) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    meta = {"num_nodes": dataset.num_nodes, "feat_dim": dataset.feat_dim,
            "num_classes": dataset.num_classes}
    (path / "meta.json").write_text(json.dumps(meta, sort_keys=True) + "\n", encoding="utf-8")
    edges = dataset.undirected_edges()
    (path / "edges.tsv").write_text("".join(f"{u}\t{v}\n" for u, v in edges), encoding="ascii")
    (path / "features.f32").write_bytes(dataset.features.astype("<f4").tobytes(order="C"))
    (path / "labels.txt").write_text("".join(f"{y}\n" for y in dataset.labels), encoding="ascii")


# ---------------------------------------------------------------------------
# synthetic covariate-shift pairs


@dataclass(frozen=True)
class ShiftConfig:
    nodes_per_domain: int = 200
    num_classes: int = 2
    feat_dim: int = 16
    intra_edge_prob: float = 0.05
    inter_edge_prob: float = 0.005
    feature_shift_magnitude: float = 1.5
    seed: int = 0
    # distance of each class mean from the origin; noise is unit-variance
    class_separation: float = 1.0

    def validate(self) -> None:
        if self.nodes_per_domain < 1 or self.num_classes < 1 or self.feat_dim < 1:
            raise ValueError("nodes_per_domain, num_classes and feat_dim must be positive")
        for p in (self.intra_edge_prob, self.inter_edge_prob):
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"edge probability {p} outside [0, 1]")
        if self.num_classes > 1 and not self.intra_edge_prob > self.inter_edge_prob:
            raise ValueError("intra_edge_prob must exceed inter_edge_prob")
        if self.feature_shift_magnitude < 0:
            raise ValueError("feature_shift_magnitude must be non-negative")


def _sbm_edges(labels: np.ndarray, p_in: float, p_out: float, rng) -> np.ndarray:
    n = len(labels)
    iu, ju = np.triu_indices(n, k=1)
    prob = np.where(labels[iu] == labels[ju], p_in, p_out)
    keep = rng.random(len(iu)) < prob
    return np.stack([iu[keep], ju[keep]], axis=1)


def _balanced_labels(n: int, c: int, rng) -> np.ndarray:
    return rng.permutation(np.arange(n) % c)


def generate_shifted_pair(cfg: ShiftConfig) -> tuple[GraphDataset, GraphDataset]:
    """Two homophilous SBM graphs whose class-conditional Gaussian features
    differ by a translation of ``feature_shift_magnitude`` along one random
    unit direction. Both graphs are fully labeled; the target labels are meant
    for evaluation only."""
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    n, c, d = cfg.nodes_per_domain, cfg.num_classes, cfg.feat_dim
    means = rng.standard_normal((c, d))
    means *= cfg.class_separation / np.linalg.norm(means, axis=1, keepdims=True)
    direction = rng.standard_normal(d)
    direction /= np.linalg.norm(direction)
    shift = cfg.feature_shift_magnitude * direction

    out = []
    for name, offset in (("source", np.zeros(d)), ("target", shift)):
        labels = _balanced_labels(n, c, rng)
        edges = _sbm_edges(labels, cfg.intra_edge_prob, cfg.inter_edge_prob, rng)
        x = means[labels] + offset + rng.standard_normal((n, d))
        out.append(GraphDataset(name, adjacency_from_edges(n, edges), x.astype(np.float32),
                                labels, c))
    return out[0], out[1]


# ---------------------------------------------------------------------------
# splits


@dataclass
class SplitMasks:
    train_mask: np.ndarray
    val_mask: np.ndarray
    stratified: bool = True


def split_source(dataset: GraphDataset, train_fraction: float = 0.8, seed: int = 0) -> SplitMasks:
    """Stratified train/validation split of the labeled nodes.

    Each class contributes ``round(fraction * count)`` training nodes, clipped
    so that every class with at least two nodes keeps one node on each side.
    When some class has fewer than two labeled nodes the split falls back to a
    global random split and ``stratified`` is False.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie strictly between 0 and 1")
    labels = dataset.labels
    labeled = np.flatnonzero(labels != UNLABELED)
    if len(labeled) < 2:
        raise ValueError("need at least two labeled nodes to split")
    rng = np.random.default_rng(seed)
    n = dataset.num_nodes
    train = np.zeros(n, dtype=bool)
    classes, counts = np.unique(labels[labeled], return_counts=True)
    if np.all(counts >= 2):
        for cls, cnt in zip(classes, counts):
            idx = rng.permutation(labeled[labels[labeled] == cls])
            k = min(max(int(round(train_fraction * cnt)), 1), cnt - 1)
            train[idx[:k]] = True
        stratified = True
    else:
        warnings.warn("a class has fewer than two labeled nodes; using a global split",
                      stacklevel=2)
        idx = rng.permutation(labeled)
        k = min(max(int(round(train_fraction * len(idx))), 1), len(idx) - 1)
        train[idx[:k]] = True
        stratified = False
    val = np.zeros(n, dtype=bool)
    val[labeled] = ~train[labeled]
    return SplitMasks(train, val, stratified)
