import json

import numpy as np
import pytest

from a2gnn.alignment import MmdConfig, mmd_squared
from a2gnn.data import (FeatureSizeError, GraphDataset, IndexRangeError, MalformedLineError,
                        MissingFileError, ShiftConfig, adjacency_from_edges,
                        generate_shifted_pair, load_bundle, save_bundle, split_source)


def write_bundle(path, n, d, c, edges, features, labels):
    path.mkdir(parents=True, exist_ok=True)
    (path / "meta.json").write_text(json.dumps({"num_nodes": n, "feat_dim": d, "num_classes": c,
                                                "comment": "ignored"}))
    (path / "edges.tsv").write_text(edges)
    (path / "features.f32").write_bytes(np.asarray(features, "<f4").tobytes())
    (path / "labels.txt").write_text(labels)


def test_minimal_bundle(tmp_path):
    write_bundle(tmp_path, 2, 2, 2, "0\t1\n", [[1, 2], [3, 4]], "0\n1\n")
    ds = load_bundle(tmp_path)
    np.testing.assert_array_equal(ds.adjacency.to_dense(), [[0, 1], [1, 0]])
    assert ds.adjacency.nnz == 2
    np.testing.assert_array_equal(ds.features, [[1, 2], [3, 4]])


def test_duplicate_and_reversed_edges_are_merged(tmp_path):
    write_bundle(tmp_path, 3, 1, 1, "0\t1\n1\t0\n2\t1\n", np.zeros((3, 1)), "0\n0\n-1\n")
    ds = load_bundle(tmp_path)
    assert ds.num_edges == 2
    assert ds.adjacency.is_symmetric()


def test_wrong_feature_size(tmp_path):
    write_bundle(tmp_path, 2, 3, 2, "", np.zeros(5), "0\n1\n")
    with pytest.raises(FeatureSizeError, match="24 bytes"):
        load_bundle(tmp_path)


@pytest.mark.parametrize("edges, exc, where", [
    ("0 1\n", MalformedLineError, "edges.tsv:1"),
    ("0\t1\n\n", MalformedLineError, "edges.tsv:2"),
    ("0\t7\n", IndexRangeError, "edges.tsv:1"),
    ("1\t1\n", MalformedLineError, "self-loop"),
])
def test_bad_edge_lines(tmp_path, edges, exc, where):
    write_bundle(tmp_path, 2, 1, 2, edges, np.zeros(2), "0\n1\n")
    with pytest.raises(exc, match=where):
        load_bundle(tmp_path)


def test_bad_labels(tmp_path):
    write_bundle(tmp_path, 2, 1, 2, "", np.zeros(2), "0\n5\n")
    with pytest.raises(IndexRangeError, match="labels.txt:2"):
        load_bundle(tmp_path)
    write_bundle(tmp_path, 2, 1, 2, "", np.zeros(2), "0\nx\n")
    with pytest.raises(MalformedLineError, match="labels.txt:2"):
        load_bundle(tmp_path)


def test_missing_file(tmp_path):
    write_bundle(tmp_path, 2, 1, 2, "", np.zeros(2), "0\n1\n")
    (tmp_path / "labels.txt").unlink()
    with pytest.raises(MissingFileError, match="labels.txt"):
        load_bundle(tmp_path)


def test_roundtrip(tmp_path):
    src, _ = generate_shifted_pair(ShiftConfig(nodes_per_domain=40, num_classes=3, seed=3))
    labels = src.labels.copy()
    labels[::5] = -1
    ds = GraphDataset("x", src.adjacency, src.features, labels, 3)
    save_bundle(ds, tmp_path / "b")
    assert load_bundle(tmp_path / "b") == ds


def test_empty_graph_bundle(tmp_path):
    ds = GraphDataset("e", adjacency_from_edges(3, []), np.ones((3, 2)), [0, -1, 1], 2)
    save_bundle(ds, tmp_path)
    assert (tmp_path / "edges.tsv").read_text() == ""
    assert load_bundle(tmp_path) == ds


def test_features_are_little_endian_f32(tmp_path):
    ds = GraphDataset("e", adjacency_from_edges(1, []), [[1.5]], [0], 1)
    save_bundle(ds, tmp_path)
    assert (tmp_path / "features.f32").read_bytes() == b"\x00\x00\xc0\x3f"


# -- generator -------------------------------------------------------------


def test_generator_sizes_and_balance():
    src, tgt = generate_shifted_pair(ShiftConfig(nodes_per_domain=100, num_classes=2, seed=1))
    for ds in (src, tgt):
        assert ds.num_nodes == 100
        counts = np.bincount(ds.labels, minlength=2)
        assert abs(counts[0] - counts[1]) <= 1
        assert ds.adjacency.is_symmetric()
        assert not ds.adjacency.diagonal().any()


def test_generator_deterministic():
    cfg = ShiftConfig(nodes_per_domain=60, seed=11)
    a, b = generate_shifted_pair(cfg), generate_shifted_pair(cfg)
    assert a[0] == b[0] and a[1] == b[1]
    c = generate_shifted_pair(ShiftConfig(nodes_per_domain=60, seed=12))
    assert not c[0] == a[0]


def test_generator_shift_increases_mmd():
    # Monte Carlo comparison of raw-feature MMD at shift 0 and shift 2
    cfg = MmdConfig(bandwidths=(1.0, 2.0, 4.0))
    for seed in range(5):
        same = generate_shifted_pair(ShiftConfig(nodes_per_domain=150, seed=seed,
                                                 feature_shift_magnitude=0.0))
        far = generate_shifted_pair(ShiftConfig(nodes_per_domain=150, seed=seed,
                                                feature_shift_magnitude=2.0))
        m0 = mmd_squared(same[0].features, same[1].features, cfg)[0]
        m2 = mmd_squared(far[0].features, far[1].features, cfg)[0]
        assert m0 < m2


def test_generator_homophily():
    src, _ = generate_shifted_pair(ShiftConfig(nodes_per_domain=200, seed=0))
    e = src.undirected_edges()
    same = np.mean(src.labels[e[:, 0]] == src.labels[e[:, 1]])
    assert same > 0.6


@pytest.mark.parametrize("kwargs", [dict(nodes_per_domain=0), dict(num_classes=0),
                                    dict(intra_edge_prob=0.01, inter_edge_prob=0.02),
                                    dict(intra_edge_prob=1.5)])
def test_generator_rejects_degenerate_config(kwargs):
    with pytest.raises(ValueError):
        generate_shifted_pair(ShiftConfig(**kwargs))


# -- split -----------------------------------------------------------------


def _dataset(labels, c=2):
    n = len(labels)
    return GraphDataset("s", adjacency_from_edges(n, []), np.zeros((n, 1)), labels, c)


def test_split_eighty_twenty():
    split = split_source(_dataset([0] * 5 + [1] * 5), 0.8, seed=0)
    assert split.train_mask.sum() == 8 and split.val_mask.sum() == 2
    assert split.stratified


def test_split_two_nodes():
    split = split_source(_dataset([0, 0], c=1), 0.5, seed=0)
    assert split.train_mask.sum() == 1 and split.val_mask.sum() == 1


def test_split_deterministic_disjoint_and_covering():
    labels = np.array([0, 1, 2, -1, 0, 1, 2, 0, -1, 1, 2, 2])
    ds = _dataset(labels, c=3)
    a = split_source(ds, 0.8, seed=5)
    b = split_source(ds, 0.8, seed=5)
    np.testing.assert_array_equal(a.train_mask, b.train_mask)
    assert not np.any(a.train_mask & a.val_mask)
    np.testing.assert_array_equal(a.train_mask | a.val_mask, labels != -1)
    for cls in range(3):
        assert a.val_mask[labels == cls].sum() >= 1


def test_split_falls_back_when_class_too_small():
    with pytest.warns(UserWarning):
        split = split_source(_dataset([0, 0, 0, 1], c=2), 0.5, seed=0)
    assert not split.stratified
    assert split.train_mask.sum() + split.val_mask.sum() == 4
