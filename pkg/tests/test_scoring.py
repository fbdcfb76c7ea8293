import hashlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stripe_gad.config import ModelConfig, TrainConfig
from stripe_gad.graph import NodeLabels, extract_window
from stripe_gad.model import StripeModel
from stripe_gad.scoring import (
    MetricError,
    ScoreTable,
    compute_auc,
    compute_threshold_metrics,
    evaluate,
    score_nodes,
    scoring_window_ends,
    top_k_predictions,
)
from stripe_gad.synthetic import SyntheticConfig, make_dynamic_graph
from stripe_gad.training import save_checkpoint


def brute_auc(s, y):
    pos, neg = s[y == 1], s[y == 0]
    total = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p in pos for n in neg)
    return total / (len(pos) * len(neg))


def test_auc_hand_cases():
    assert compute_auc([0.9, 0.1], [1, 0]) == 1.0
    assert compute_auc([0.3, 0.3, 0.3], [1, 0, 1]) == 0.5
    assert compute_auc([0.8, 0.6, 0.4, 0.2], [1, 0, 1, 0]) == 0.75


@settings(max_examples=60, deadline=None)
@given(n=st.integers(2, 200), levels=st.integers(2, 20), seed=st.integers(0, 2**31))
def test_auc_equals_pairwise_enumeration(n, levels, seed):
    rng = np.random.default_rng(seed)
    s = rng.integers(0, levels, size=n).astype(float)  # coarse values force ties
    y = rng.integers(0, 2, size=n)
    y[0], y[1] = 0, 1
    assert compute_auc(s, y) == brute_auc(s, y)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_auc_invariant_under_monotone_map(seed):
    rng = np.random.default_rng(seed)
    s = rng.normal(size=50)
    y = (rng.random(50) < 0.3).astype(int)
    y[:2] = [0, 1]
    assert compute_auc(np.exp(3 * s) + 1, y) == compute_auc(s, y)


def test_auc_single_class():
    with pytest.raises(MetricError, match="single class"):
        compute_auc([0.1, 0.2], [1, 1])


def test_top_k_precision_hand_case():
    m = compute_threshold_metrics([4, 3, 2, 1], [1, 0, 1, 0], "top-k")
    assert m["counts"] == {"tp": 1, "fp": 1, "fn": 1, "tn": 1}
    assert m["precision"] == 0.5
    assert m["macro_f1"] == 0.5


def test_perfect_separation():
    for rule in ("top-k", "best-f1"):
        m = compute_threshold_metrics([0.9, 0.8, 0.1, 0.2], [1, 1, 0, 0], rule)
        assert m["precision"] == 1.0 and m["macro_f1"] == 1.0


def test_best_f1_at_least_top_k(rng):
    s = rng.normal(size=100)
    y = (rng.random(100) < 0.2).astype(int)
    assert (compute_threshold_metrics(s, y, "best-f1")["macro_f1"]
            >= compute_threshold_metrics(s, y, "top-k")["macro_f1"])


def test_top_k_ties_prefer_lower_index():
    np.testing.assert_array_equal(top_k_predictions([1, 2, 2, 2], 2), [False, True, True, False])


def test_unknown_rule():
    with pytest.raises(MetricError):
        compute_threshold_metrics([1, 0], [1, 0], "median")


def test_scoring_window_ends():
    g = make_dynamic_graph(SyntheticConfig(num_nodes=20, num_snapshots=8))
    assert scoring_window_ends(g, [4, 5, 6, 7], 3) == [4, 5, 6, 7]
    assert scoring_window_ends(g, [1, 2], 3) == [2, 3, 4, 5, 6, 7]


@pytest.fixture(scope="module")
def small_run():
    g = make_dynamic_graph(SyntheticConfig(num_nodes=40, num_snapshots=6))
    model = StripeModel(ModelConfig(in_dim=16, hidden_dim=8), seed=0)
    return g, model


def test_rounds_without_dropout_identical(small_run):
    g, model = small_run
    a = score_nodes(model, g, [3, 4, 5], TrainConfig(), rounds=1)
    b = score_nodes(model, g, [3, 4, 5], TrainConfig(), rounds=5)
    np.testing.assert_array_equal(a.score, b.score)
    assert len(a) == 3 * 40


def test_window_end_attribution(small_run):
    g, model = small_run
    tcfg = TrainConfig()
    table = score_nodes(model, g, [4, 5], tcfg, attribution="window-end")
    res = model(extract_window(g, 5, 3), train=False, tcfg=tcfg)
    sel = table.timestamp == 5
    np.testing.assert_array_equal(table.rec_part[sel], res.loss.per_node_rec)
    np.testing.assert_array_equal(table.com_part[sel], res.loss.per_node_com)
    np.testing.assert_allclose(res.loss.per_node_rec, res.loss.offset_rec.sum(0), atol=1e-12)


def test_last_offset_attribution(small_run):
    g, model = small_run
    tcfg = TrainConfig()
    table = score_nodes(model, g, [4, 5], tcfg)
    for t in (4, 5):
        res = model(extract_window(g, t, 3), train=False, tcfg=tcfg)
        sel = table.timestamp == t
        np.testing.assert_array_equal(table.rec_part[sel], res.loss.offset_rec[-1])
        np.testing.assert_array_equal(table.com_part[sel], res.loss.offset_com[-1])


def test_offset_attribution_averages_covering_windows(small_run):
    g, model = small_run
    tcfg = TrainConfig()
    table = score_nodes(model, g, [4, 5], tcfg, attribution="offset")
    # t=4 sits at offset 2 of the window ending at 4 and offset 1 of the one ending at 5
    a = model(extract_window(g, 4, 3), train=False, tcfg=tcfg).loss
    b = model(extract_window(g, 5, 3), train=False, tcfg=tcfg).loss
    sel = table.timestamp == 4
    np.testing.assert_allclose(table.rec_part[sel], (a.offset_rec[2] + b.offset_rec[1]) / 2, atol=1e-15)
    np.testing.assert_allclose(table.com_part[sel], (a.offset_com[2] + b.offset_com[1]) / 2, atol=1e-15)


def test_unknown_attribution(small_run):
    g, model = small_run
    with pytest.raises(ValueError):
        score_nodes(model, g, [4], TrainConfig(), attribution="mean")


def test_scoring_leaves_checkpoint_unchanged(small_run, tmp_path):
    g, model = small_run
    path = tmp_path / "m.ckpt"
    save_checkpoint(model, path)
    digest = hashlib.sha256(path.read_bytes()).hexdigest()
    score_nodes(model, g, [3, 4, 5], TrainConfig(), rounds=3, edge_dropout=0.2)
    save_checkpoint(model, path)
    assert hashlib.sha256(path.read_bytes()).hexdigest() == digest


def test_edge_dropout_changes_scores(small_run):
    g, model = small_run
    a = score_nodes(model, g, [4], TrainConfig(), rounds=1)
    b = score_nodes(model, g, [4], TrainConfig(), rounds=4, edge_dropout=0.3)
    assert not np.array_equal(a.score, b.score)


def test_table_csv_roundtrip(small_run, tmp_path):
    g, model = small_run
    table = score_nodes(model, g, [4, 5], TrainConfig())
    table.write_csv(tmp_path / "s.csv")
    back = ScoreTable.read_csv(tmp_path / "s.csv")
    np.testing.assert_array_equal(back.score, table.score)
    np.testing.assert_array_equal(back.node, table.node)
    assert (tmp_path / "s.csv").read_text().splitlines()[0] == "node,timestamp,score,rec_part,com_part"


def test_evaluate_report(small_run):
    g, model = small_run
    table = score_nodes(model, g, [4, 5], TrainConfig())
    labels = NodeLabels(40)
    labels.mark(4, [0, 1, 2])
    rep = evaluate(table, labels).to_dict()
    assert set(rep) >= {"auc", "precision", "macro_f1", "counts", "best_f1"}
    assert rep["counts"]["tp"] + rep["counts"]["fn"] == 3
