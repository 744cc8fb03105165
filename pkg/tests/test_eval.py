import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ecgmae.convnext1d import ClassifierHead, ModelConfig, build_encoder
from ecgmae.errors import EmptyDataset, InvalidConfig, UnlabeledSegment
from ecgmae.eval import (
    compare_report,
    confusion_csv,
    evaluate,
    format_percent,
    metrics_csv,
    metrics_from_predictions,
)
from ecgmae.preprocess import SegmentDataset, toy_segments

labels = st.lists(st.integers(0, 4), min_size=1, max_size=200)


def test_all_correct():
    m = metrics_from_predictions([0, 1, 2, 3, 4, 2], [0, 1, 2, 3, 4, 2])
    assert m.accuracy == 1.0 and m.n_correct == 6
    assert np.array_equal(m.confusion, np.diag([1, 1, 2, 1, 1]))
    assert np.all(m.f1 == 1.0)


def test_three_of_four():
    m = metrics_from_predictions([0, 0, 2, 2], [0, 0, 2, 1])
    assert m.accuracy == 0.75
    assert m.confusion[2, 1] == 1 and m.confusion[2, 2] == 1
    assert m.recall[2] == 0.5 and m.precision[1] == 0.0
    assert math.isnan(m.f1[1])  # class 1 never occurs in truth, so recall is undefined


def test_absent_class_is_not_a_number():
    m = metrics_from_predictions([0, 0, 1], [0, 0, 1])
    assert math.isnan(m.recall[3]) and math.isnan(m.precision[3]) and math.isnan(m.f1[3])
    assert "n/a" in m.summary() and "n/a" in metrics_csv(m)
    assert m.macro_f1 == 1.0


def test_format_percent():
    assert format_percent(0.94386) == "94.39%"
    assert format_percent(1.0) == "100.00%"
    assert format_percent(math.nan) == "n/a"


def test_input_errors():
    with pytest.raises(EmptyDataset):
        metrics_from_predictions([], [])
    with pytest.raises(InvalidConfig):
        metrics_from_predictions([0, 1], [0])
    with pytest.raises(UnlabeledSegment):
        metrics_from_predictions([255], [0])
    with pytest.raises(EmptyDataset):
        compare_report([])


@given(labels, st.integers(0, 2**32 - 1))
def test_confusion_laws(truth, seed):
    rng = np.random.default_rng(seed)
    truth = np.array(truth)
    pred = rng.integers(0, 5, truth.size)
    m = metrics_from_predictions(truth, pred)
    assert np.array_equal(m.confusion.sum(axis=1), np.bincount(truth, minlength=5))
    assert m.confusion.sum() == truth.size
    # two independent accuracy paths agree
    assert m.accuracy == pytest.approx(m.n_correct / m.n_samples, abs=1e-15)
    assert m.accuracy == pytest.approx(float(np.mean(truth == pred)), abs=1e-15)
    perm = rng.permutation(truth.size)
    m2 = metrics_from_predictions(truth[perm], pred[perm])
    assert np.array_equal(m.confusion, m2.confusion) and m.accuracy == m2.accuracy


def test_evaluate_permutation_invariant():
    data = toy_segments(24, seed=4)
    enc = build_encoder(ModelConfig(4, (1, 1, 1, 1), "micro"), seed=0)
    head = ClassifierHead(enc.config.feature_dim, seed=1)
    a = evaluate(enc, head, data, batch_size=5)
    perm = np.random.default_rng(0).permutation(len(data))
    b = evaluate(enc, head, SegmentDataset(data.samples[perm], data.labels[perm]), batch_size=7)
    assert np.array_equal(a.confusion, b.confusion)
    with pytest.raises(UnlabeledSegment):
        evaluate(enc, head, toy_segments(3, seed=0, labeled=False))


def test_compare_report_is_order_independent():
    entries = [("mae/atto", 0.9438), ("supervised/atto", 0.9012), ("mae/tiny", 0.95)]
    csv_a, text_a = compare_report(entries)
    csv_b, text_b = compare_report(entries[::-1])
    assert csv_a == csv_b and text_a == text_b
    assert csv_a.splitlines()[0] == "name,strategy,architecture,accuracy"
    assert "mae/atto,mae,atto,0.9438" in csv_a and "94.38%" in text_a


def test_confusion_csv_shape():
    m = metrics_from_predictions([0, 1, 2, 3, 4], [0, 1, 2, 3, 3])
    rows = [r.split(",") for r in confusion_csv(m).splitlines()]
    assert len(rows) == 6 and all(len(r) == 6 for r in rows)
