import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bridgelink.classifier import (
    DEPOSIT, NON_DEPOSIT, BoostedModel, LabeledExample, Stump, TrainError, accuracy, evaluate_loo, predict,
    predict_many, report_csv, train,
)
from bridgelink.features import FeatureVector


def ex(i, func=None, struc=None, label=DEPOSIT, bridge="b"):
    f = np.zeros(48) if func is None else np.asarray(func, dtype=float)
    s = np.zeros(16, dtype=np.int64) if struc is None else np.asarray(struc, dtype=np.int64)
    return LabeledExample(f"0x{i:064x}", bridge, FeatureVector(f, s), label)


def one_dim(values, labels, bridge="b"):
    out = []
    for i, (v, l) in enumerate(zip(values, labels)):
        s = np.zeros(16, dtype=np.int64)
        s[0] = v
        out.append(ex(i, struc=s, label=l, bridge=bridge))
    return out


def random_set(rng, n, bridge="b"):
    out = []
    for i in range(n):
        s = rng.integers(0, 5, 16)
        f = rng.normal(size=48)
        lab = DEPOSIT if s[0] + s[3] + (f[0] > 0) > 4 else NON_DEPOSIT
        if rng.random() < 0.1:
            lab = DEPOSIT if lab == NON_DEPOSIT else NON_DEPOSIT
        out.append(ex(i, f, s, lab, bridge))
    return out


def test_separable_toy_set():
    data = one_dim([0, 1, 2, 5, 6, 7], [NON_DEPOSIT] * 3 + [DEPOSIT] * 3)
    model = train(data, "structural", T=10)
    assert accuracy(model, data) == 1.0
    assert model.stumps[0] == Stump(48, 3.5, 1)


def test_single_class_rejected():
    with pytest.raises(TrainError):
        train(one_dim([0, 1], [DEPOSIT, DEPOSIT]))


def test_label_flip_swaps_polarity():
    rng = np.random.default_rng(0)
    data = random_set(rng, 120)
    flipped = [LabeledExample(e.tx_hash, e.bridge, e.feature, NON_DEPOSIT if e.label == DEPOSIT else DEPOSIT)
               for e in data]
    m, mf = train(data, T=15), train(flipped, T=15)
    assert [(s.feature, s.threshold, -s.polarity) for s in m.stumps] == \
           [(s.feature, s.threshold, s.polarity) for s in mf.stumps]
    assert accuracy(m, data) == pytest.approx(accuracy(mf, flipped))


def test_one_stump_model_below_label():
    model = BoostedModel((Stump(50, 2.0, 1),), (0.7,), "fused", 1)
    x = np.zeros(64)
    assert predict(model, x)[0] == NON_DEPOSIT
    x[50] = 3
    assert predict(model, x) == (DEPOSIT, 0.7)


def test_zero_margin_is_non_deposit():
    model = BoostedModel((Stump(0, 0.0, 1), Stump(1, 0.0, 1)), (0.5, 0.5), "fused", 2)
    x = np.zeros(64)
    x[0] = 1
    label, margin = predict(model, x)
    assert margin == 0 and label == NON_DEPOSIT


def test_dim_mismatch():
    model = BoostedModel((Stump(0, 0.0, 1),), (1.0,), "fused", 1)
    with pytest.raises(ValueError):
        predict(model, np.zeros(48))


def test_margin_monotone_in_shared_feature():
    model = BoostedModel((Stump(5, 1.0, 1), Stump(5, 2.0, 1), Stump(5, 3.0, 1)), (0.2, 0.5, 0.1), "fused", 3)
    x = np.zeros(64)
    margins = []
    for v in np.linspace(0, 4, 41):
        x[5] = v
        margins.append(predict(model, x)[1])
    assert all(b >= a for a, b in zip(margins, margins[1:]))


def test_predict_reproduces_training_predictions(tmp_path):
    rng = np.random.default_rng(1)
    data = random_set(rng, 200)
    model = train(data, T=20)
    X = np.stack([e.feature.fused for e in data])
    first = model.margin(X)
    model.save(tmp_path / "m.json")
    again = BoostedModel.load(tmp_path / "m.json")
    assert again == model
    assert np.array_equal(again.margin(X), first)
    assert [predict(model, e.feature)[1] for e in data] == list(first)


def test_feature_mode_restricts_columns():
    rng = np.random.default_rng(2)
    data = random_set(rng, 150)
    assert all(s.feature >= 48 for s in train(data, "structural", T=10).stumps)
    assert all(s.feature < 48 for s in train(data, "functional", T=10).stumps)


def test_rescaling_invariance():
    rng = np.random.default_rng(3)
    data = random_set(rng, 150)
    rescaled = []
    for e in data:
        s = e.feature.structural * 3 + 7
        f = np.exp(e.feature.functional)
        rescaled.append(LabeledExample(e.tx_hash, e.bridge, FeatureVector(f, s), e.label))
    m1, m2 = train(data, T=25), train(rescaled, T=25)
    X1 = np.stack([e.feature.fused for e in data])
    X2 = np.stack([e.feature.fused for e in rescaled])
    assert np.array_equal(predict_many(m1, X1), predict_many(m2, X2))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 30))
def test_training_error_within_boosting_bound(seed, T):
    # the classic bound: training error <= prod_t 2 sqrt(e_t (1 - e_t))
    rng = np.random.default_rng(seed)
    data = random_set(rng, 60)
    model = train(data, T=T)
    bound = 1.0
    for a in model.alphas:
        e = 1.0 / (1.0 + math.exp(2 * a))
        bound *= 2 * math.sqrt(e * (1 - e))
    assert 1.0 - accuracy(model, data) <= bound + 1e-9


def test_loo_identical_bridges():
    sep = one_dim(list(range(20)), [NON_DEPOSIT] * 10 + [DEPOSIT] * 10)
    corpus = {b: [LabeledExample(e.tx_hash, b, e.feature, e.label) for e in sep] for b in ("x", "y")}
    assert evaluate_loo(corpus, "fused") == {"x": 1.0, "y": 1.0}


def test_loo_never_trains_on_held_out_bridge():
    rng = np.random.default_rng(5)
    corpus = {b: random_set(rng, 40, b) for b in ("p", "q", "r")}
    held_hashes = {b: {id(e) for e in corpus[b]} for b in corpus}
    seen = []

    def audited(examples, **kw):
        seen.append({id(e) for e in examples})
        return train(examples, **kw)

    evaluate_loo(corpus, "fused", T=5, trainer=audited)
    for held, ids in zip(sorted(corpus), seen):
        assert not ids & held_hashes[held]
        assert ids == set().union(*(held_hashes[b] for b in corpus if b != held))


def test_report_layout():
    text = report_csv({"structural": {"a": 0.5}, "fused": {"a": 1.0}})
    assert text.splitlines() == ["bridge,Struc.,Struc. + Func.", "a,50.00%,100.00%"]
