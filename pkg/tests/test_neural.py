import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from npvq import neural
from npvq.neural import (Committee, EmptyTrainingSetError, MlpNet, TrainConfig, TrainingSet,
                         build_training_set, committee_predict, forward, init_net, jacobian,
                         n_params, train_committee, train_lm)


def fd_jacobian(net, X, h=1e-6):
    """Central finite differences of the flattened outputs (oracle)."""
    cols = []
    for i in range(net.params.size):
        wp = net.params.copy()
        wm = net.params.copy()
        wp[i] += h
        wm[i] -= h
        yp = forward(MlpNet(*net.dims, wp), X).reshape(-1)
        ym = forward(MlpNet(*net.dims, wm), X).reshape(-1)
        cols.append((yp - ym) / (2 * h))
    return np.stack(cols, axis=1)


def test_init_deterministic_and_seeded():
    a = init_net((10, 2, 1), 5)
    b = init_net((10, 2, 1), 5)
    assert np.array_equal(a.params, b.params)
    assert not np.array_equal(a.params, init_net((10, 2, 1), 6).params)
    assert a.params.size == 25 == n_params(10, 2, 1)
    assert np.all(np.abs(a.params) <= 0.5)


def test_forward_examples():
    zero = MlpNet(10, 2, 1, np.zeros(25))
    assert forward(zero, np.ones(10)).tolist() == [0.0]
    p = np.zeros(25)
    p[-1] = 0.75  # b2
    p[-3:-1] = [3.0, -2.0]  # W2
    assert forward(MlpNet(10, 2, 1, p), np.ones(10)).tolist() == [0.75]
    one = np.zeros(n_params(10, 1, 1))
    one[0] = 1.0  # W1[0, 0]
    one[11] = 1.0  # W2
    x = np.zeros(10)
    x[0] = 0.5
    # tanh(0.5) evaluated independently
    assert forward(MlpNet(10, 1, 1, one), x)[0] == pytest.approx(math.tanh(0.5), abs=1e-15)
    assert math.tanh(0.5) == pytest.approx(0.462117, abs=1e-6)


def test_forward_errors():
    net = init_net((10, 2, 1), 0)
    with pytest.raises(ValueError):
        forward(net, np.zeros(9))
    with pytest.raises(ValueError):
        forward(net, np.r_[np.zeros(9), np.nan])


def test_training_set_rows():
    assert len(build_training_set(np.arange(12.0), "scalar")) == 2
    assert len(build_training_set(np.arange(12.0), "hint")) == 1
    ts = build_training_set(np.arange(14.0), "vector")
    assert ts.targets.tolist() == [[10, 11], [12, 13]]
    assert ts.inputs[0].tolist() == list(range(10))
    assert ts.inputs[1].tolist() == list(range(2, 12))
    hint = build_training_set(np.arange(13.0), "hint")
    assert hint.targets.tolist() == [[10, 11], [11, 12]]
    with pytest.raises(EmptyTrainingSetError):
        build_training_set(np.arange(10.0), "scalar")
    with pytest.raises(EmptyTrainingSetError):
        build_training_set(np.arange(11.0), "vector")


def test_jacobian_trivial_columns():
    net = init_net((10, 2, 1), 3)
    J = jacobian(net, np.random.default_rng(0).standard_normal((7, 10)))
    assert np.all(J[:, -1] == 1.0)
    zero = MlpNet(10, 2, 1, np.zeros(25))
    Jz = jacobian(zero, np.ones((3, 10)))
    assert not Jz[:, 22:24].any()  # dy/dW2 = tanh(0) = 0


@pytest.mark.parametrize("n_out", [1, 2])
def test_jacobian_matches_finite_differences(rng, n_out):
    for k in range(5):
        net = MlpNet(10, 2, n_out, rng.uniform(-1, 1, n_params(10, 2, n_out)))
        X = rng.uniform(-1, 1, (6, 10))
        J = jacobian(net, X)
        F = fd_jacobian(net, X)
        rel = np.abs(J - F) / np.maximum(np.abs(F), 1e-6)
        assert rel.max() < 1e-4


def _linear_set(rng, n=200):
    X = np.zeros((n, 10))
    X[:, 0] = rng.uniform(-0.3, 0.3, n)
    return TrainingSet(X, 0.5 * X[:, :1])


def test_lm_fits_linear_map(rng):
    ts = _linear_set(rng)
    net, hist = train_lm(init_net((10, 2, 1), 0), ts, TrainConfig(epochs=50))
    mse = np.mean((forward(net, ts.inputs) - ts.targets) ** 2)
    assert mse < 1e-4
    assert hist.epochs_run <= 50


def test_lm_zero_target_monotone(rng):
    X = rng.uniform(-1, 1, (80, 10))
    ts = TrainingSet(X, np.zeros((80, 1)))
    cfg = TrainConfig(epochs=30, use_bayesian=False, alpha_init=0.0)
    _, hist = train_lm(init_net((10, 2, 1), 1), ts, cfg)
    assert np.all(np.diff(hist.objective) <= 0)


def test_lm_deterministic(rng):
    ts = _linear_set(rng)
    a, _ = train_lm(init_net((10, 2, 1), 4), ts, TrainConfig(epochs=10))
    b, _ = train_lm(init_net((10, 2, 1), 4), ts, TrainConfig(epochs=10))
    assert np.array_equal(a.params, b.params)


def test_lm_empty_and_mismatch():
    with pytest.raises(EmptyTrainingSetError):
        train_lm(init_net(), TrainingSet(np.zeros((0, 10)), np.zeros((0, 1))))
    with pytest.raises(ValueError):
        train_lm(init_net((10, 2, 2)), TrainingSet(np.zeros((3, 10)), np.zeros((3, 1))))


def test_bayesian_hyperparameters_stay_in_range(rng):
    x = np.sin(np.arange(400) * 0.3) * 0.4 + 0.05 * rng.standard_normal(400)
    ts = build_training_set(x, "scalar")
    _, hist = train_lm(init_net((10, 2, 1), 2), ts, TrainConfig(epochs=30))
    assert hist.gamma and all(0 <= g <= 25 for g in hist.gamma)
    assert all(a > 0 for a in hist.alpha) and all(b > 0 for b in hist.beta)


def test_lm_mu_limit_stops(rng):
    ts = _linear_set(rng, 50)
    _, hist = train_lm(init_net((10, 2, 1), 0), ts, TrainConfig(epochs=5, mu_init=1e11))
    assert hist.stop_reason == "mu limit" and hist.epochs_run == 0


def _const_net(value):
    p = np.zeros(25)
    p[-1] = value
    return MlpNet(10, 2, 1, p)


@pytest.mark.parametrize("values, combiner, expected", [
    ([1, 2, 3, 4, 5], "mean", 3.0),
    ([1, 2, 3, 4, 5], "median", 3.0),
    ([0, 0, 0, 0, 100], "median", 0.0),
    ([1, 2, 3, 10], "median", 2.5),
])
def test_committee_combiners(values, combiner, expected):
    c = Committee([_const_net(v) for v in values], combiner)
    assert committee_predict(c, np.zeros(10)).tolist() == [expected]


@given(st.permutations([0.1, -2.0, 3.5, 0.7, 9.0]))
def test_median_permutation_invariant(vals):
    a = Committee([_const_net(v) for v in vals], "median").predict(np.zeros(10))
    assert a.tolist() == [0.7]


def test_committee_validation():
    with pytest.raises(ValueError):
        Committee([], "mean")
    with pytest.raises(ValueError):
        Committee([_const_net(0)], "mode")
    with pytest.raises(ValueError):
        Committee([_const_net(0), init_net((10, 2, 2))], "mean")


def test_train_committee_cardinality_and_determinism(rng):
    ts = build_training_set(np.sin(np.arange(120) * 0.2) * 0.3, "scalar")
    cfg = TrainConfig(epochs=3, n_starts=5, rng_seed=11)
    a = train_committee(ts, cfg)
    b = train_committee(ts, cfg)
    assert len(a) == 5
    assert [n.seed for n in a.nets] == [11, 12, 13, 14, 15]
    assert all(np.array_equal(x.params, y.params) for x, y in zip(a.nets, b.nets))


def test_single_member_committee_equals_forward(rng):
    ts = build_training_set(np.cos(np.arange(100) * 0.1) * 0.3, "scalar")
    c = train_committee(ts, TrainConfig(epochs=3, n_starts=1), "median")
    x = rng.uniform(-0.3, 0.3, 10)
    assert np.array_equal(c.predict(x), forward(c.nets[0], x))


def test_committee_json_roundtrip(rng):
    c = Committee([init_net((10, 2, 2), s) for s in range(3)], "mean")
    back = neural.committee_from_json(neural.committee_to_json(c))
    x = rng.uniform(-1, 1, 10)
    assert back.combiner == "mean"
    assert np.array_equal(back.predict(x), c.predict(x))
