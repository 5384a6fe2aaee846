import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from tempofuse.autodiff import Graph, Parameter
from tempofuse.data import (SynthProfile, TimeSeriesFrame, WindowSpec, apply_scaler, fit_scaler,
                            make_windows, synth_generate)
from tempofuse.errors import NumericError
from tempofuse.models import create_model, predict
from tempofuse.models.checkpoint import checkpoint_dict, model_from_dict
from tempofuse.training import (Adam, TrainConfig, chronological_split, clip_by_global_norm,
                                global_norm, mse_loss, pinball_loss, validation_mse)

FAST = TrainConfig(hidden_dim=4, embedding_dim=2, attention_heads=2, epochs=2, batch_size=16,
                   seed=5)


def _windows(spec=WindowSpec(3, 2), days=2, seed=0):
    frame = synth_generate(SynthProfile(seed=seed, days=days)).frame
    return make_windows(apply_scaler(frame, fit_scaler(frame)), spec)


# -- losses -----------------------------------------------------------------

def test_mse_example():
    assert mse_loss(np.array([1.0, 2.0, 4.0]), np.array([1.0, 0.0, 1.0])) == pytest.approx(13 / 3)


def test_pinball_example():
    pred = np.array([[[1.0, 2.0]], [[3.0, 3.0]]])      # (n=2, tau=1, Q=2)
    label = np.array([[2.0], [1.0]])
    # errors y - yhat: sample 1 -> (1, 0), sample 2 -> (-2, -2)
    levels = (0.25, 0.75)
    expected = np.mean([0.25 * 1, 0.0, 0.75 * 2, 0.25 * 2])
    assert pinball_loss(pred, label, levels) == pytest.approx(expected)


def test_pinball_rejects_bad_levels():
    with pytest.raises(ValueError):
        pinball_loss(np.zeros((1, 1, 1)), np.zeros((1, 1)), (1.0,))


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, (6, 3), elements=st.floats(-100, 100)),
       arrays(np.float64, (6, 3), elements=st.floats(-100, 100)))
def test_median_pinball_is_half_mae(pred, label):
    value = pinball_loss(pred[..., None], label, (0.5,))
    assert value == pytest.approx(0.5 * np.mean(np.abs(label - pred)), rel=1e-12, abs=1e-12)


def test_graph_losses_match_array_losses():
    rng = np.random.default_rng(0)
    pred, label = rng.normal(size=(4, 3, 2)), rng.normal(size=(4, 3))
    g = Graph()
    node = g.constant(pred)
    assert float(pinball_loss(node, label, (0.3, 0.6)).value[0]) == pytest.approx(
        pinball_loss(pred, label, (0.3, 0.6)))
    assert float(mse_loss(g.constant(pred[..., 0]), label).value[0]) == pytest.approx(
        mse_loss(pred[..., 0], label))


# -- optimiser --------------------------------------------------------------

def test_adam_first_step_moves_by_learning_rate():
    p = Parameter(np.array([1.0, -2.0, 3.0]))
    Adam([p], learning_rate=0.1).step([np.array([0.5, -4.0, 1e-3])])
    np.testing.assert_allclose(p.value, [0.9, -1.9, 2.9], atol=1e-6)


def test_adam_matches_reference_recursion():
    rng = np.random.default_rng(3)
    p = Parameter(rng.normal(size=5))
    x, m, v = p.value.copy(), np.zeros(5), np.zeros(5)
    opt = Adam([p], learning_rate=0.01)
    for t in range(1, 6):
        grad = rng.normal(size=5)
        opt.step([grad])
        m = 0.9 * m + 0.1 * grad
        v = 0.999 * v + 0.001 * grad ** 2
        x = x - 0.01 * (m / (1 - 0.9 ** t)) / (np.sqrt(v / (1 - 0.999 ** t)) + 1e-8)
    np.testing.assert_allclose(p.value, x, rtol=1e-12)


def test_clip_by_global_norm():
    grads = [np.array([3.0]), np.array([[4.0]])]
    clipped, norm = clip_by_global_norm(grads, 1.0)
    assert norm == 5.0
    assert global_norm(clipped) == pytest.approx(1.0)
    same, _ = clip_by_global_norm(grads, 10.0)
    assert same[0][0] == 3.0


# -- loop -------------------------------------------------------------------

def test_chronological_split_purges_overlap():
    train_idx, val_idx = chronological_split(100, TrainConfig(), horizon=4)
    assert val_idx[0] == 90 and val_idx[-1] == 99
    # labels of window i start i + p bins in; its last label precedes the first
    # validation label
    assert train_idx[-1] + 4 - 1 < val_idx[0]
    assert train_idx[-1] == 85


def test_zero_epochs_leaves_model_unchanged():
    ds = _windows()
    model = create_model("seq2seq", ds.spec, ds.observed_names, TrainConfig(
        **{**FAST.to_dict(), "epochs": 0}))
    before = {k: v.copy() for k, v in model.state().items()}
    model.fit(ds)
    assert all(np.array_equal(before[k], v) for k, v in model.state().items())


@pytest.mark.parametrize("kind", ["seq2seq", "tft"])
def test_training_is_deterministic(kind):
    ds = _windows()
    runs = []
    for _ in range(2):
        model = create_model(kind, ds.spec, ds.observed_names, FAST)
        model.fit(ds)
        runs.append((model.state(), model.last_report.to_dict(include_time=False),
                     predict(model, ds)))
    (s1, r1, p1), (s2, r2, p2) = runs
    assert r1 == r2
    assert all(s1[k].tobytes() == s2[k].tobytes() for k in s1)
    assert p1.tobytes() == p2.tobytes()


@pytest.mark.parametrize("kind", ["seq2seq", "seq2seq_attention", "tft"])
def test_first_batch_loss_matches_recomputation(kind):
    ds = _windows()
    config = TrainConfig(**{**FAST.to_dict(), "dropout_rate": 0.0, "batch_size": len(ds),
                            "epochs": 1})
    model = create_model(kind, ds.spec, ds.observed_names, config)
    initial = checkpoint_dict(model)
    model.fit(ds)
    fresh = model_from_dict(initial)
    train_idx, _ = chronological_split(len(ds), config, ds.spec.n_look_ahead)
    expected = float(fresh.loss(Graph(), ds.subset(train_idx)).value[0])
    assert model.last_report.first_batch_loss == pytest.approx(expected, rel=1e-12)


def test_non_finite_loss_names_epoch_and_batch():
    y = np.linspace(0, 1, 40)
    y[30] = np.nan
    frame = TimeSeriesFrame.from_arrays("2019-03-01T00:00", y)
    ds = make_windows(frame, WindowSpec(3, 2))
    config = TrainConfig(**{**FAST.to_dict(), "batch_size": 4, "validation_fraction": 0.0})
    model = create_model("seq2seq", ds.spec, (), config)
    with pytest.raises(NumericError, match=r"epoch 1, batch \d+"):
        model.fit(ds)


def test_early_stopping_restores_best_epoch():
    ds = _windows(days=3)
    config = TrainConfig(**{**FAST.to_dict(), "epochs": 12, "early_stop_patience": 2,
                            "learning_rate": 0.05})
    model = create_model("seq2seq", ds.spec, ds.observed_names, config)
    model.fit(ds)
    report = model.last_report
    best = int(np.argmin(report.validation_loss)) + 1
    assert report.best_epoch == best
    _, val_idx = chronological_split(len(ds), config, ds.spec.n_look_ahead)
    assert validation_mse(model, ds.subset(val_idx)) == pytest.approx(
        report.validation_loss[best - 1], rel=1e-12)


def test_seq2seq_learns_copy_task():
    pattern = np.array([0.1, 0.9, 0.4, 0.7])
    frame = TimeSeriesFrame.from_arrays("2019-03-01T00:00", np.tile(pattern, 60))
    ds = make_windows(frame, WindowSpec(4, 4))
    config = TrainConfig(hidden_dim=8, embedding_dim=2, dropout_rate=0.0, epochs=200,
                         batch_size=64, learning_rate=1e-2, early_stop_patience=200, seed=1)
    model = create_model("seq2seq", ds.spec, (), config)
    model.fit(ds)
    assert min(model.last_report.train_loss) < 0.01
