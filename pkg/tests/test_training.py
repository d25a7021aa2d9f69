"""Optimizer arithmetic, learning-rate schedule, and the training loop.

The AdamW examples are asserted bit-for-bit by mirroring the update's
operation order; training-loop behavior is pinned through tiny synthetic
datasets that run in seconds.
"""

import csv
import math

import numpy as np
import pytest

from romforge.dataset import generate_synthetic_dataset, split_dataset
from romforge.errors import ConfigurationError, DivergenceError, ShapeError
from romforge.gca import batch_loss, build_graph
from romforge.optim import adamw_step, cosine_warm_restart_lr, init_adamw_state
from romforge.training import (
    EpochRecord,
    GcaTrainConfig,
    train_gca,
    write_history_csv,
)


# ------------------------------------------------------------------ adamw ---


def test_first_step_with_unit_gradient():
    params = {"w": np.array([0.0])}
    state = init_adamw_state(params)
    adamw_step(params, {"w": np.array([1.0])}, state, lr=0.1, weight_decay=0.0)
    # bias correction makes m_hat = v_hat = 1 on step one, so the update is
    # exactly lr / (1 + eps)
    assert params["w"][0] == -(0.1 * 1.0 / (1.0 + 1e-8))
    assert state["t"] == 1


def test_pure_decoupled_decay():
    params = {"w": np.array([1.0])}
    state = init_adamw_state(params)
    adamw_step(params, {"w": np.array([0.0])}, state, lr=0.1, weight_decay=0.1)
    expected = 1.0 - (0.1 * 0.0 / (np.sqrt(0.0) + 1e-8) + 0.1 * 0.1 * 1.0)
    assert params["w"][0] == expected
    assert params["w"][0] == pytest.approx(0.99, rel=1e-14)


def test_hundred_steps_shrink_a_quadratic():
    params = {"w": np.array([1.0])}
    state = init_adamw_state(params)
    for _ in range(100):
        adamw_step(params, {"w": 2.0 * params["w"]}, state, lr=0.1,
                   weight_decay=0.0)
    assert abs(params["w"][0]) < 0.05
    assert state["t"] == 100


def test_step_counter_is_shared_across_parameters():
    params = {"a": np.zeros(2), "b": np.zeros((2, 2))}
    state = init_adamw_state(params)
    grads = {"a": np.ones(2), "b": np.ones((2, 2))}
    adamw_step(params, grads, state, lr=0.01)
    adamw_step(params, grads, state, lr=0.01)
    assert state["t"] == 2
    # identical gradients everywhere must move every entry identically
    assert np.unique(params["a"]).size == 1
    assert params["a"][0] == params["b"][0, 0]


def test_update_is_in_place():
    arr = np.array([0.5, -0.5])
    params = {"w": arr}
    state = init_adamw_state(params)
    adamw_step(params, {"w": np.ones(2)}, state, lr=0.1)
    assert params["w"] is arr


# --------------------------------------------------------------- schedule ---


def test_schedule_endpoint_values():
    assert cosine_warm_restart_lr(0.0, 1e-3, 1e-5, 50, 2) == 1e-3
    # just before the first restart the lr has annealed to lr_min
    assert cosine_warm_restart_lr(50.0 - 1e-9, 1e-3, 1e-5, 50, 2) == (
        pytest.approx(1e-5, abs=1e-12)
    )


def test_schedule_restart_boundaries():
    # t0=10, mult=2: periods [0,10), [10,30), [30,70)
    for boundary in (10.0, 30.0):
        assert cosine_warm_restart_lr(boundary, 1.0, 0.0, 10, 2) == 1.0
    assert cosine_warm_restart_lr(20.0, 1.0, 0.0, 10, 2) == pytest.approx(0.5)
    # halfway through the third period
    assert cosine_warm_restart_lr(50.0, 1.0, 0.0, 10, 2) == pytest.approx(0.5)


def test_schedule_constant_period_when_mult_is_one():
    for boundary in (10.0, 20.0, 30.0):
        assert cosine_warm_restart_lr(boundary, 1.0, 0.0, 10, 1) == 1.0


def test_schedule_validates_inputs():
    with pytest.raises(ConfigurationError):
        cosine_warm_restart_lr(-1.0, 1.0, 0.0, 10, 2)
    with pytest.raises(ConfigurationError):
        cosine_warm_restart_lr(0.0, 1.0, 0.0, 0, 2)
    with pytest.raises(ConfigurationError):
        cosine_warm_restart_lr(0.0, 1.0, 0.0, 10, 0)


# ----------------------------------------------------------------- config ---


def test_config_validation():
    GcaTrainConfig()  # defaults are valid
    with pytest.raises(ConfigurationError):
        GcaTrainConfig(lam=-0.1)
    with pytest.raises(ConfigurationError):
        GcaTrainConfig(lr_max=1e-5, lr_min=1e-3)
    with pytest.raises(ConfigurationError):
        GcaTrainConfig(patience=0)
    with pytest.raises(ConfigurationError):
        GcaTrainConfig(beta1=1.0)
    with pytest.raises(ConfigurationError):
        GcaTrainConfig(noise_sigma=-1.0)
    with pytest.raises(ConfigurationError):
        GcaTrainConfig(warm_restart_t0=0)


# ---------------------------------------------------------------- training ---


@pytest.fixture(scope="module")
def tiny():
    data = generate_synthetic_dataset(2, 4, 3, [40.0], seed=0)
    return data, build_graph(data.mesh)


def test_overfit_single_sample(tiny):
    data, graph = tiny
    config = GcaTrainConfig(
        lam=0.0, noise_sigma=0.0, weight_decay=0.0,
        lr_max=2e-2, lr_min=1e-5, warm_restart_t0=300,
        max_epochs=3000, patience=3000, seed=0,
    )
    _, history = train_gca(data, None, graph, config)
    initial = history[0].l_rec
    assert min(h.l_rec for h in history) < 1e-3 * initial


def test_frozen_weights_trip_patience_immediately(tiny):
    data, graph = tiny
    config = GcaTrainConfig(lr_max=0.0, lr_min=0.0, noise_sigma=0.0,
                            patience=1, max_epochs=50)
    _, history = train_gca(data, None, graph, config)
    # epoch 0 sets the best loss; epoch 1 cannot improve on it and the
    # patience budget of one bad epoch is spent
    assert len(history) == 2
    assert history[0].train_loss == history[1].train_loss


def test_training_is_deterministic(tiny):
    data, graph = tiny
    config = GcaTrainConfig(max_epochs=20, patience=20)
    model_a, hist_a = train_gca(data, None, graph, config)
    model_b, hist_b = train_gca(data, None, graph, config)
    assert hist_a == hist_b
    for name in model_a.params:
        np.testing.assert_array_equal(model_a.params[name],
                                      model_b.params[name])


def test_best_validation_weights_are_returned():
    full = generate_synthetic_dataset(2, 4, 3, [20.0, 40.0, 60.0, 80.0, 50.0],
                                      seed=0)
    train, val = split_dataset(full, [20.0, 40.0, 60.0, 80.0], [50.0])
    graph = build_graph(full.mesh)
    config = GcaTrainConfig(noise_sigma=0.0, max_epochs=60, patience=60)
    model, history = train_gca(train, val, graph, config)

    fields = val.final_fields().T.copy()
    ts = (np.array(val.dwell_times) - model.dt_offset) / model.dt_scale
    revalidated = batch_loss(model.params, graph, fields, fields, ts,
                             config.lam)
    assert revalidated == min(h.val_loss for h in history)


def test_divergence_names_epoch_and_lr(tiny):
    data, graph = tiny
    config = GcaTrainConfig(lr_max=1e12, lr_min=1e12, noise_sigma=0.0,
                            max_epochs=50)
    with np.errstate(over="ignore", invalid="ignore"):
        with pytest.raises(DivergenceError, match=r"epoch \d+"):
            train_gca(data, None, graph, config)


def test_node_count_mismatch_is_rejected(tiny):
    data, _ = tiny
    other = generate_synthetic_dataset(2, 5, 3, [40.0], seed=0)
    with pytest.raises(ShapeError):
        train_gca(data, None, build_graph(other.mesh), GcaTrainConfig())
    with pytest.raises(ShapeError):
        train_gca(data, other, build_graph(data.mesh), GcaTrainConfig())


def test_history_records_schedule_and_losses(tiny):
    data, graph = tiny
    config = GcaTrainConfig(noise_sigma=0.0, max_epochs=12, patience=12,
                            warm_restart_t0=5, lr_max=1e-3, lr_min=1e-5)
    _, history = train_gca(data, None, graph, config)
    assert [h.epoch for h in history] == list(range(12))
    for h in history:
        assert h.lr == cosine_warm_restart_lr(h.epoch, 1e-3, 1e-5, 5,
                                              config.warm_restart_mult)
        assert h.train_loss == pytest.approx(h.l_rec + config.lam * h.l_param)
        assert math.isnan(h.val_loss)


# ------------------------------------------------------------ history csv ---


def test_history_csv_round_trip(tmp_path):
    history = [
        EpochRecord(epoch=0, lr=1e-3, train_loss=0.5, val_loss=0.6,
                    l_rec=0.4, l_param=0.2),
        EpochRecord(epoch=1, lr=9.7e-4, train_loss=1.0 / 3.0,
                    val_loss=float("nan"), l_rec=0.3, l_param=1.0 / 15.0),
    ]
    path = tmp_path / "history.csv"
    write_history_csv(history, path)

    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["epoch", "lr", "train_loss", "val_loss", "l_rec",
                       "l_param"]
    assert len(rows) == 3
    for row, record in zip(rows[1:], history):
        assert int(row[0]) == record.epoch
        assert float(row[1]) == record.lr
        assert float(row[2]) == record.train_loss  # repr round-trips exactly
        assert float(row[4]) == record.l_rec
        assert float(row[5]) == record.l_param
    assert math.isnan(float(rows[2][3]))
