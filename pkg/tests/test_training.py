"""Training stack: losses, Adam, checkpoints, and the loop itself."""

import json
import math
from collections import OrderedDict

import numpy as np
import pytest

from mtp.data import SyntheticSpec, generate_synthetic, load_manifest
from mtp.errors import ConfigError, DataError, FormatError, ShapeError
from mtp.model import MtpConfig, MtpParams, config_hash, init_params
from mtp.nn import backward, parameter
from mtp.training import (
    Adam,
    TrainConfig,
    evaluate_split,
    evaluation_report,
    load_checkpoint,
    loss_node,
    save_checkpoint,
    sigmoid,
    train,
)

SMALL_MODEL = MtpConfig(d_model=8, n_layers=1, ffn_hidden=12, dropout_p=0.0, seed=3)
SMALL_TRAIN = TrainConfig(epochs=25, lr=5e-3, batch_size=6, seed=5)


def _tiny_dataset(tmp_path, task="regression", seed=11):
    spec = SyntheticSpec(n_targets=2, samples_per_target=8, mol_rows=(3, 5),
                         target_rows=(8, 10), pocket_rows=(2, 4), d_mol=6,
                         d_pro=6, task=task, seed=seed)
    return load_manifest(generate_synthetic(spec, tmp_path / f"data_{task}"))


def _single_param(value):
    cfg = MtpConfig(d_model=2, n_layers=1)
    return MtpParams(OrderedDict(w=np.array(value, dtype=np.float64)), cfg, 1, 1)


# ---------------------------------------------------------------- losses

def test_regression_loss_values():
    pred = parameter([[3.0]])
    assert loss_node(pred, 1.0, "regression").value[0, 0] == 4.0
    assert loss_node(parameter([[1.0]]), 1.0, "regression").value[0, 0] == 0.0


def test_classification_loss_values():
    assert abs(loss_node(parameter([[0.0]]), 1, "classification").value[0, 0]
               - math.log(2.0)) < 1e-12
    assert abs(loss_node(parameter([[0.0]]), 0, "classification").value[0, 0]
               - math.log(2.0)) < 1e-12


def test_classification_loss_extreme_logits_stay_finite():
    with np.errstate(over="raise"):
        hit = loss_node(parameter([[500.0]]), 1, "classification").value[0, 0]
        miss = loss_node(parameter([[-500.0]]), 0, "classification").value[0, 0]
    assert 0.0 <= hit < 1e-12
    assert 0.0 <= miss < 1e-12
    big = loss_node(parameter([[-500.0]]), 1, "classification").value[0, 0]
    assert abs(big - 500.0) < 1e-9


def test_loss_rejects_bad_label_and_task():
    with pytest.raises(DataError):
        loss_node(parameter([[0.0]]), 0.5, "classification")
    with pytest.raises(DataError):
        loss_node(parameter([[0.0]]), 1.0, "ranking")


def test_loss_gradients_match_closed_form():
    z = parameter([[0.7]], name="z")
    grads = backward(loss_node(z, 2.0, "regression"), [z])
    assert abs(grads["z"][0, 0] - 2.0 * (0.7 - 2.0)) < 1e-12
    for label in (0.0, 1.0):
        z = parameter([[0.3]], name="z")
        grads = backward(loss_node(z, label, "classification"), [z])
        want = float(sigmoid(np.array([0.3]))[0]) - label
        assert abs(grads["z"][0, 0] - want) < 1e-12


def test_sigmoid_stable_and_symmetric():
    with np.errstate(over="raise"):
        out = sigmoid(np.array([-800.0, 0.0, 800.0]))
    assert out[1] == 0.5
    assert 0.0 <= out[0] < 1e-12 and 1.0 - 1e-12 < out[2] <= 1.0
    z = np.linspace(-5, 5, 11)
    assert np.abs(sigmoid(z) + sigmoid(-z) - 1.0).max() < 1e-12


# ---------------------------------------------------------------- Adam

def test_adam_first_step_hand_value():
    p = _single_param([[0.0]])
    opt = Adam(p, lr=0.1)
    opt.step({"w": np.array([[1.0]])})
    # mhat = vhat = 1 after bias correction, so the step is lr/(1 + eps)
    assert abs(p["w"][0, 0] + 0.1) < 1e-8


def test_adam_constant_gradient_gives_constant_steps():
    p = _single_param([[0.0]])
    opt = Adam(p, lr=0.1)
    prev = 0.0
    for _ in range(5):
        opt.step({"w": np.array([[1.0]])})
        step = prev - p["w"][0, 0]
        assert abs(step - 0.1) < 1e-7
        prev = p["w"][0, 0]


def test_adam_zero_gradient_is_exact_no_op():
    p = _single_param([[1.234567]])
    before = p["w"].copy()
    opt = Adam(p, lr=0.5)
    opt.step({"w": np.zeros((1, 1))})
    opt.step({})  # missing gradient counts as zero
    assert np.array_equal(p["w"], before)


def test_adam_descends_a_quadratic():
    p = _single_param([[5.0]])
    opt = Adam(p, lr=0.05)
    for _ in range(400):
        opt.step({"w": 2.0 * p["w"]})  # d/dw of w^2
    assert abs(p["w"][0, 0]) < 0.05


def test_adam_validation():
    p = _single_param([[0.0]])
    with pytest.raises(ConfigError):
        Adam(p, lr=0.0)
    with pytest.raises(ConfigError):
        Adam(p, beta1=1.0)
    with pytest.raises(ConfigError):
        Adam(p, eps=0.0)
    opt = Adam(p)
    with pytest.raises(ShapeError):
        opt.step({"w": np.zeros((2, 2))})


def test_adam_runs_are_deterministic():
    rng = np.random.default_rng(0)
    grads = [rng.standard_normal((1, 1)) for _ in range(10)]
    pa = _single_param([[1.0]])
    pb = _single_param([[1.0]])
    oa, ob = Adam(pa, lr=0.02), Adam(pb, lr=0.02)
    for g in grads:
        oa.step({"w": g})
        ob.step({"w": g})
    assert np.array_equal(pa["w"], pb["w"])


# ---------------------------------------------------------------- train config

def test_train_config_validation():
    with pytest.raises(ConfigError):
        TrainConfig(epochs=0).validate()
    with pytest.raises(ConfigError):
        TrainConfig(lr=0.0).validate()
    with pytest.raises(ConfigError):
        TrainConfig(batch_size=0).validate()
    with pytest.raises(ConfigError):
        TrainConfig(patience=-1).validate()
    with pytest.raises(ConfigError):
        TrainConfig(eval_split="val").validate()
    with pytest.raises(ConfigError) as err:
        TrainConfig.from_dict({"epochs": 5, "momentum": 0.9})
    assert "momentum" in str(err.value)
    assert TrainConfig.from_dict(TrainConfig().to_dict()) == TrainConfig()


# ---------------------------------------------------------------- checkpoints

def test_checkpoint_round_trip_bit_exact(tmp_path):
    params = init_params(SMALL_MODEL, 6, 6)
    path = save_checkpoint(params, tmp_path / "ck.bin")
    back = load_checkpoint(path)
    assert back.names() == params.names()
    assert back.config == params.config
    assert back.d_mol == 6 and back.d_pro == 6
    for name in params.names():
        assert back[name].dtype == params[name].dtype
        assert back[name].tobytes() == params[name].tobytes(), name


def test_checkpoint_save_is_deterministic(tmp_path):
    params = init_params(SMALL_MODEL, 6, 6)
    a = save_checkpoint(params, tmp_path / "a.bin").read_bytes()
    b = save_checkpoint(params, tmp_path / "b.bin").read_bytes()
    assert a == b


def test_checkpoint_rejects_corruption(tmp_path):
    params = init_params(SMALL_MODEL, 6, 6)
    good = save_checkpoint(params, tmp_path / "ck.bin").read_bytes()

    def expect_error(blob, needle):
        bad = tmp_path / "bad.bin"
        bad.write_bytes(blob)
        with pytest.raises(FormatError) as err:
            load_checkpoint(bad)
        assert needle in str(err.value)

    expect_error(b"XXXX" + good[4:], "magic")
    expect_error(good[:4] + b"\x09\x00" + good[6:], "version")
    flipped = bytearray(good)
    flipped[10] ^= 0xFF  # inside the stored config hash
    expect_error(bytes(flipped), "hash mismatch")
    expect_error(good[: len(good) // 2], "overruns")
    expect_error(good + b"\x00", "trailing")
    expect_error(good[:20], "truncated")


def test_checkpoint_missing_file(tmp_path):
    with pytest.raises(FormatError):
        load_checkpoint(tmp_path / "absent.bin")


# ---------------------------------------------------------------- evaluation

def test_evaluate_split_regression(tmp_path):
    ds = _tiny_dataset(tmp_path)
    params = init_params(SMALL_MODEL, ds.d_mol, ds.d_pro)
    loss, labels, preds = evaluate_split(params, ds, "test")
    assert loss >= 0.0
    assert labels.shape == preds.shape == (len(ds.split_samples("test")),)


def test_evaluate_split_classification_gives_probabilities(tmp_path):
    ds = _tiny_dataset(tmp_path, task="classification")
    cfg = MtpConfig(d_model=8, n_layers=1, ffn_hidden=12, dropout_p=0.0,
                    task="classification", seed=3)
    params = init_params(cfg, ds.d_mol, ds.d_pro)
    _, labels, preds = evaluate_split(params, ds, "test")
    assert set(labels) <= {0.0, 1.0}
    assert ((preds > 0.0) & (preds < 1.0)).all()


def test_evaluation_report_carries_config_hash(tmp_path):
    ds = _tiny_dataset(tmp_path)
    params = init_params(SMALL_MODEL, ds.d_mol, ds.d_pro)
    rep = evaluation_report(params, ds, "test")
    assert rep.config_hash == config_hash(SMALL_MODEL, ds.d_mol, ds.d_pro)
    assert rep.n == len(ds.split_samples("test"))


# ---------------------------------------------------------------- training loop

def test_train_smoke_regression(tmp_path):
    ds = _tiny_dataset(tmp_path)
    res = train(ds, SMALL_MODEL, SMALL_TRAIN, tmp_path / "run")
    losses = [r["train_loss"] for r in res.history]
    assert len(losses) == SMALL_TRAIN.epochs
    # robust decrease: huge drop overall, mostly non-increasing epochs
    assert losses[-1] < 0.5 * losses[0]
    assert losses[-1] < 0.25
    assert np.mean(np.diff(losses) <= 0) >= 0.6
    assert res.checkpoint_path.is_file()
    assert res.metrics_path.is_file()
    assert 0 <= res.best_epoch < SMALL_TRAIN.epochs
    assert res.best_eval_loss == min(r["eval_loss"] for r in res.history)


def test_train_metrics_log_is_json_lines(tmp_path):
    ds = _tiny_dataset(tmp_path)
    res = train(ds, SMALL_MODEL, SMALL_TRAIN, tmp_path / "run")
    lines = res.metrics_path.read_text().splitlines()
    assert len(lines) == len(res.history)
    for i, line in enumerate(lines):
        record = json.loads(line)
        assert record["epoch"] == i
        assert set(record) == {"epoch", "train_loss", "eval_loss", "eval_split",
                               "metrics", "improved"}
        assert record["eval_split"] == "test"


def test_train_checkpoint_holds_best_eval_params(tmp_path):
    ds = _tiny_dataset(tmp_path)
    res = train(ds, SMALL_MODEL, SMALL_TRAIN, tmp_path / "run")
    best = load_checkpoint(res.checkpoint_path)
    loss, _, _ = evaluate_split(best, ds, "test")
    assert abs(loss - res.best_eval_loss) < 1e-12


def test_train_reruns_are_byte_identical(tmp_path):
    ds = _tiny_dataset(tmp_path)
    a = train(ds, SMALL_MODEL, SMALL_TRAIN, tmp_path / "a")
    b = train(ds, SMALL_MODEL, SMALL_TRAIN, tmp_path / "b")
    assert a.checkpoint_path.read_bytes() == b.checkpoint_path.read_bytes()
    assert a.metrics_path.read_bytes() == b.metrics_path.read_bytes()


def test_train_seed_changes_outcome(tmp_path):
    ds = _tiny_dataset(tmp_path)
    short = TrainConfig(epochs=5, lr=5e-3, batch_size=6, seed=5)
    other = TrainConfig(epochs=5, lr=5e-3, batch_size=6, seed=6)
    a = train(ds, SMALL_MODEL, short, tmp_path / "a")
    b = train(ds, SMALL_MODEL, other, tmp_path / "b")
    assert a.checkpoint_path.read_bytes() != b.checkpoint_path.read_bytes()


def test_train_classification(tmp_path):
    ds = _tiny_dataset(tmp_path, task="classification")
    cfg = MtpConfig(d_model=8, n_layers=1, ffn_hidden=12, dropout_p=0.0,
                    task="classification", seed=3)
    res = train(ds, cfg, SMALL_TRAIN, tmp_path / "run")
    assert res.history[-1]["train_loss"] < 0.1
    assert res.history[-1]["metrics"]["auc"] >= 0.9


def test_train_task_mismatch(tmp_path):
    ds = _tiny_dataset(tmp_path, task="classification")
    with pytest.raises(ConfigError):
        train(ds, SMALL_MODEL, SMALL_TRAIN, tmp_path / "run")


def test_patience_matches_simulated_stop(tmp_path):
    """Early stopping must cut the unlimited history exactly where the rule
    says: stop after the first epoch whose distance from the last
    improvement exceeds the patience."""
    ds = _tiny_dataset(tmp_path)
    full = train(ds, SMALL_MODEL, SMALL_TRAIN, tmp_path / "full")
    improved = [r["improved"] for r in full.history]

    def simulate(patience):
        since = 0
        for epoch, flag in enumerate(improved):
            since = 0 if flag else since + 1
            if since > patience:
                return epoch + 1
        return len(improved)

    for patience in (0, 2):
        expected = simulate(patience)
        if expected == len(improved):
            continue
        cfg = TrainConfig(epochs=SMALL_TRAIN.epochs, lr=SMALL_TRAIN.lr,
                          batch_size=SMALL_TRAIN.batch_size, seed=SMALL_TRAIN.seed,
                          patience=patience)
        res = train(ds, SMALL_MODEL, cfg, tmp_path / f"p{patience}")
        assert len(res.history) == expected, patience
        # the stopped run retraces the unlimited run's prefix
        for got, want in zip(res.history, full.history[:expected]):
            assert got == want
