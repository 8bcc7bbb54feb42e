import numpy as np
import pytest

from amlgame.classifier import (
    PARAM_ORDER,
    ClassifierModel,
    TrainConfig,
    TrainingError,
    evaluate,
    load_model,
    predict,
    save_model,
    train,
    train_arrays,
)
from amlgame.waveform import ChannelParams, IqFrame, OccupancyProcess, RngSeed, gen_dataset


def _tiny():
    rng = np.random.default_rng(11)
    model = ClassifierModel.init(5, rng)
    for k in ("conv_b", "b1", "b2"):
        model.params[k] = rng.normal(scale=0.1, size=model.params[k].shape)
    x = rng.normal(size=(4, 2, 5))
    y = np.array([0, 1, 1, 0])
    mask = (rng.random((4, 32)) >= 0.1) / 0.9
    return model, x, y, mask


@pytest.mark.parametrize("name", PARAM_ORDER)
def test_gradients_match_finite_differences(name):
    model, x, y, mask = _tiny()
    _, grads = model.loss_and_grads(x, y, mask)
    w = model.params[name]
    fd = np.zeros_like(w)
    h = 1e-6
    for idx in np.ndindex(w.shape):
        old = w[idx]
        w[idx] = old + h
        lp = model.loss_and_grads(x, y, mask)[0]
        w[idx] = old - h
        lm = model.loss_and_grads(x, y, mask)[0]
        w[idx] = old
        fd[idx] = (lp - lm) / (2 * h)
    rel = np.linalg.norm(grads[name] - fd) / max(np.linalg.norm(grads[name]) + np.linalg.norm(fd), 1e-12)
    assert rel < 1e-4


def test_softmax_outputs_and_zero_frame(defender):
    frames = gen_dataset(50, OccupancyProcess(), ChannelParams(), RngSeed(5))
    probs = defender.predict_proba(np.stack([f.iq for f in frames]))
    assert np.allclose(probs.sum(1), 1.0, atol=1e-6)
    assert np.all(probs >= 0)
    pred = predict(defender, IqFrame(np.zeros((2, 16)), False))
    assert pred.label in (0, 1) and 0.5 <= pred.confidence <= 1.0


def test_shape_mismatch_rejected(defender):
    with pytest.raises(ValueError):
        predict(defender, IqFrame(np.zeros((2, 8)), False))


def test_accuracy_gate_and_loss_decrease(defender):
    assert defender.accuracy >= 0.95
    assert defender.loss_history[-1] <= defender.loss_history[0]


def test_high_snr_probe(defender):
    probe = gen_dataset(200, OccupancyProcess(1.0), ChannelParams(snr_db=20.0), RngSeed(6))
    labels, conf = defender.predict_arrays(np.stack([f.iq for f in probe]))
    assert labels.mean() > 0.95
    assert np.median(conf[labels == 1]) > 0.9


def test_single_class_rejected():
    frames = gen_dataset(40, OccupancyProcess(0.0), ChannelParams(), RngSeed(1))
    with pytest.raises(ValueError):
        train(frames, TrainConfig(epochs=1))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_nonfinite_loss_aborts():
    x = np.full((8, 2, 16), 1e308)
    y = np.array([0, 1] * 4)
    with pytest.raises(TrainingError):
        train_arrays(x, y, TrainConfig(epochs=2, learning_rate=1e3))


def test_training_is_deterministic():
    frames = gen_dataset(120, OccupancyProcess(), ChannelParams(), RngSeed(8))
    cfg = TrainConfig(epochs=3, seed=RngSeed(1, 2))
    a, b = train(frames, cfg), train(frames, cfg)
    for k in PARAM_ORDER:
        assert np.array_equal(a.params[k], b.params[k])


def test_evaluate_identities(defender, default_split):
    _, test_set = default_split
    acc = evaluate(defender, test_set)
    flipped = [IqFrame(f.iq, not f.occupied) for f in test_set]
    assert evaluate(defender, flipped) == pytest.approx(1 - acc)
    labels, _ = defender.predict_arrays(np.stack([f.iq for f in test_set]))
    agree = [IqFrame(f.iq, bool(l)) for f, l in zip(test_set, labels)]
    assert evaluate(defender, agree) == 1.0
    with pytest.raises(ValueError):
        evaluate(defender, [])


def test_save_load_bit_exact(defender, tmp_path):
    p = tmp_path / "m.bin"
    save_model(defender, p, meta={"k": 1})
    m = load_model(p)
    for k in PARAM_ORDER:
        assert m.params[k].tobytes() == defender.params[k].tobytes()
    assert m.seed == defender.seed and m.accuracy == defender.accuracy
    save_model(m, tmp_path / "m2.bin", meta={"k": 1})
    assert (tmp_path / "m2.bin").read_bytes() == p.read_bytes()


def test_load_rejects_garbage(tmp_path):
    p = tmp_path / "bad.bin"
    p.write_bytes(b"not a model\n123")
    with pytest.raises(ValueError):
        load_model(p)
