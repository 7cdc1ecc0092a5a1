import numpy as np
import pytest

from oracles import max_relative_error
from uaseg.core import InvalidInputError, NumericError
from uaseg.losses import LossConfig, combined_loss
from uaseg.synthetic import disc_task, two_class_task
from uaseg.toy import (
    ToyHead,
    TrainConfig,
    backward,
    evaluate_soft_iou,
    forward,
    mc_forward,
    objective,
    train,
    write_trace,
)


@pytest.fixture(scope="module")
def data():
    return disc_task(2, 16, seed=3)


def test_forward_shape_and_determinism(data):
    head = ToyHead.init(1, seed=0)
    img = data[0][0]
    a = forward(head, img)
    assert a.shape == (1, 16, 16)
    assert forward(head, img).tobytes() == a.tobytes()


def test_stochastic_forward_seeded():
    img = disc_task(1, 32, seed=0)[0][0]
    head = ToyHead.init(1, seed=1, noise_rate=0.2)
    assert forward(head, img, True, 5).tobytes() == forward(head, img, True, 5).tobytes()
    for s in range(20):
        assert not np.array_equal(forward(head, img, True, 2 * s), forward(head, img, True, 2 * s + 1))


def test_backward_matches_finite_differences(data):
    g = np.random.default_rng(0)
    head = ToyHead.init(2, seed=4)
    img = data[0][0]
    weights = g.normal(size=(2, 16, 16))
    grads = backward(head, img, weights)
    flat = head.flat()
    analytic = np.concatenate([grads[k].ravel() for k in ("w1", "b1", "w2", "b2")])
    idx = g.choice(flat.size, 12, replace=False)

    def f(v):
        return float((forward(head.with_flat(v), img) * weights).sum())

    numeric = []
    for i in idx:
        e = np.zeros_like(flat)
        e[i] = 1e-5
        numeric.append((f(flat + e) - f(flat - e)) / 2e-5)
    assert max_relative_error(analytic[idx], np.array(numeric)) < 1e-6


def test_train_step_gradient_probe():
    data = two_class_task(2, 12, seed=1)
    head = ToyHead.init(2, seed=2, noise_rate=0.3)
    cfg = LossConfig(alpha=0.4, beta=0.2, epsilon=1e-3, mc_samples=4)
    maps = [mc_forward(head, img, 4, 10 + i) for i, (img, _) in enumerate(data)]
    assert all(m.max() > 0 for m in maps)
    _, grads = objective(head, data, cfg, maps)
    flat = head.flat()
    analytic = np.concatenate([grads[k].ravel() for k in ("w1", "b1", "w2", "b2")])
    probe = [5, flat.size - 12, flat.size - 1]

    def f(v):
        return objective(head.with_flat(v), data, cfg, maps)[0].total

    numeric = []
    for i in probe:
        e = np.zeros_like(flat)
        e[i] = 1e-5
        numeric.append((f(flat + e) - f(flat - e)) / 2e-5)
    assert max_relative_error(analytic[probe], np.array(numeric)) < 1e-4


def test_mc_forward_properties(data):
    img = data[0][0]
    assert np.all(mc_forward(ToyHead.init(1, 0, noise_rate=0.0), img, 10, 1) == 0)
    head = ToyHead.init(1, 0, noise_rate=0.2)
    u = mc_forward(head, img, 10, 1)
    assert u.shape == (16, 16) and u.min() >= 0 and u.max() <= 0.5 and u.max() > 0
    assert mc_forward(head, img, 10, 1).tobytes() == u.tobytes()
    with pytest.raises(InvalidInputError):
        mc_forward(head, img, 1, 1)


def test_zero_learning_rate(data):
    head = ToyHead.init(1, seed=0, noise_rate=0.2)
    trained, trace = train(head, data, TrainConfig(steps=5, learning_rate=0.0))
    assert trained.flat().tobytes() == head.flat().tobytes()
    rows = np.array([[b.bce, b.iou_loss, b.c] for _, b in trace])
    assert np.all(rows == rows[0])

    quiet = ToyHead.init(1, seed=0, noise_rate=0.0)
    _, trace = train(quiet, data, TrainConfig(steps=5, learning_rate=0.0))
    assert len({b.total for _, b in trace}) == 1


def test_train_does_not_mutate_input(data):
    head = ToyHead.init(1, seed=0)
    before = head.flat().copy()
    train(head, data, TrainConfig(steps=3))
    assert np.array_equal(head.flat(), before)


def test_training_is_deterministic(data):
    cfg = TrainConfig(steps=5, seed=9)
    a = train(ToyHead.init(1, seed=0), data, cfg)
    b = train(ToyHead.init(1, seed=0), data, cfg)
    assert a[0].flat().tobytes() == b[0].flat().tobytes()
    assert a[1] == b[1]


def test_divergence_is_reported(data):
    with pytest.raises(NumericError, match="diverged"):
        train(ToyHead.init(1, seed=0), data, TrainConfig(steps=5, learning_rate=float("inf")))


def test_bad_dataset():
    with pytest.raises(InvalidInputError):
        train(ToyHead.init(1), [], TrainConfig(steps=1))
    img = np.zeros((4, 4, 3))
    with pytest.raises(InvalidInputError):
        train(ToyHead.init(2), [(img, np.zeros((1, 4, 4)))], TrainConfig(steps=1))


def test_two_class_training_reduces_loss():
    data = two_class_task(3, 24, seed=0)
    head, trace = train(ToyHead.init(2, seed=0), data, TrainConfig(steps=40, learning_rate=0.5))
    assert trace[-1][1].total < trace[0][1].total
    assert evaluate_soft_iou(head, data) > evaluate_soft_iou(ToyHead.init(2, seed=0), data)


def test_params_and_trace_files(tmp_path, data):
    head, trace = train(ToyHead.init(1, seed=0), data, TrainConfig(steps=3))
    head.save(tmp_path)
    loaded = ToyHead.load(tmp_path)
    assert loaded.flat().tobytes() == head.flat().tobytes()
    assert (tmp_path / "params.bin").stat().st_size == head.flat().size * 8
    write_trace(tmp_path / "trace.csv", trace)
    lines = (tmp_path / "trace.csv").read_text().splitlines()
    assert lines[0] == "step,bce,iou_loss,c,w_mean,r,total"
    assert len(lines) == 4


def test_loss_gradient_flows_through_head(data):
    head = ToyHead.init(1, seed=0)
    img, target = data[0]
    br, g = combined_loss(forward(head, img), target, np.zeros((16, 16)))
    assert np.isfinite(br.total) and np.any(backward(head, img, g)["w1"] != 0)
