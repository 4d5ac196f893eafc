import numpy as np
import pytest

from rpn2 import datasets as ds
from rpn2 import fusion as fu
from rpn2 import interdependence as itd
from rpn2 import model as md
from rpn2 import reconciliation as rc
from rpn2 import transformation as tf
from rpn2.numeric_core import Prng


def _perceptron_head(m, n, remainder="zero", out_proc=None):
    return md.HeadConfig(m=m, n=n, expansion=tf.ExpansionSpec("identity"),
                         reconciliation=rc.ReconciliationSpec("identity", n=n, D=m),
                         remainder=remainder,
                         processors={"output": out_proc} if out_proc else {})


def _single(head):
    return md.ModelConfig([md.LayerConfig([head])])


def test_perceptron_reduction():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((5, 3))
    w = rng.standard_normal((4, 3))
    model = _single(_perceptron_head(3, 4))
    store = md.ParameterStore()
    store.add_slot("l0.h0.c0.psi", (12,), w.reshape(-1))
    out = md.model_forward(x, model, store)
    assert np.max(np.abs(out - x @ w.T)) < 1e-13


def test_two_channels_sum_equals_two_heads():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((4, 3))
    w1 = rng.standard_normal(6)
    w2 = rng.standard_normal(6)
    head2c = md.HeadConfig(m=3, n=2, expansion=tf.ExpansionSpec("identity"),
                           reconciliation=rc.ReconciliationSpec("identity", n=2, D=3),
                           channels=2, channel_fusion=fu.FusionSpec("sum"))
    store2 = md.ParameterStore()
    store2.add_slot("l0.h0.c0.psi", (6,), w1)
    store2.add_slot("l0.h0.c1.psi", (6,), w2)
    got = md.model_forward(x, _single(head2c), store2)
    want = x @ w1.reshape(2, 3).T + x @ w2.reshape(2, 3).T
    assert np.max(np.abs(got - want)) < 1e-13


def test_identical_heads_average_idempotent():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((4, 3))
    w = rng.standard_normal(6)
    layer = md.LayerConfig([_perceptron_head(3, 2), _perceptron_head(3, 2)],
                           fu.FusionSpec("average"))
    store = md.ParameterStore()
    store.add_slot("l0.h0.c0.psi", (6,), w)
    store.add_slot("l0.h1.c0.psi", (6,), w)
    got = md.model_forward(x, md.ModelConfig([layer]), store)
    assert np.max(np.abs(got - x @ w.reshape(2, 3).T)) < 1e-13


def test_three_layer_perceptron_chain_oracle():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((6, 4))
    ws = [rng.standard_normal((5, 4)), rng.standard_normal((3, 5)),
          rng.standard_normal((2, 3))]
    layers = []
    dims = [(4, 5), (5, 3), (3, 2)]
    for k, (m, n) in enumerate(dims):
        proc = "tanh" if k < 2 else None
        layers.append(md.LayerConfig([_perceptron_head(m, n, out_proc=proc)]))
    model = md.ModelConfig(layers)
    store = md.ParameterStore()
    for k, w in enumerate(ws):
        store.add_slot("l%d.h0.c0.psi" % k, (w.size,), w.reshape(-1))
    got = md.model_forward(x, model, store)
    want = np.tanh(np.tanh(x @ ws[0].T) @ ws[1].T) @ ws[2].T
    assert np.max(np.abs(got - want)) < 1e-12


def test_zero_extra_channel_under_sum_unchanged():
    rng = np.random.default_rng(4)
    x = rng.standard_normal((4, 3))
    w = rng.standard_normal(6)
    head1 = _perceptron_head(3, 2)
    head2 = md.HeadConfig(m=3, n=2, expansion=tf.ExpansionSpec("identity"),
                          reconciliation=rc.ReconciliationSpec("identity", n=2, D=3),
                          channels=2, channel_fusion=fu.FusionSpec("sum"))
    s1 = md.ParameterStore()
    s1.add_slot("l0.h0.c0.psi", (6,), w)
    s2 = md.ParameterStore()
    s2.add_slot("l0.h0.c0.psi", (6,), w)
    s2.add_slot("l0.h0.c1.psi", (6,), np.zeros(6))
    assert np.array_equal(md.model_forward(x, _single(head1), s1),
                          md.model_forward(x, _single(head2), s2))


def test_linearity_in_psi_parameters():
    rng = np.random.default_rng(5)
    x = rng.standard_normal((5, 3))
    head = md.HeadConfig(m=3, n=2, expansion=tf.ExpansionSpec("hermite", d=2),
                         reconciliation=rc.ReconciliationSpec("identity", n=2, D=6))
    model = _single(head)
    w1 = rng.standard_normal(12)
    w2 = rng.standard_normal(12)
    outs = []
    for w in (w1, w2, w1 + w2):
        store = md.ParameterStore()
        store.add_slot("l0.h0.c0.psi", (12,), w)
        outs.append(md.model_forward(x, model, store))
    assert np.max(np.abs(outs[2] - outs[0] - outs[1])) < 1e-12


def test_versatile_reduction_with_identity_interdeps():
    rng = np.random.default_rng(6)
    x = rng.standard_normal((5, 3))
    w = rng.standard_normal(6)
    plain = _perceptron_head(3, 2)
    dressed = md.HeadConfig(
        m=3, n=2, expansion=tf.ExpansionSpec("identity"),
        reconciliation=rc.ReconciliationSpec("identity", n=2, D=3),
        attr_prior=itd.InterdependenceSpec(itd.Identity(3)),
        inst_post=itd.InterdependenceSpec(itd.Identity(5), axis="instance"))
    s = md.ParameterStore()
    s.add_slot("l0.h0.c0.psi", (6,), w)
    assert np.allclose(md.model_forward(x, _single(plain), s),
                       md.model_forward(x, _single(dressed), s), atol=1e-13)


def test_station_dimension_mismatch_reported():
    head = md.HeadConfig(m=3, n=2, expansion=tf.ExpansionSpec("hermite", d=2),
                         reconciliation=rc.ReconciliationSpec("identity", n=2, D=5))
    store = md.init_store(_single(head), 0)
    with pytest.raises(ValueError, match="station"):
        md.model_forward(np.zeros((2, 3)), _single(head), store)


def test_quadratic_single_parameter_converges_to_least_squares():
    rng = np.random.default_rng(7)
    x = rng.standard_normal((50, 1))
    y = 3.0 * x
    head = _perceptron_head(1, 1)
    model = _single(head)
    hist, store = md.train(model, x, y, loss="mse",
                           optimizer={"kind": "sgd", "lr": 0.3}, epochs=200,
                           seed=1)
    w_opt = float((x.T @ y)[0, 0] / (x.T @ x)[0, 0])
    assert abs(store.vector[0] - w_opt) < 1e-6


def test_lr_zero_leaves_parameters_bit_identical():
    x, y = ds.two_moons(40, 0.1, 1)
    head = _perceptron_head(2, 2)
    model = _single(head)
    store0 = md.init_store(model, 9)
    before = store0.vector.copy()
    hist, store = md.train(model, x, y, loss="cross_entropy",
                           optimizer={"kind": "sgd", "lr": 0.0}, epochs=5,
                           seed=9)
    assert np.array_equal(store.vector, before)
    losses = [e["loss"] for e in hist.epochs]
    assert losses == [losses[0]] * 5


def test_training_nonincreasing_on_convex_task():
    rng = np.random.default_rng(8)
    x = rng.standard_normal((30, 3))
    y = x @ np.array([[1.0], [2.0], [-1.0]])
    model = _single(_perceptron_head(3, 1))
    hist, _ = md.train(model, x, y, loss="mse",
                       optimizer={"kind": "sgd", "lr": 1e-4}, epochs=10, seed=2)
    losses = [e["loss"] for e in hist.epochs]
    assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))


def test_training_determinism_and_momentum_adam():
    x, y = ds.two_moons(60, 0.1, 2)
    head1 = md.HeadConfig(m=2, n=6, expansion=tf.ExpansionSpec("hermite", d=2),
                          reconciliation=rc.ReconciliationSpec("lorr", n=6, D=4,
                                                               rank=2),
                          processors={"output": "tanh"})
    head2 = _perceptron_head(6, 2)
    model = md.ModelConfig([md.LayerConfig([head1]), md.LayerConfig([head2])])
    runs = []
    for _ in range(2):
        hist, store = md.train(model, x, y, loss="cross_entropy",
                               optimizer={"kind": "adaptive_moments", "lr": 0.05},
                               epochs=30, seed=4)
        runs.append(store.vector.copy())
    assert np.array_equal(runs[0], runs[1])
    hist_m, _ = md.train(model, x, y, loss="cross_entropy",
                         optimizer={"kind": "sgd", "lr": 0.1, "momentum": 0.9},
                         epochs=30, seed=4)
    assert np.isfinite(hist_m.epochs[-1]["loss"])


def test_init_store_seeded_and_bounded():
    head = md.HeadConfig(m=4, n=3, expansion=tf.ExpansionSpec("identity"),
                         reconciliation=rc.ReconciliationSpec("lorr", n=3, D=4,
                                                              rank=2),
                         remainder="linear")
    model = _single(head)
    s1 = md.init_store(model, 3)
    s2 = md.init_store(model, 3)
    s3 = md.init_store(model, 4)
    assert np.array_equal(s1.vector, s2.vector)
    assert not np.array_equal(s1.vector, s3.vector)
    assert np.max(np.abs(s1.vector)) <= 1.0 / np.sqrt(4)
    assert s1.total() == (3 + 4) * 2 + 4 * 3


def test_diagnostics_identity_rank_and_norms():
    rng = np.random.default_rng(9)
    b = 7
    x = rng.standard_normal((b, 3))
    head = md.HeadConfig(
        m=3, n=3, expansion=tf.ExpansionSpec("identity"),
        reconciliation=rc.ReconciliationSpec("constant_eye", n=3, D=3),
        inst_prior=itd.InterdependenceSpec(itd.Identity(b), axis="instance"))
    model = _single(head)
    store = md.init_store(model, 0)
    report = md.diagnostics(model, x, store)
    entry = report["layers"][0]
    assert entry["rank"] == b
    assert entry["norm_infinity"] == 1.0
    assert entry["nnz"] == b
    assert entry["norm_two_to_infinity_ax"] == pytest.approx(
        float(np.max(np.sqrt(np.sum(x * x, axis=1)))))


def test_diagnostics_parameter_total_lorr():
    head = md.HeadConfig(m=8, n=4, expansion=tf.ExpansionSpec("identity"),
                         reconciliation=rc.ReconciliationSpec("lorr", n=4, D=8,
                                                              rank=2))
    model = _single(head)
    store = md.init_store(model, 0)
    report = md.diagnostics(model, np.zeros((3, 8)), store)
    assert report["parameter_total"] == 24


def test_nonfinite_loss_aborts():
    rng = np.random.default_rng(10)
    x = rng.standard_normal((10, 2)) * 1e150
    y = rng.standard_normal((10, 1)) * 1e150
    model = _single(_perceptron_head(2, 1))
    with pytest.raises(FloatingPointError):
        md.train(model, x, y, loss="mse",
                 optimizer={"kind": "sgd", "lr": 1e200}, epochs=5, seed=0)
