import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scarcelearn.deepnet import (AUTOENCODER, CLASSIFIER, CROSS_ENTROPY, NO_DROPOUT, SQUARED_ERROR, DeepNet,
                                 DropoutConfig, FinetuneConfig, Layer, NetworkSpec, build_autoencoder,
                                 build_classifier, extract_representation, finetune, forward, loss_and_grads,
                                 one_hot, predict_classes, pretrain_stack, random_stack)
from scarcelearn.errors import DivergenceError, InputError, ParameterError, ShapeError
from scarcelearn.rbm import BERNOULLI, GAUSSIAN, CdConfig


def small_net(topology, sizes=(5, 4, 3), seed=0):
    spec = NetworkSpec(sizes[1:], input_dim=sizes[0])
    stack = random_stack(spec, seed)
    rng = np.random.default_rng(seed + 100)
    for r in stack:  # larger weights so the gradients are not trivially small
        r.W[:] = rng.normal(0, 0.5, r.W.shape)
        r.b[:] = rng.normal(0, 0.1, r.b.shape)
        r.c[:] = rng.normal(0, 0.1, r.c.shape)
    net = build_classifier(stack) if topology == CLASSIFIER else build_autoencoder(stack)
    if topology == CLASSIFIER:
        net.layers[-1].W[:] = rng.normal(0, 0.5, net.layers[-1].W.shape)
    return net


def numeric_grads(net, x, t, loss, h=1e-6):
    out = []
    for p in net.params():
        g = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            orig = p[idx]
            p[idx] = orig + h
            up, _ = loss_and_grads(net, x, t, loss=loss)
            p[idx] = orig - h
            down, _ = loss_and_grads(net, x, t, loss=loss)
            p[idx] = orig
            g[idx] = (up - down) / (2 * h)
        out.append(g)
    return out


def blobs(rng, n=80, d=6, sep=3.0):
    y = np.repeat([0, 1], n // 2)
    x = rng.normal(0, 1, (n, d))
    x[:, 0] += np.where(y == 1, sep, -sep)
    return x, y


# -- specs and construction ------------------------------------------------------

def test_spec_parse_and_label():
    s = NetworkSpec.parse("600-200-100-20")
    assert s.hidden_sizes == (600, 200, 100, 20)
    assert s.label == "600-200-100-20"
    assert NetworkSpec.parse("20").hidden_sizes == (20,)
    with pytest.raises(ParameterError):
        NetworkSpec((100, 0))
    with pytest.raises(ParameterError):
        NetworkSpec(())


def test_dropout_config():
    assert not DropoutConfig().enabled
    assert DropoutConfig.parse("0.2,0.5") == DropoutConfig(0.2, 0.5)
    with pytest.raises(ParameterError):
        DropoutConfig(1.0, 0.0)
    with pytest.raises(ParameterError):
        DropoutConfig.parse("0.2")


def test_finetune_config_validation():
    with pytest.raises(ParameterError):
        FinetuneConfig(iterations=-1)
    with pytest.raises(ParameterError):
        FinetuneConfig(loss="hinge")


def test_build_classifier_shapes():
    net = build_classifier(random_stack(NetworkSpec((100, 20))))
    assert net.layer_sizes == [312, 100, 20, 2]
    assert net.representation_size == 20
    assert net.loss == CROSS_ENTROPY
    assert not net.layers[-1].W.any()


def test_build_autoencoder_shapes_and_tied_init():
    stack = random_stack(NetworkSpec((100, 20)), seed=4)
    net = build_autoencoder(stack)
    assert net.layer_sizes == [312, 100, 20, 100, 312]
    assert net.representation_layer_index == 2
    assert net.loss == SQUARED_ERROR
    np.testing.assert_array_equal(net.layers[3].W, stack[0].W.T)
    np.testing.assert_array_equal(net.layers[2].W, stack[1].W.T)
    assert net.layers[-1].activation == "linear"


def test_build_rejects_empty_stack():
    with pytest.raises(ParameterError):
        build_classifier([])
    with pytest.raises(ParameterError):
        build_autoencoder([])


def test_deepnet_rejects_bad_chain():
    with pytest.raises(ShapeError):
        DeepNet(CLASSIFIER, [Layer(np.zeros((3, 2)), np.zeros(2)), Layer(np.zeros((4, 2)), np.zeros(2))], 1)


def test_pretrain_stack_shapes_and_traces():
    rng = np.random.default_rng(0)
    spec = NetworkSpec((8, 3), input_dim=6)
    traces = []
    stack = pretrain_stack(rng.normal(size=(50, 6)), spec, CdConfig(iterations=3), traces)
    assert [(r.n_visible, r.n_hidden) for r in stack] == [(6, 8), (8, 3)]
    assert [r.kind for r in stack] == [GAUSSIAN, BERNOULLI]
    assert len(traces) == 2 and all(len(t) == 3 for t in traces)
    with pytest.raises(ShapeError):
        pretrain_stack(np.zeros((5, 7)), spec, CdConfig(iterations=1))


# -- forward pass ---------------------------------------------------------------------

@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_softmax_rows_sum_to_one(seed):
    net = small_net(CLASSIFIER, seed=seed % 1000)
    x = np.random.default_rng(seed).normal(0, 3, (7, 5))
    out = forward(net, x)[-1]
    np.testing.assert_allclose(out.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(out >= 0)


def test_forward_shape_error():
    with pytest.raises(ShapeError):
        forward(small_net(CLASSIFIER), np.zeros((2, 4)))


def test_forward_mode_checks():
    net = small_net(CLASSIFIER)
    with pytest.raises(ParameterError):
        forward(net, np.zeros((1, 5)), mode="eval")
    with pytest.raises(ParameterError):
        forward(net, np.zeros((1, 5)), mode="train")


def test_no_dropout_train_and_test_agree():
    net = small_net(AUTOENCODER)
    x = np.random.default_rng(0).normal(size=(4, 5))
    a = forward(net, x, NO_DROPOUT, mode="train", rng=1)
    b = forward(net, x, NO_DROPOUT, mode="test")
    for u, v in zip(a, b):
        np.testing.assert_allclose(u, v)


def test_test_mode_matches_expected_first_layer_input():
    # test-mode pre-activation equals the Monte-Carlo mean of train-mode pre-activations
    net = small_net(CLASSIFIER, sizes=(6, 4, 3))
    d = DropoutConfig(0.2, 0.5)
    x = np.random.default_rng(2).normal(size=(1, 6))
    rng = np.random.default_rng(3)
    W, b = net.layers[0].W, net.layers[0].b
    masks = rng.random((20000, 6)) < 0.8
    mc = ((x * masks) @ W + b).mean(axis=0)
    exact = x @ (W * 0.8) + b
    np.testing.assert_allclose(mc, exact[0], atol=0.02)
    # and the library's test-mode layer-1 output is sigmoid of that
    from scipy.special import expit
    np.testing.assert_allclose(forward(net, x, d)[1][0], expit(exact[0]))


# -- gradients ------------------------------------------------------------------------

@pytest.mark.parametrize("topology", [CLASSIFIER, AUTOENCODER])
def test_gradients_match_finite_differences(topology):
    net = small_net(topology, seed=5)
    rng = np.random.default_rng(6)
    x = rng.normal(size=(4, 5))
    t = one_hot(rng.integers(0, 2, 4)) if topology == CLASSIFIER else x
    _, grads = loss_and_grads(net, x, t)
    for ana, num in zip(grads, numeric_grads(net, x, t, net.loss)):
        rel = np.abs(ana - num) / np.maximum(np.abs(ana) + np.abs(num), 1e-7)
        assert rel.max() < 1e-5


def test_dropout_gradient_matches_masked_network():
    # with a fixed rng the dropout gradient is the gradient of the masked net
    net = small_net(CLASSIFIER, seed=8)
    x = np.random.default_rng(1).normal(size=(3, 5))
    t = one_hot([0, 1, 1])
    d = DropoutConfig(0.3, 0.4)
    v1, g1 = loss_and_grads(net, x, t, d, np.random.default_rng(11))
    v2, g2 = loss_and_grads(net, x, t, d, np.random.default_rng(11))
    assert v1 == v2
    for a, b in zip(g1, g2):
        np.testing.assert_array_equal(a, b)
    with pytest.raises(ParameterError):
        loss_and_grads(net, x, t, d)


def test_squared_error_loss_definition():
    net = small_net(AUTOENCODER)
    x = np.random.default_rng(0).normal(size=(6, 5))
    value, _ = loss_and_grads(net, x, x)
    out = forward(net, x)[-1]
    assert value == pytest.approx(0.5 * np.sum((out - x) ** 2) / 6)


# -- fine-tuning -------------------------------------------------------------------------

def test_finetune_zero_iterations_or_rate_leaves_weights():
    net = small_net(CLASSIFIER)
    x = np.random.default_rng(0).normal(size=(10, 5))
    t = one_hot(np.arange(10) % 2)
    for cfg in (FinetuneConfig(iterations=0), FinetuneConfig(iterations=5, learning_rate=0.0)):
        out, _ = finetune(net, x, t, NO_DROPOUT, cfg)
        for a, b in zip(out.params(), net.params()):
            np.testing.assert_array_equal(a, b)


def test_finetune_separable_toy_reaches_full_accuracy():
    x, y = blobs(np.random.default_rng(0))
    net = build_classifier(random_stack(NetworkSpec((10,), input_dim=6), 1))
    net, trace = finetune(net, x, one_hot(y), NO_DROPOUT, FinetuneConfig(learning_rate=0.1, iterations=300))
    assert np.mean(predict_classes(net, x) == y) == 1.0
    assert trace[-1] < trace[0]


def test_finetune_deterministic():
    x, y = blobs(np.random.default_rng(1))
    net = build_classifier(random_stack(NetworkSpec((8, 4), input_dim=6), 2))
    cfg = FinetuneConfig(iterations=20, seed=3)
    a, ta = finetune(net, x, one_hot(y), DropoutConfig(0.2, 0.5), cfg)
    b, tb = finetune(net, x, one_hot(y), DropoutConfig(0.2, 0.5), cfg)
    assert ta == tb
    np.testing.assert_array_equal(a.layers[0].W, b.layers[0].W)


def test_finetune_input_checks():
    net = small_net(CLASSIFIER)
    with pytest.raises(ShapeError):
        finetune(net, np.zeros((3, 5)), one_hot([0, 1]), NO_DROPOUT, FinetuneConfig(iterations=1))
    with pytest.raises(InputError):
        finetune(net, np.zeros((0, 5)), np.zeros((0, 2)), NO_DROPOUT, FinetuneConfig(iterations=1))


def test_finetune_divergence():
    x, y = blobs(np.random.default_rng(0))
    net = build_autoencoder(random_stack(NetworkSpec((10,), input_dim=6), 1))
    with pytest.raises(DivergenceError):
        finetune(net, x * 1e3, x * 1e3, NO_DROPOUT, FinetuneConfig(learning_rate=10.0, iterations=200))


def test_pretrained_autoencoder_reconstructs_better_than_random():
    rng = np.random.default_rng(0)
    basis = rng.normal(size=(3, 12))
    x = rng.normal(size=(300, 3)) @ basis + 0.1 * rng.normal(size=(300, 12))
    x = (x - x.mean(0)) / x.std(0)
    spec = NetworkSpec((16, 6), input_dim=12)

    def recon(stack):
        net = build_autoencoder(stack)
        return np.mean((forward(net, x)[-1] - x) ** 2)

    trained = pretrain_stack(x, spec, CdConfig(iterations=200, seed=1))
    assert recon(trained) <= recon(random_stack(spec, 1))


def test_representation_width_and_range():
    net = build_autoencoder(random_stack(NetworkSpec((100, 20)), 0))
    z = extract_representation(net, np.random.default_rng(0).normal(size=(9, 312)))
    assert z.shape == (9, 20)
    assert np.all((z > 0) & (z < 1))


def test_predict_classes_requires_classifier():
    with pytest.raises(ParameterError):
        predict_classes(small_net(AUTOENCODER), np.zeros((1, 5)))
