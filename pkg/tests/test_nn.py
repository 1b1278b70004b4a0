import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from midistring.models.cnn import CnnClassifier
from midistring.models.train import classifier_loss, melody_loss
from midistring.models.transformer import MelodyTransformer, shift_right
from midistring.nn import tensor as T
from midistring.nn.checkpoint import Checkpoint, CheckpointError
from midistring.nn.gradcheck import gradient_check
from midistring.nn.layers import LayerNorm, Linear, MultiHeadAttention, causal_mask
from midistring.nn.optim import AdamState, adam_step
from midistring.nn.tensor import Tensor

TOL = 1e-4
F64 = np.float64


def _t(rng, *shape):
    return Tensor(rng.standard_normal(shape), requires_grad=True)


def _probe(out: Tensor, rng) -> Tensor:
    """Random linear functional of ``out`` so every output entry matters."""
    w = rng.standard_normal(out.shape)
    return T.total(T.mul(out, w))


# -- forward oracles -----------------------------------------------------------------


def conv_reference(x, w, b):
    n, c, h, wd = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    out = np.zeros((n, w.shape[0], h, wd))
    for o in range(w.shape[0]):
        for i in range(h):
            for j in range(wd):
                out[:, o, i, j] = (xp[:, :, i:i + 3, j:j + 3] * w[o]).sum(axis=(1, 2, 3)) + b[o]
    return out


def test_conv_matches_direct_loops():
    rng = np.random.default_rng(0)
    x, w, b = rng.standard_normal((2, 3, 6, 5)), rng.standard_normal((4, 3, 3, 3)), rng.standard_normal(4)
    got = T.conv2d(Tensor(x), Tensor(w), Tensor(b)).data
    assert np.allclose(got, conv_reference(x, w, b), atol=1e-12)


def test_maxpool_forward_and_tie_rule():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((2, 3, 4, 6))
    want = x.reshape(2, 3, 2, 2, 3, 2).max(axis=(3, 5))
    assert np.array_equal(T.maxpool2d(Tensor(x)).data, want)
    tied = Tensor(np.ones((1, 2, 2)), requires_grad=True)
    T.total(T.maxpool2d(tied)).backward()
    assert tied.grad.tolist() == [[[1.0, 0.0], [0.0, 0.0]]]


def test_softmax_mask_and_rows():
    rng = np.random.default_rng(2)
    s = T.softmax(Tensor(rng.standard_normal((3, 4, 4))), causal_mask(4)).data
    assert np.allclose(s.sum(-1), 1.0)
    assert np.all(s[..., np.triu_indices(4, 1)[0], np.triu_indices(4, 1)[1]] == 0)


def test_layer_norm_statistics():
    x = np.random.default_rng(3).standard_normal((5, 16)) * 4 + 2
    y = LayerNorm(16, F64)(Tensor(x)).data
    assert np.allclose(y.mean(-1), 0, atol=1e-10)
    assert np.allclose(y.var(-1), 1, atol=1e-3)


def test_cross_entropy_value():
    logits = np.array([[2.0, 0.0, -1.0]])
    want = -np.log(np.exp(2) / (np.exp(2) + 1 + np.exp(-1)))
    assert T.softmax_cross_entropy(Tensor(logits), [0]).data == pytest.approx(want, abs=1e-12)
    with pytest.raises(ValueError):
        T.softmax_cross_entropy(Tensor(logits), [3])


def test_bce_value_and_clamp():
    p = Tensor(np.array([0.5, 0.9]))
    want = -(np.log(0.5) + np.log(0.1)) / 2
    assert T.binary_cross_entropy(p, [1, 0]).data == pytest.approx(want, abs=1e-12)
    assert np.isfinite(T.binary_cross_entropy(Tensor(np.array([0.0, 1.0])), [1, 0]).data)


# -- gradient checks -----------------------------------------------------------------


def test_grad_conv2d():
    rng = np.random.default_rng(10)
    x, w, b = _t(rng, 2, 3, 5, 4), _t(rng, 2, 3, 3, 3), _t(rng, 2)
    probe = rng.standard_normal((2, 2, 5, 4))
    assert gradient_check(lambda: T.total(T.mul(T.conv2d(x, w, b), probe)), [x, w, b]) < TOL


def test_grad_maxpool():
    rng = np.random.default_rng(11)
    x = _t(rng, 2, 3, 4, 4)
    probe = rng.standard_normal((2, 3, 2, 2))
    assert gradient_check(lambda: T.total(T.mul(T.maxpool2d(x), probe)), [x]) < TOL


def test_grad_linear_and_relu():
    rng = np.random.default_rng(12)
    layer = Linear(5, 3, rng, dtype=F64)
    x = _t(rng, 4, 5)
    probe = rng.standard_normal((4, 3))
    fn = lambda: T.total(T.mul(T.relu(layer(x)), probe))  # noqa: E731
    assert gradient_check(fn, [x, layer.weight, layer.bias]) < TOL


def test_grad_layer_norm():
    rng = np.random.default_rng(13)
    ln = LayerNorm(6, F64)
    ln.gamma.data = rng.standard_normal(6)
    ln.beta.data = rng.standard_normal(6)
    x = _t(rng, 3, 6)
    probe = rng.standard_normal((3, 6))
    assert gradient_check(lambda: T.total(T.mul(ln(x), probe)), [x, ln.gamma, ln.beta]) < TOL


@pytest.mark.parametrize("causal", [False, True])
def test_grad_attention(causal):
    rng = np.random.default_rng(14)
    attn = MultiHeadAttention(8, 2, rng, F64)
    q, kv = _t(rng, 2, 4, 8), _t(rng, 2, 4, 8)
    probe = rng.standard_normal((2, 4, 8))
    params = [q, kv] + attn.parameters()
    assert gradient_check(lambda: T.total(T.mul(attn(q, kv, causal=causal), probe)), params) < TOL


def test_grad_sigmoid_softmax():
    rng = np.random.default_rng(15)
    x = _t(rng, 3, 5)
    probe = rng.standard_normal((3, 5))
    assert gradient_check(lambda: T.total(T.mul(T.sigmoid(x), probe)), [x]) < TOL
    assert gradient_check(lambda: T.total(T.mul(T.softmax(x), probe)), [x]) < TOL


def test_grad_softmax_cross_entropy():
    rng = np.random.default_rng(16)
    z = _t(rng, 6, 4)
    labels = rng.integers(0, 4, 6)
    assert gradient_check(lambda: T.softmax_cross_entropy(z, labels), [z]) < TOL


def test_grad_binary_cross_entropy():
    rng = np.random.default_rng(17)
    p = Tensor(rng.uniform(0.05, 0.95, (3, 4)), requires_grad=True)
    y = rng.integers(0, 2, (3, 4))
    assert gradient_check(lambda: T.binary_cross_entropy(p, y), [p]) < TOL


def test_grad_broadcast_ops():
    rng = np.random.default_rng(18)
    a, b = _t(rng, 3, 4), _t(rng, 4)
    probe = rng.standard_normal((3, 4))
    fn = lambda: T.total(T.mul(T.sub(T.mul(a, b), T.add(a, b)), probe))  # noqa: E731
    assert gradient_check(fn, [a, b]) < TOL


def test_grad_full_cnn():
    model = CnnClassifier(n_genres=3, n_styles=2, size=8, seed=0, dtype=F64)
    rng = np.random.default_rng(19)
    x = rng.random((2, 4, 8, 8))
    g, s = np.array([0, 2]), np.array([1, 0])
    fn = lambda: classifier_loss(model, x, g, s, train=False)  # noqa: E731
    assert gradient_check(fn, model.parameters(), max_entries=25) < TOL


def test_grad_full_transformer():
    model = MelodyTransformer(n_pitches=6, d_model=8, heads=2, d_ff=16, layers=2, steps=4, seed=0, dtype=F64)
    rng = np.random.default_rng(20)
    src, tgt = rng.integers(0, 2, (2, 4, 6)), rng.integers(0, 2, (2, 4, 6))
    fn = lambda: melody_loss(model, src, tgt)  # noqa: E731
    assert gradient_check(fn, model.parameters(), max_entries=20) < TOL


# -- model contracts -----------------------------------------------------------------


def test_cnn_shapes_at_full_size():
    model = CnnClassifier(seed=0)
    g, s = model(np.zeros((1, 4, 128, 128), dtype=np.float32))
    assert g.shape == (1, 13) and s.shape == (1, 25)
    assert model.shapes == {"pool1": (32, 64, 64), "pool2": (64, 32, 32), "flat": (65536,), "fc": (128,)}


def test_cnn_initial_loss_near_uniform():
    model = CnnClassifier(seed=0)
    x = np.random.default_rng(0).integers(0, 2, (4, 4, 128, 128)).astype(np.float32)
    loss = float(classifier_loss(model, x, [0, 1, 2, 3], [0, 1, 2, 3], train=False).data)
    assert loss == pytest.approx(np.log(13) + np.log(25), abs=0.05)


def test_cnn_rejects_wrong_shape():
    with pytest.raises(ValueError):
        CnnClassifier(size=8)(np.zeros((1, 3, 8, 8)))


def test_dropout_train_vs_eval():
    model = CnnClassifier(n_genres=2, n_styles=2, size=8, seed=0)
    x = np.random.default_rng(0).random((2, 4, 8, 8)).astype(np.float32)
    e1, e2 = model(x)[0].data, model(x)[0].data
    assert np.array_equal(e1, e2)
    t1, t2, t3 = (model(x, train=True, step=k)[0].data for k in (0, 0, 1))
    assert np.array_equal(t1, t2) and not np.array_equal(t1, t3)


def test_inverted_dropout_expectation():
    rng = np.random.default_rng(4)
    out = T.dropout(Tensor(np.ones(200_000)), 0.5, rng, True).data
    assert set(np.unique(out)) == {0.0, 2.0}
    assert out.mean() == pytest.approx(1.0, abs=0.01)
    assert T.dropout(Tensor(np.ones(3)), 0.5, None, False).data.tolist() == [1, 1, 1]


def test_transformer_outputs_and_causality():
    model = MelodyTransformer(n_pitches=6, d_model=8, heads=2, d_ff=16, layers=2, steps=5, seed=1, dtype=F64)
    rng = np.random.default_rng(5)
    src, tgt = rng.integers(0, 2, (1, 5, 6)), rng.integers(0, 2, (1, 5, 6))
    p = model(src, tgt).data
    assert np.all((p > 0) & (p < 1))
    t = 2
    tgt2 = tgt.copy()
    tgt2[0, t] = 1 - tgt2[0, t]
    p2 = model(src, tgt2).data
    # decoder input is shifted right, so target row t feeds prediction rows > t only
    assert np.array_equal(p[0, :t + 1], p2[0, :t + 1])
    assert not np.allclose(p[0, t + 1:], p2[0, t + 1:])


def test_shift_right():
    x = np.arange(6).reshape(3, 2)
    assert shift_right(x).tolist() == [[0, 0], [0, 1], [2, 3]]


def test_transformer_initial_loss():
    model = MelodyTransformer(seed=0)
    rng = np.random.default_rng(6)
    src, tgt = rng.integers(0, 2, (2, 64, 128)), rng.integers(0, 2, (2, 64, 128))
    assert float(melody_loss(model, src, tgt).data) == pytest.approx(np.log(2), abs=0.05)


# -- optimizer -----------------------------------------------------------------------


def test_adam_matches_hand_computation():
    p = Tensor(np.array([1.0, -2.0]), requires_grad=True)
    st_ = AdamState.for_params([p], lr=0.1)
    g1, g2 = np.array([0.5, -1.0]), np.array([0.25, 3.0])
    m = v = np.zeros(2)
    want = p.data.copy()
    for t, g in enumerate((g1, g2), 1):
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        want = want - 0.1 * (m / (1 - 0.9 ** t)) / (np.sqrt(v / (1 - 0.999 ** t)) + 1e-8)
        adam_step([p], st_, [g])
    assert np.allclose(p.data, want, atol=1e-15)
    assert st_.t == 2


def test_adam_first_step_is_lr_sign():
    p = Tensor(np.array([0.0, 0.0, 0.0]), requires_grad=True)
    adam_step([p], AdamState.for_params([p], lr=1e-3), [np.array([5.0, -0.1, 0.0])])
    assert np.allclose(p.data, [-1e-3, 1e-3, 0.0], atol=1e-10)


@settings(max_examples=25, deadline=None)
@given(st.floats(1e-3, 1e3), st.floats(-1e3, 1e3))
def test_adam_step_bounded_by_lr(scale, g):
    p = Tensor(np.array([0.0]), requires_grad=True)
    adam_step([p], AdamState.for_params([p], lr=0.01), [np.array([g * scale])])
    assert abs(p.data[0]) <= 0.01 + 1e-12


# -- checkpoints ---------------------------------------------------------------------


def test_checkpoint_round_trip(tmp_path):
    arrays = {"a": np.arange(6, dtype=np.float32).reshape(2, 3), "b": np.array([1.5], dtype=np.float64),
              "c": np.zeros((0, 4), dtype=np.int64)}
    ck = Checkpoint("cnn", {"n": 1}, arrays, {"rng": {"seed": 3}})
    path = tmp_path / "x.ckpt"
    ck.save(path)
    back = Checkpoint.load(path)
    assert back.kind == "cnn" and back.config == {"n": 1} and back.extra == {"rng": {"seed": 3}}
    for k, v in arrays.items():
        assert back.arrays[k].dtype == v.dtype and np.array_equal(back.arrays[k], v)
    assert back.to_bytes() == ck.to_bytes()


def test_checkpoint_rejects_garbage():
    good = Checkpoint("x", {}, {"a": np.ones(4)}).to_bytes()
    with pytest.raises(CheckpointError):
        Checkpoint.from_bytes(b"NOTACKPT" + good[8:])
    with pytest.raises(CheckpointError):
        Checkpoint.from_bytes(good[:-5])


def test_model_state_round_trip():
    m1 = MelodyTransformer(n_pitches=6, d_model=8, heads=2, d_ff=16, layers=1, steps=4, seed=0)
    m2 = MelodyTransformer(n_pitches=6, d_model=8, heads=2, d_ff=16, layers=1, steps=4, seed=9)
    m2.load_state_dict(m1.state_dict())
    x = np.ones((1, 4, 6))
    assert np.array_equal(m1(x, x).data, m2(x, x).data)
