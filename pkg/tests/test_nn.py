import math

import numpy as np
import pytest

from typoguard import nn
from typoguard.modelio import ModelFormatError, load_model, save_model

from gradcheck import assert_gradients_match, float64_params


def t64(data):
    return nn.Tensor(np.asarray(data, dtype=np.float64), requires_grad=True)


# ---------------------------------------------------------------------------
# forward semantics


def test_matmul_hand_value():
    out = nn.matmul(t64([[1.0, 2.0]]), t64([[3.0], [4.0]]))
    assert out.data.tolist() == [[11.0]]


def test_matmul_shape_mismatch():
    with pytest.raises(ValueError):
        nn.matmul(t64([[1.0, 2.0]]), t64([[1.0, 2.0]]))


def test_sigmoid_zero_is_half():
    assert nn.sigmoid(t64([0.0])).data[0] == pytest.approx(0.5)


def test_embedding_lookup_returns_requested_rows():
    table = t64([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
    out = nn.embedding_lookup(table, [0, 2, 0])
    assert out.data.tolist() == [[1.0, 2.0], [5.0, 6.0], [1.0, 2.0]]


def test_softmax_xent_uniform_logits():
    v = 7
    loss = nn.softmax_xent(t64(np.zeros(v)), 3)
    assert float(loss.data) == pytest.approx(math.log(v), rel=1e-12)


def test_softmax_xent_closed_form_confident_logits():
    # ln(1 + e^-20) for logits [10, -10] and target 0
    loss = nn.softmax_xent(t64([10.0, -10.0]), 0)
    assert float(loss.data) == pytest.approx(math.log1p(math.exp(-20.0)), rel=1e-9)


def test_softmax_xent_gradient_identity():
    logits = t64([0.3, -1.2, 2.0])
    loss = nn.softmax_xent(logits, 1)
    loss.backward()
    z = np.asarray([0.3, -1.2, 2.0])
    probs = np.exp(z - z.max()) / np.exp(z - z.max()).sum()
    expected = probs.copy()
    expected[1] -= 1.0
    np.testing.assert_allclose(logits.grad, expected, rtol=1e-12)


def test_no_grad_detaches():
    a = t64([1.0, 2.0])
    with nn.no_grad():
        out = nn.tanh(a)
    assert not out.requires_grad
    out2 = nn.tanh(a)
    assert out2.requires_grad


def test_debug_checks_reject_nonfinite():
    nn.set_debug_checks(True)
    try:
        with pytest.raises(nn.NumericError):
            nn.scale(t64([np.inf]), 1.0)
    finally:
        nn.set_debug_checks(False)


# ---------------------------------------------------------------------------
# gradient checks per op


@pytest.mark.parametrize(
    "name,build",
    [
        ("matmul", lambda ps: nn.sum_all(nn.matmul(ps[0], ps[1]))),
        ("add_broadcast", lambda ps: nn.sum_all(nn.tanh(nn.add(ps[0], ps[2])))),
        ("mul", lambda ps: nn.sum_all(nn.mul(ps[0], ps[3]))),
        ("sigmoid", lambda ps: nn.sum_all(nn.sigmoid(ps[0]))),
        ("tanh", lambda ps: nn.sum_all(nn.tanh(ps[0]))),
        ("concat", lambda ps: nn.sum_all(nn.sigmoid(nn.concat((ps[0], ps[3]), axis=1)))),
        ("slice_cols", lambda ps: nn.sum_all(nn.tanh(nn.slice_cols(ps[0], 1, 3)))),
        ("row", lambda ps: nn.sum_all(nn.sigmoid(nn.row(ps[0], 1)))),
        ("scale", lambda ps: nn.scale(nn.sum_all(nn.mul(ps[0], ps[0])), 0.7)),
        ("embedding", lambda ps: nn.sum_all(nn.tanh(nn.embedding_lookup(ps[4], [0, 2, 2])))),
        ("xent", lambda ps: nn.softmax_xent(nn.matmul(ps[5], ps[6]), 1)),
        ("xent_rows", lambda ps: nn.softmax_xent_rows(
            nn.matmul(ps[0], ps[7]), np.array([0, 2, 1]),
            np.array([True, False, True]))),
    ],
)
def test_op_gradients_match_finite_differences(name, build):
    rng = np.random.default_rng(hash(name) % 2**31)

    def p(*shape):
        return nn.Tensor(rng.normal(size=shape), requires_grad=True)

    params = [p(3, 4), p(4, 2), p(4), p(3, 4), p(5, 3), p(1, 4), p(4, 3), p(4, 3)]
    used = [q for q in params if _touches(build, params, q)]
    assert_gradients_match(lambda: build(params), used)


def _touches(build, params, q):
    for t in params:
        t.grad = None
    build(params).backward()
    return q.grad is not None


def test_repeated_parent_accumulates():
    a = t64([3.0])
    nn.sum_all(nn.mul(a, a)).backward()
    assert a.grad[0] == pytest.approx(6.0)


def test_backward_linearity():
    rng = np.random.default_rng(0)
    x = nn.Tensor(rng.normal(size=(2, 3)), requires_grad=True)

    def f():
        return nn.sum_all(nn.sigmoid(x))

    def g():
        return nn.sum_all(nn.mul(x, x))

    x.grad = None
    nn.add(f(), g()).backward()
    combined = x.grad.copy()
    x.grad = None
    f().backward()
    g().backward()
    np.testing.assert_allclose(combined, x.grad, rtol=1e-12)


# ---------------------------------------------------------------------------
# LSTM


def test_lstm_step_zero_params_zero_state():
    with float64_params():
        p = nn.LstmParams(t64(np.zeros((2, 8))), t64(np.zeros((2, 8))), t64(np.zeros(8)))
        h, c = nn.lstm_step(nn.Tensor(np.ones((1, 2))), nn.Tensor(np.zeros((1, 2))),
                            nn.Tensor(np.zeros((1, 2))), p)
    assert np.all(h.data == 0.0) and np.all(c.data == 0.0)


def test_lstm_step_single_unit_hand_computed():
    # gate order (input, forget, cell, output); computed with math.* only
    wx = [[0.5, -0.3, 0.8, 0.2]]
    wh = [[0.1, 0.4, -0.2, 0.3]]
    b = [0.05, -0.1, 0.2, 0.15]
    x, h0, c0 = 0.7, 0.2, -0.3
    sig = lambda z: 1.0 / (1.0 + math.exp(-z))
    i = sig(0.5 * x + 0.1 * h0 + 0.05)
    f = sig(-0.3 * x + 0.4 * h0 - 0.1)
    g = math.tanh(0.8 * x - 0.2 * h0 + 0.2)
    o = sig(0.2 * x + 0.3 * h0 + 0.15)
    c_expected = f * c0 + i * g
    h_expected = o * math.tanh(c_expected)

    p = nn.LstmParams(t64(wx), t64(wh), t64(b))
    h, c = nn.lstm_step(nn.Tensor(np.array([[x]])), nn.Tensor(np.array([[h0]])),
                        nn.Tensor(np.array([[c0]])), p)
    assert float(h.data) == pytest.approx(h_expected, rel=1e-12)
    assert float(c.data) == pytest.approx(c_expected, rel=1e-12)


def test_lstm_gradients_match_finite_differences():
    rng = np.random.default_rng(1)
    p = nn.LstmParams(
        nn.Tensor(rng.normal(size=(3, 8)) * 0.5, requires_grad=True),
        nn.Tensor(rng.normal(size=(2, 8)) * 0.5, requires_grad=True),
        nn.Tensor(rng.normal(size=8) * 0.5, requires_grad=True),
    )
    x = nn.Tensor(rng.normal(size=(1, 3)), requires_grad=True)

    def loss():
        h, c = nn.lstm_step(x, nn.Tensor(np.zeros((1, 2))), nn.Tensor(np.zeros((1, 2))), p)
        return nn.sum_all(nn.mul(h, h))

    assert_gradients_match(loss, [*p.tensors(), x])


def test_bilstm_length_one_is_two_single_steps():
    rng = np.random.default_rng(2)
    with float64_params():
        fwd = nn.init_lstm(rng, 3, 2, dtype=np.float64)
        bwd = nn.init_lstm(rng, 3, 2, dtype=np.float64)
    x = nn.Tensor(rng.normal(size=(1, 3)))
    out = nn.bilstm_forward([x], fwd, bwd)
    assert len(out) == 1
    zeros = nn.Tensor(np.zeros((1, 2)))
    hf, _ = nn.lstm_step(x, zeros, zeros, fwd)
    hb, _ = nn.lstm_step(x, zeros, zeros, bwd)
    np.testing.assert_allclose(out[0].data, np.concatenate([hf.data, hb.data], axis=1))


def test_bilstm_reversal_symmetry():
    rng = np.random.default_rng(3)
    fwd = nn.init_lstm(rng, 3, 2, dtype=np.float64)
    bwd = nn.init_lstm(rng, 3, 2, dtype=np.float64)
    xs = [nn.Tensor(rng.normal(size=(1, 3))) for _ in range(4)]
    out = nn.bilstm_forward(xs, fwd, bwd)
    flipped = nn.bilstm_forward(xs[::-1], bwd, fwd)
    for t in range(4):
        a = out[t].data
        b = flipped[3 - t].data
        np.testing.assert_allclose(a[:, :2], b[:, 2:], rtol=1e-12)
        np.testing.assert_allclose(a[:, 2:], b[:, :2], rtol=1e-12)


def test_bilstm_gradients_on_short_sequence():
    rng = np.random.default_rng(4)
    fwd = nn.init_lstm(rng, 2, 2, dtype=np.float64)
    bwd = nn.init_lstm(rng, 2, 2, dtype=np.float64)
    xs_np = [rng.normal(size=(1, 2)) for _ in range(3)]

    def loss():
        xs = [nn.Tensor(x) for x in xs_np]
        states = nn.concat(nn.bilstm_forward(xs, fwd, bwd), axis=0)
        return nn.softmax_xent_rows(nn.matmul(states, proj), np.array([0, 1, 0]))

    proj = nn.Tensor(rng.normal(size=(4, 2)), requires_grad=True)
    assert_gradients_match(loss, [*fwd.tensors(), *bwd.tensors(), proj])


def test_inference_path_matches_graph_path():
    rng = np.random.default_rng(5)
    fwd = nn.init_lstm(rng, 4, 3, dtype=np.float64)
    bwd = nn.init_lstm(rng, 4, 3, dtype=np.float64)
    x = rng.normal(size=(6, 4))
    graph = np.concatenate(
        [h.data for h in nn.bilstm_forward([nn.Tensor(x[t : t + 1]) for t in range(6)], fwd, bwd)],
        axis=0,
    )
    np.testing.assert_allclose(nn.bilstm_forward_np(x, fwd, bwd), graph, rtol=1e-12)


# ---------------------------------------------------------------------------
# optimizers


def _bowl_param(w0=1.0):
    return nn.Tensor(np.array([w0]), requires_grad=True)


def test_sgd_single_step_on_quadratic_bowl():
    w = _bowl_param()
    opt = nn.Sgd([w], lr=0.1)
    nn.sum_all(nn.mul(w, w)).backward()
    opt.step()
    assert w.data[0] == pytest.approx(0.8)


def test_zero_gradient_leaves_params_unchanged():
    w = _bowl_param()
    before = w.data.copy()
    nn.Sgd([w], lr=0.1).step()
    nn.Adam([w], lr=0.1).step()
    np.testing.assert_array_equal(w.data, before)


@pytest.mark.parametrize("optimizer", ["sgd", "adam"])
def test_bowl_convergence_within_200_steps(optimizer):
    w = _bowl_param()
    opt = nn.make_optimizer(optimizer, [w], lr=0.1)
    for _ in range(200):
        opt.zero_grad()
        nn.sum_all(nn.mul(w, w)).backward()
        opt.step()
    assert abs(w.data[0]) < 1e-4


def test_unknown_optimizer_rejected():
    with pytest.raises(ValueError):
        nn.make_optimizer("sfo", [], 0.1)


# ---------------------------------------------------------------------------
# model container


def test_model_container_roundtrip_is_bit_exact(tmp_path):
    rng = np.random.default_rng(6)
    tensors = {
        "a.w": rng.normal(size=(3, 4)).astype(np.float32),
        "a.b": rng.normal(size=4).astype(np.float64),
        "ids": np.array([1, 5, 9], dtype=np.int64),
    }
    meta = {"kind": "test", "nested": {"x": 1, "y": [1.5, "z"]}}
    path = tmp_path / "m.bin"
    save_model(path, meta, tensors)
    meta2, tensors2 = load_model(path)
    assert meta2 == meta
    assert set(tensors2) == set(tensors)
    for k in tensors:
        assert tensors2[k].dtype == tensors[k].dtype
        assert tensors2[k].tobytes() == tensors[k].tobytes()


def test_model_container_bytes_independent_of_dict_order(tmp_path):
    a = {"x": np.ones(2, dtype=np.float32), "y": np.zeros(3, dtype=np.float32)}
    b = dict(reversed(list(a.items())))
    save_model(tmp_path / "a.bin", {"k": 1}, a)
    save_model(tmp_path / "b.bin", {"k": 1}, b)
    assert (tmp_path / "a.bin").read_bytes() == (tmp_path / "b.bin").read_bytes()


def test_model_container_rejects_garbage(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"not a model at all")
    with pytest.raises(ModelFormatError):
        load_model(path)


def test_model_container_rejects_truncation(tmp_path):
    path = tmp_path / "m.bin"
    save_model(path, {}, {"w": np.ones((2, 2), dtype=np.float32)})
    blob = path.read_bytes()
    path.write_bytes(blob[:-3])
    with pytest.raises(ModelFormatError):
        load_model(path)
