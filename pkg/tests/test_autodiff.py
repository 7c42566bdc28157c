import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from egcomp import autodiff as ad


def test_forward_examples():
    assert ad.sigmoid(ad.Tensor(0.0)).item() == 0.5
    assert ad.relu(ad.Tensor(-3.0)).item() == 0.0
    x = ad.Tensor(np.array([[1.5], [-2.0]]))
    np.testing.assert_array_equal(ad.matmul(ad.Tensor(np.eye(2)), x).data, x.data)


def test_op_values():
    a = ad.Tensor(np.array([[1.0, 2.0], [3.0, 4.0]]))
    b = ad.Tensor(np.array([[0.5, -1.0], [2.0, 0.0]]))
    np.testing.assert_allclose(ad.dot(a, b).data, [[-1.5], [6.0]])
    np.testing.assert_allclose(ad.concat([a, b]).data, np.hstack([a.data, b.data]))
    w = ad.Tensor(np.array([[0.25, 0.75]]))
    np.testing.assert_allclose(ad.weighted_sum(a, w).data, [[2.5, 3.5]])
    np.testing.assert_allclose(ad.add_bias(a, ad.Tensor(np.array([[1.0, -1.0]]))).data, [[2, 1], [4, 3]])
    np.testing.assert_allclose(ad.log_sigmoid(ad.Tensor(-800.0)).data, [[-800.0]])
    np.testing.assert_allclose(ad.sigmoid(ad.Tensor(np.array([[-800.0, 800.0]]))).data, [[0.0, 1.0]])


@pytest.mark.parametrize(
    "fn",
    [
        lambda: ad.matmul(ad.Tensor(np.ones((2, 3))), ad.Tensor(np.ones((2, 3)))),
        lambda: ad.add(ad.Tensor(np.ones((2, 3))), ad.Tensor(np.ones((3, 2)))),
        lambda: ad.add_bias(ad.Tensor(np.ones((2, 3))), ad.Tensor(np.ones((1, 2)))),
        lambda: ad.dot(ad.Tensor(np.ones((2, 3))), ad.Tensor(np.ones((2, 2)))),
        lambda: ad.concat([ad.Tensor(np.ones((2, 3))), ad.Tensor(np.ones((3, 3)))]),
    ],
)
def test_shape_errors_report_shapes(fn):
    with pytest.raises(ad.ShapeError, match=r"\(\d, \d\)"):
        fn()


def test_backward_linear_outer_product():
    store = ad.ParamStore()
    w = store.add("w", np.array([[1.0, -2.0, 0.5]]))
    x = np.array([[3.0], [4.0], [5.0]])
    ad.backward(ad.total(w @ ad.Tensor(x)))
    np.testing.assert_array_equal(w.grad, x.T)


def test_unused_parameter_gets_zero_gradient():
    store = ad.ParamStore()
    used = store.add("used", np.ones((2, 2)))
    unused = store.add("unused", np.ones((2, 2)))
    ad.backward(ad.total(ad.sigmoid(used)))
    assert np.any(used.grad != 0)
    np.testing.assert_array_equal(unused.grad, 0.0)


def test_backward_rejects_non_scalar():
    store = ad.ParamStore()
    w = store.add("w", np.ones((2, 2)))
    with pytest.raises(ad.ShapeError):
        ad.backward(w * 2.0)


def test_adam_zero_gradient_is_identity():
    store = ad.ParamStore()
    w = store.add("w", np.array([[0.3, -0.7]]))
    before = w.data.copy()
    store.adam_step(0.005)
    np.testing.assert_array_equal(w.data, before)


def test_adam_constant_gradient_moves_against_sign():
    store = ad.ParamStore()
    w = store.add("w", np.array([[0.0]]))
    trace = []
    for _ in range(50):
        w.grad[...] = 2.0
        store.adam_step(0.01)
        trace.append(w.data[0, 0])
    assert all(b < a for a, b in zip(trace, trace[1:]))
    assert np.all(w.grad == 0)


@pytest.mark.parametrize("g", [1e-3, 0.7, -5.0, 123.0])
def test_adam_first_step_closed_form(g):
    # m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps)
    store = ad.ParamStore()
    w = store.add("w", np.array([[1.0]]))
    w.grad[...] = g
    store.adam_step(lr=0.005, eps=1e-8)
    assert w.data[0, 0] == pytest.approx(1.0 - 0.005 * g / (abs(g) + 1e-8), rel=1e-12)


def test_adam_non_finite_gradient_names_parameter():
    store = ad.ParamStore()
    store.add("ok", np.ones((1, 1)))
    bad = store.add("gcn.w1", np.ones((1, 2)))
    bad.grad[0, 1] = np.nan
    with pytest.raises(FloatingPointError, match="gcn.w1"):
        store.adam_step()


def test_grad_check_linear_model_exact():
    rng = np.random.default_rng(0)
    store = ad.ParamStore()
    store.add("w", rng.normal(size=(3, 2)))
    x = ad.Tensor(rng.normal(size=(4, 3)))
    rep = ad.grad_check(lambda: ad.total(x @ store["w"]), store, tolerance=1e-8)
    assert rep.passed
    assert rep.max_rel_error < 1e-8


def test_grad_check_skips_relu_kink():
    store = ad.ParamStore()
    store.add("w", np.array([[0.0, 1.0]]))
    rep = ad.grad_check(lambda: ad.total(ad.relu(store["w"])), store)
    assert ("w", (0, 0)) in rep.skipped
    assert rep.n_checked == 1
    assert rep.passed


def test_grad_check_catches_wrong_gradient():
    store = ad.ParamStore()
    store.add("w", np.array([[0.5, -0.25]]))

    def broken():
        w = store["w"]
        # forward squares the input but backward claims the identity
        return ad.total(ad.Tensor(w.data**2, (w,), lambda g: (g,), "bad"))

    assert not ad.grad_check(broken, store).passed


def test_checkpoint_round_trip_is_bit_exact():
    rng = np.random.default_rng(3)
    store = ad.ParamStore()
    store.glorot("w", 4, 3, rng)
    store.zeros("b", 1, 3)
    store["w"].grad[...] = rng.normal(size=(4, 3))
    store.adam_step()
    text = json.dumps(store.to_dict())
    again = ad.ParamStore.from_dict(json.loads(text))
    assert again.step == 1
    for name in store:
        assert again[name].data.tobytes() == store[name].data.tobytes()
        assert again.m[name].tobytes() == store.m[name].tobytes()
        assert again.v[name].tobytes() == store.v[name].tobytes()
    assert json.dumps(again.to_dict()) == text


def test_glorot_bounds():
    store = ad.ParamStore()
    w = store.glorot("w", 10, 6, np.random.default_rng(0))
    assert np.abs(w.data).max() <= np.sqrt(6.0 / 16)


def _small_net(store, x):
    h = ad.relu(ad.add_bias(x @ store["w1"], store["b1"]))
    return ad.mean(ad.log_sigmoid(h @ store["w2"]))


@pytest.mark.property
@given(st.integers(0, 10_000))
def test_random_network_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    store = ad.ParamStore()
    store.glorot("w1", 3, 4, rng)
    store.add("b1", rng.normal(scale=0.1, size=(1, 4)))
    store.glorot("w2", 4, 1, rng)
    x = ad.Tensor(rng.normal(size=(5, 3)))
    rep = ad.grad_check(lambda: _small_net(store, x), store, tolerance=1e-4)
    assert rep.passed, rep.summary()


@pytest.mark.property
@given(st.integers(0, 10_000), st.floats(-3, 3), st.floats(-3, 3))
def test_backward_is_linear(seed, a, b):
    rng = np.random.default_rng(seed)
    store = ad.ParamStore()
    w = store.add("w", rng.normal(size=(2, 3)))
    x = ad.Tensor(rng.normal(size=(3, 2)))

    def l1():
        return ad.total(ad.sigmoid(w @ x))

    def l2():
        return ad.mean(ad.relu(w) * w)

    grads = []
    for fn in (l1, l2):
        store.zero_grad()
        ad.backward(fn())
        grads.append(w.grad.copy())
    store.zero_grad()
    ad.backward(l1() * a + l2() * b)
    np.testing.assert_allclose(w.grad, a * grads[0] + b * grads[1], rtol=1e-10, atol=1e-12)


@pytest.mark.property
@given(st.integers(0, 10_000), st.integers(1, 5))
def test_adam_with_zero_lr_is_identity(seed, steps):
    rng = np.random.default_rng(seed)
    store = ad.ParamStore()
    w = store.add("w", rng.normal(size=(2, 2)))
    before = w.data.copy()
    for _ in range(steps):
        w.grad[...] = rng.normal(size=(2, 2))
        store.adam_step(lr=0.0)
    np.testing.assert_array_equal(w.data, before)


@pytest.mark.property
@given(st.integers(0, 10_000))
def test_forward_is_deterministic(seed):
    rng = np.random.default_rng(seed)
    a, b = rng.normal(size=(3, 4)), rng.normal(size=(4, 2))
    ops = [
        lambda: ad.matmul(ad.Tensor(a), ad.Tensor(b)).data,
        lambda: ad.sigmoid(ad.Tensor(a)).data,
        lambda: ad.relu(ad.Tensor(a)).data,
        lambda: ad.concat([ad.Tensor(a), ad.Tensor(a)]).data,
        lambda: ad.dot(ad.Tensor(a), ad.Tensor(a)).data,
    ]
    for op in ops:
        assert op().tobytes() == op().tobytes()
