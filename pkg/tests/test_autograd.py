import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from canoncount import autograd as ag

from gradcheck import numeric_grad, rel_error


def _check_op(build, *shapes, seed=0, tol=1e-5):
    """``build(*tensors)`` -> Tensor; checks d sum(out * R) / d inputs against finite differences."""
    rng = np.random.default_rng(seed)
    xs = [rng.normal(size=s) for s in shapes]
    out_shape = build(*[ag.Tensor(x) for x in xs]).shape
    r = rng.normal(size=out_shape)

    def f():
        return float((build(*[ag.Tensor(x) for x in xs]).data * r).sum())

    ts = [ag.Tensor(x, requires_grad=True) for x in xs]
    ag.sum_all(ag.mul(build(*ts), r)).backward()
    for t, x in zip(ts, xs):
        num = numeric_grad(f, x)
        err = np.abs(t.grad - num).max() / max(np.abs(num).max(), 1e-8)
        assert err <= tol


def test_matmul_grad():
    _check_op(lambda a, b: a @ b, (3, 4), (4, 2))


def test_add_broadcast_grad():
    _check_op(ag.add, (5, 3), (1, 3))
    _check_op(ag.add, (5, 3), (5, 1))


def test_mul_grad():
    _check_op(ag.mul, (4, 3), (4, 3))
    _check_op(ag.mul, (4, 3), (4, 1))


def test_leaky_relu_grad():
    _check_op(ag.leaky_relu, (6, 5))


def test_sigmoid_grad():
    _check_op(ag.sigmoid, (4, 4))


def test_concat_grad():
    _check_op(lambda a, b: ag.concat([a, b]), (3, 2), (3, 4))
    _check_op(lambda a, b: ag.concat([a, b], axis=0), (2, 3), (4, 3))


def test_gather_and_scatter_grad():
    idx = np.array([0, 2, 2, 1, 0])
    _check_op(lambda x: ag.gather_rows(x, idx), (3, 4))
    groups = np.array([1, 0, 1, 1, 2])
    _check_op(lambda x: ag.scatter_add(x, groups, 3), (5, 2))


def test_sparse_pool_grad():
    pool = ag.scatter_matrix(np.array([0, 0, 1, 1, 1]), 2)
    _check_op(lambda x: ag.sparse_matmul(pool, x), (5, 3))


def test_sum_and_mean_grad():
    _check_op(ag.sum_all, (3, 3))
    _check_op(ag.mean_all, (2, 5))


def test_sum_sigmoid_wx():
    rng = np.random.default_rng(1)
    w = rng.normal(size=(4, 3))
    x = rng.normal(size=(3, 1))
    tw = ag.Tensor(w, requires_grad=True)
    ag.sum_all(ag.sigmoid(tw @ ag.Tensor(x))).backward()
    num = numeric_grad(lambda: float((1 / (1 + np.exp(-(w @ x)))).sum()), w)
    assert max(rel_error(a, b) for a, b in zip(tw.grad.ravel(), num.ravel())) <= 1e-5


def test_smooth_l1_loss_grad():
    rng = np.random.default_rng(2)
    target = rng.normal(size=(6, 1)) * 3
    # keep away from the |diff| = 1 kink
    _check_op(lambda p: ag.smooth_l1_loss(p, target), (6, 1), seed=5)


def test_shared_subexpression_accumulates():
    x = ag.Tensor(np.array([[2.0]]), requires_grad=True)
    y = ag.mul(x, x)
    ag.add(y, y).backward()
    assert x.grad[0, 0] == pytest.approx(8.0)


# --- simple values -----------------------------------------------------------------

def test_leaky_relu_zero():
    assert ag.leaky_relu(ag.Tensor(np.zeros((2, 2)))).data.tolist() == [[0, 0], [0, 0]]
    assert ag.leaky_relu(ag.Tensor([[-2.0, 3.0]])).data.tolist() == [[-0.02, 3.0]]


def test_identity_matmul():
    x = np.arange(6.0).reshape(3, 2)
    assert np.array_equal((ag.Tensor(np.eye(3)) @ ag.Tensor(x)).data, x)


def test_sigmoid_extremes_finite():
    out = ag.sigmoid(ag.Tensor([[-800.0, 0.0, 800.0]])).data
    assert out[0, 1] == 0.5 and np.all(np.isfinite(out))
    assert 0 <= out[0, 0] < 1e-300 and out[0, 2] == 1.0


def test_smooth_l1_values():
    assert ag.smooth_l1(0.0, 0.0) == (0.0, 0.0)
    assert ag.smooth_l1(1.5, 1.0) == (0.125, 0.5)
    assert ag.smooth_l1(3.0, 1.0) == (1.5, 1.0)
    assert ag.smooth_l1(-1.0, 1.0) == (1.5, -1.0)


def test_smooth_l1_loss_is_mean():
    loss = ag.smooth_l1_loss(ag.Tensor([[0.0], [0.5], [2.0]]), np.zeros(3))
    assert loss.data[0, 0] == pytest.approx((0 + 0.125 + 1.5) / 3)


def test_shape_errors():
    with pytest.raises(ag.ShapeError):
        ag.Tensor(np.ones((2, 3))) @ ag.Tensor(np.ones((2, 3)))
    with pytest.raises(ag.ShapeError):
        ag.add(ag.Tensor(np.ones((2, 3))), ag.Tensor(np.ones((3, 2))))
    with pytest.raises(ag.ShapeError):
        ag.Tensor(np.ones((2, 2, 2)))
    with pytest.raises(ag.ShapeError):
        ag.scatter_add(ag.Tensor(np.ones((3, 1))), [0, 1], 2)


def test_non_finite_inputs_are_rejected():
    with pytest.raises(ag.NonFiniteError):
        ag.add(ag.Tensor([[np.inf]]), ag.Tensor([[1.0]]))


@settings(max_examples=60, deadline=None)
@given(
    arrays(np.float64, (3, 4), elements=st.floats(-1e3, 1e3)),
    arrays(np.float64, (4, 2), elements=st.floats(-1e3, 1e3)),
)
def test_ops_keep_finite_values(a, b):
    x = ag.Tensor(a, requires_grad=True)
    y = ag.Tensor(b, requires_grad=True)
    h = ag.leaky_relu(x @ y)
    out = ag.sum_all(ag.concat([ag.sigmoid(h), ag.mul(h, 0.5)]))
    out.backward()
    assert np.all(np.isfinite(out.data))
    assert np.all(np.isfinite(x.grad)) and np.all(np.isfinite(y.grad))


# --- Adam -------------------------------------------------------------------------

def _store(values):
    p = ag.ParamStore()
    p.add("w", np.array(values, dtype=float))
    return p


def test_adam_zero_gradient_keeps_params():
    p = _store([[1.0, -2.0]])
    ag.adam_step(p, {"w": np.zeros((1, 2))})
    assert p["w"].data.tolist() == [[1.0, -2.0]]


def test_adam_first_step_is_signed_lr():
    p = _store([[0.0, 0.0, 0.0]])
    g = np.array([[3.0, -0.2, 1e-3]])
    ag.adam_step(p, {"w": g}, lr=1e-3, t=1)
    # m_hat = g, v_hat = g^2, so the step is -lr * g / (|g| + eps)
    expect = -1e-3 * g / (np.abs(g) + 1e-8)
    assert np.allclose(p["w"].data, expect, rtol=0, atol=1e-15)
    assert np.allclose(p["w"].data, -1e-3 * np.sign(g), atol=1e-8)


def test_adam_matches_reference_loop():
    rng = np.random.default_rng(3)
    p = _store(rng.normal(size=(2, 2)))
    w = p["w"].data.copy()
    m = np.zeros_like(w)
    v = np.zeros_like(w)
    for t in range(1, 6):
        g = rng.normal(size=(2, 2))
        ag.adam_step(p, {"w": g}, lr=0.01)
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        w = w - 0.01 * (m / (1 - 0.9**t)) / (np.sqrt(v / (1 - 0.999**t)) + 1e-8)
    assert np.allclose(p["w"].data, w, atol=1e-14)


def test_adam_rejects_bad_input():
    p = _store([[1.0]])
    with pytest.raises(ag.NonFiniteError):
        ag.adam_step(p, {"w": np.array([[np.nan]])})
    with pytest.raises(ValueError):
        ag.adam_step(p, {"w": np.zeros((1, 1))}, t=0)
    with pytest.raises(ag.ShapeError):
        ag.adam_step(p, {"w": np.zeros((2, 1))})


def test_adam_deterministic():
    def run():
        rng = np.random.default_rng(4)
        p = _store(rng.normal(size=(3, 3)))
        for _ in range(10):
            ag.adam_step(p, {"w": rng.normal(size=(3, 3))})
        return p["w"].data

    assert np.array_equal(run(), run())


def test_checkpoint_round_trip(tmp_path):
    p = ag.ParamStore()
    p.add("a", np.arange(6.0).reshape(2, 3) / 7)
    p.add("b", np.array([[np.pi]]))
    ag.save_checkpoint(tmp_path / "c.json", "toy", {"width": 3}, p, {"note": "x"})
    doc = ag.load_checkpoint(tmp_path / "c.json")
    assert doc["kind"] == "toy" and doc["hyperparameters"] == {"width": 3} and doc["extra"] == {"note": "x"}
    for name, t in p:
        assert np.array_equal(doc["state"][name], t.data)


def test_checkpoint_version_check(tmp_path):
    (tmp_path / "c.json").write_text('{"format": "canoncount-checkpoint", "version": 99}')
    with pytest.raises(ValueError):
        ag.load_checkpoint(tmp_path / "c.json")


def test_load_state_shape_check():
    p = _store([[1.0, 2.0]])
    with pytest.raises(ag.ShapeError):
        p.load_state({"w": np.zeros((2, 2))})
    with pytest.raises(KeyError):
        p.load_state({"q": np.zeros((1, 2))})
