import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from agff import tensor as T
from agff.errors import ContractError, NumericalError, ShapeError
from agff.rng import Rng
from agff.tensor import Tape, Tensor, backward

from gradcheck import central_diff, max_rel_err


def leafy(tape, *arrays):
    return [tape.leaf(np.asarray(a, dtype=np.float64)) for a in arrays]


# --- forward values -----------------------------------------------------


def test_matmul_identity():
    a = T.constant(np.eye(2))
    b = T.constant([[1.0, 2.0], [3.0, 4.0]])
    assert np.array_equal(T.matmul(a, b).data, [[1.0, 2.0], [3.0, 4.0]])


def test_tanh_sigmoid_at_zero():
    z = T.constant(np.zeros(4))
    assert np.array_equal(T.tanh(z).data, np.zeros(4))
    assert np.array_equal(T.sigmoid(z).data, np.full(4, 0.5))


def test_concat_order_and_length():
    out = T.concat(T.constant([1.0, 2.0, 3.0]), T.constant([4.0, 5.0]))
    assert np.array_equal(out.data, [1.0, 2.0, 3.0, 4.0, 5.0])


def test_shape_mismatch_reports_both_shapes():
    with pytest.raises(ShapeError) as e:
        T.add(T.constant(np.zeros(3)), T.constant(np.zeros(4)))
    assert "(3,)" in str(e.value) and "(4,)" in str(e.value)
    with pytest.raises(ShapeError):
        T.matmul(T.constant(np.zeros((2, 3))), T.constant(np.zeros((4, 2))))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")  # the overflow is the point
def test_nonfinite_result_is_a_hard_error():
    big = T.constant(np.full(2, 1e308))
    with pytest.raises(NumericalError):
        T.add(big, big)


def test_softmax_cross_entropy_symmetric_logits():
    loss, probs = T.softmax_cross_entropy(T.constant([0.0, 0.0]), 0)
    assert math.isclose(float(loss.data), math.log(2.0), rel_tol=1e-12)
    assert np.allclose(probs, [0.5, 0.5], atol=1e-15)


def test_softmax_cross_entropy_saturated():
    loss, _ = T.softmax_cross_entropy(T.constant([10.0, -10.0]), 0)
    assert float(loss.data) < 1e-8


def test_softmax_cross_entropy_label_out_of_range():
    with pytest.raises(IndexError):
        T.softmax_cross_entropy(T.constant([0.0, 1.0]), 2)


def test_softmax_cross_entropy_gradient_is_probs_minus_onehot():
    logits = np.array([0.3, -1.2, 0.8])
    tape = Tape()
    (leaf,) = leafy(tape, logits)
    loss, probs = T.softmax_cross_entropy(leaf, 1)
    grad = backward(loss).get(leaf)
    onehot = np.array([0.0, 1.0, 0.0])
    assert np.max(np.abs(grad - (probs - onehot))) <= 1e-12

    def loss_fn():
        l, _ = T.softmax_cross_entropy(T.constant(logits), 1)
        return float(l.data)

    fd = central_diff(loss_fn, logits, step=1e-6)
    assert max_rel_err(grad, fd) < 1e-6


@given(arrays(np.float64, (4,), elements=st.floats(-50, 50)))
@settings(max_examples=60)
def test_softmax_sums_to_one_and_positive(logits):
    out = T.softmax(T.constant(logits)).data
    assert abs(out.sum() - 1.0) <= 1e-12
    assert np.all(out > 0)


# --- backward -----------------------------------------------------------


def test_square_gradient():
    tape = Tape()
    (x,) = leafy(tape, np.asarray(3.0))
    loss = T.mul(x, x)
    assert float(backward(loss).get(x)) == pytest.approx(6.0, abs=1e-12)


def test_unreached_parameter_gets_zero_gradient():
    tape = Tape()
    x, unused = leafy(tape, np.asarray(2.0), np.ones((3, 2)))
    loss = T.mul(x, x)
    g = backward(loss).get(unused)
    assert g.shape == (3, 2) and np.array_equal(g, np.zeros((3, 2)))


def test_backward_rejects_non_scalar_loss():
    tape = Tape()
    (x,) = leafy(tape, np.ones(3))
    with pytest.raises(ContractError):
        backward(T.tanh(x))


def _op_cases():
    """(name, build(leaves) -> output tensor, input shapes)"""
    return [
        ("add", lambda a, b: T.add(a, b), [(3, 2), (3, 2)]),
        ("add_rowvec", lambda a, b: T.add(a, b), [(3, 4), (4,)]),
        ("sub", lambda a, b: T.sub(a, b), [(5,), (5,)]),
        ("mul", lambda a, b: T.mul(a, b), [(2, 3), (2, 3)]),
        ("scale", lambda a: T.scale(a, -1.7), [(4,)]),
        ("matmul_mm", lambda a, b: T.matmul(a, b), [(2, 3), (3, 4)]),
        ("matmul_mv", lambda a, b: T.matmul(a, b), [(3, 4), (4,)]),
        ("matmul_vm", lambda a, b: T.matmul(a, b), [(3,), (3, 2)]),
        ("transpose", lambda a: T.transpose(a), [(2, 4)]),
        ("concat1d", lambda a, b: T.concat(a, b), [(3,), (2,)]),
        ("concat2d", lambda a, b: T.concat(a, b), [(2, 3), (2, 2)]),
        ("tanh", lambda a: T.tanh(a), [(3, 3)]),
        ("sigmoid", lambda a: T.sigmoid(a), [(6,)]),
        ("softmax", lambda a: T.softmax(a), [(5,)]),
        ("reverse_rows", lambda a: T.reverse_rows(a), [(4, 3)]),
        ("gather", lambda a: T.gather_rows(a, np.array([2, 0, 2, 1])), [(3, 2)]),
    ]


@pytest.mark.parametrize("name,build,shapes", _op_cases(), ids=lambda c: c if isinstance(c, str) else "")
def test_op_gradients_match_finite_differences(name, build, shapes):
    # spec-level bound: 50 random cases per op, rel err < 1e-6 at step 1e-4
    rng = Rng(hash(name) & 0xFFFF)
    for _ in range(50):
        arrays_ = [rng.uniform(s, -2.0, 2.0) for s in shapes]
        mixer = None

        def run(track: bool):
            nonlocal mixer
            tape = Tape()
            leaves = [tape.leaf(a) if track else T.constant(a) for a in arrays_]
            out = build(*leaves)
            if mixer is None:
                # fixed random weighting so every output entry matters
                mixer = rng.uniform(out.data.shape, -1.0, 1.0)
            return T.sum_all(T.mul(out, T.constant(mixer))), leaves

        loss, leaves = run(track=True)
        grads = backward(loss)
        for arr, leaf in zip(arrays_, leaves):
            fd = central_diff(lambda: float(run(track=False)[0].data), arr, step=1e-4)
            assert max_rel_err(grads.get(leaf), fd) < 1e-6, name


def test_sparse_gradient_never_corrupts_aliased_accumulators():
    # w's first contribution arrives as a pass-through of another node's
    # gradient array; the later sparse gather gradient must not mutate it
    w = np.arange(6.0).reshape(3, 2)
    c = np.ones((3, 2))
    tape = Tape()
    lw = tape.leaf(w)
    gathered = T.gather_rows(lw, np.array([0]))  # sparse grad, pulled last
    passthrough = T.add(lw, T.constant(c))       # dense pass-through grad
    loss = T.add(T.sum_all(gathered), T.sum_all(passthrough))
    grads = backward(loss)
    expected = np.ones((3, 2))
    expected[0] += 1.0
    assert np.array_equal(grads.get(lw), expected)
    # the intermediate node's gradient stays the plain all-ones array
    assert np.array_equal(grads.get(passthrough), np.ones((3, 2)))


def test_gather_accumulates_repeated_rows():
    tape = Tape()
    (e,) = leafy(tape, np.arange(6.0).reshape(3, 2))
    out = T.gather_rows(e, np.array([1, 1, 1]))
    loss = T.sum_all(out)
    g = backward(loss).get(e)
    assert np.array_equal(g, [[0.0, 0.0], [3.0, 3.0], [0.0, 0.0]])


def test_composite_graph_gradient():
    rng = Rng(12)
    w = rng.uniform((3, 3), -1, 1)
    x = rng.uniform((3,), -1, 1)
    b = rng.uniform((3,), -1, 1)

    def run(track):
        tape = Tape()
        lw, lx, lb = [tape.leaf(a) if track else T.constant(a) for a in (w, x, b)]
        h = T.tanh(T.add(T.matmul(lw, lx), lb))
        g = T.sigmoid(T.matmul(lw, h))
        return T.sum_all(T.mul(g, h)), (lw, lx, lb)

    loss, leaves = run(True)
    grads = backward(loss)
    for arr, leaf in zip((w, x, b), leaves):
        fd = central_diff(lambda: float(run(False)[0].data), arr, step=1e-4)
        assert max_rel_err(grads.get(leaf), fd) < 1e-6


# --- dropout ------------------------------------------------------------


def test_dropout_identity_cases():
    x = T.constant(np.arange(12.0).reshape(3, 4))
    rng = Rng(0)
    before = rng._count
    assert T.dropout(x, 0.0, rng, training=True) is x
    assert T.dropout(x, 0.9, rng, training=False) is x
    assert rng._count == before  # identity paths consume no draws


def test_dropout_survivors_scaled_exactly():
    x = np.arange(1.0, 101.0)
    out = T.dropout(T.constant(x), 0.5, Rng(3), training=True).data
    kept = out != 0
    assert np.array_equal(out[kept], 2.0 * x[kept])
    assert 0 < kept.sum() < 100


def test_dropout_consumes_stream_deterministically():
    x = T.constant(np.ones((5, 7)))
    a = T.dropout(x, 0.3, Rng(11), training=True).data
    b = T.dropout(x, 0.3, Rng(11), training=True).data
    assert np.array_equal(a, b)


def test_dropout_gradient_with_replayed_mask():
    x = np.linspace(-1, 1, 20)

    def run(track):
        tape = Tape()
        leaf = tape.leaf(x) if track else T.constant(x)
        out = T.dropout(leaf, 0.25, Rng(5), training=True)
        return T.sum_all(T.tanh(out)), leaf

    loss, leaf = run(True)
    g = backward(loss).get(leaf)
    fd = central_diff(lambda: float(run(False)[0].data), x, step=1e-4)
    assert max_rel_err(g, fd) < 1e-6
