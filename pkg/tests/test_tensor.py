import math

import numpy as np
import pytest

from gradcheck import REL_TOL, check_grads

from xlinglab import tensor as tz
from xlinglab.errors import (
    ContractError,
    DegenerateMaskError,
    DimensionError,
    VocabIndexError,
)


def _weighted_sum(t: tz.Tensor, w: np.ndarray) -> tz.Tensor:
    # random-weight reduction so degenerate directions (softmax rows summing
    # to 1, layer-norm killing the constant mode) still get exercised
    return tz.mul(t, tz.Tensor(w)).sum()


# ---------------------------------------------------------------------------
# hand-computed forward values


def test_matmul_identity():
    a = tz.Tensor(np.eye(2))
    b = tz.Tensor(np.array([[5.0, 6.0], [7.0, 8.0]]))
    out = a.matmul(b)
    assert np.array_equal(out.data, np.array([[5.0, 6.0], [7.0, 8.0]]))


def test_matmul_hand_case_with_grads():
    a = tz.Tensor(np.array([[1.0, 2.0]]), requires_grad=True)
    b = tz.Tensor(np.array([[3.0], [4.0]]), requires_grad=True)
    out = a.matmul(b)
    assert out.data.tolist() == [[11.0]]
    out.sum().backward()
    # dA = dC.B^T, dB = A^T.dC with dC = [[1]]
    assert a.grad.tolist() == [[3.0, 4.0]]
    assert b.grad.tolist() == [[1.0], [2.0]]


def test_matmul_shape_mismatch():
    a = tz.Tensor(np.zeros((2, 3)))
    b = tz.Tensor(np.zeros((4, 2)))
    with pytest.raises(DimensionError):
        a.matmul(b)


@pytest.mark.parametrize("v,t", [(4, 1), (4, 3), (11, 7), (520, 2)])
def test_uniform_logits_nll_is_log_v(v, t):
    logits = tz.Tensor(np.zeros((t, v)))
    loss = tz.softmax_cross_entropy(logits, np.zeros(t, dtype=int), np.ones(t))
    assert abs(loss.item() - math.log(v)) < 1e-9


def test_two_class_hand_loss():
    logits = tz.Tensor(np.array([[1.0, 0.0]]))
    loss = tz.softmax_cross_entropy(logits, [0], [1.0])
    assert abs(loss.item() - math.log(1.0 + math.exp(-1.0))) < 1e-9
    assert abs(loss.item() - 0.313262) < 1e-6


def test_masked_position_target_irrelevant():
    rng = np.random.default_rng(0)
    logits = rng.standard_normal((5, 7))
    targets = rng.integers(0, 7, size=5)
    mask = np.array([1.0, 1.0, 0.0, 1.0, 1.0])
    base = tz.softmax_cross_entropy(tz.Tensor(logits.copy()), targets, mask).item()
    for alt in range(7):
        t2 = targets.copy()
        t2[2] = alt
        same = tz.softmax_cross_entropy(tz.Tensor(logits.copy()), t2, mask).item()
        assert same == base  # exact: masked term is multiplied by 0


def test_all_zero_mask_rejected():
    logits = tz.Tensor(np.zeros((3, 4)))
    with pytest.raises(DegenerateMaskError):
        tz.softmax_cross_entropy(logits, [0, 1, 2], [0.0, 0.0, 0.0])


def test_target_out_of_vocab_rejected():
    logits = tz.Tensor(np.zeros((2, 4)))
    with pytest.raises(VocabIndexError):
        tz.softmax_cross_entropy(logits, [0, 4], [1.0, 1.0])


def test_layer_norm_constant_vector_is_zero_pre_affine():
    x = tz.Tensor(np.full((3, 8), 2.5))
    gain = tz.Tensor(np.ones(8))
    bias = tz.Tensor(np.zeros(8))
    out = tz.layer_norm(x, gain, bias)
    assert np.array_equal(out.data, np.zeros((3, 8)))
    # with an affine attached, the output is exactly the bias
    bias2 = tz.Tensor(np.arange(8, dtype=float))
    out2 = tz.layer_norm(x, gain, bias2)
    assert np.array_equal(out2.data, np.tile(np.arange(8.0), (3, 1)))


def test_gelu_zero():
    assert tz.gelu(tz.Tensor(np.array([0.0]))).data[0] == 0.0


def test_backward_sum_ones():
    x = tz.Tensor(np.array([1.0, 2.0, 3.0]), requires_grad=True)
    x.sum().backward()
    assert x.grad.tolist() == [1.0, 1.0, 1.0]


def test_backward_accumulates_across_uses():
    x = tz.Tensor(np.array([1.0, 2.0, 3.0]), requires_grad=True)
    loss = tz.add(x.sum(), x.sum())
    loss.backward()
    assert x.grad.tolist() == [2.0, 2.0, 2.0]


def test_backward_rejects_non_scalar():
    x = tz.Tensor(np.zeros((2, 2)), requires_grad=True)
    with pytest.raises(ContractError):
        tz.add(x, x).backward()


def test_forward_bitwise_deterministic():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((4, 6))
    g = rng.standard_normal(6)
    b = rng.standard_normal(6)

    def run():
        t = tz.Tensor(x.copy(), requires_grad=True)
        out = tz.layer_norm(tz.gelu(t), tz.Tensor(g.copy()), tz.Tensor(b.copy()))
        return out.data.tobytes()

    assert run() == run()


def test_add_suffix_broadcast_and_errors():
    a = tz.Tensor(np.ones((2, 3, 4)), requires_grad=True)
    b = tz.Tensor(np.arange(4.0), requires_grad=True)
    out = tz.add(a, b)
    assert out.shape == (2, 3, 4)
    out.sum().backward()
    assert np.array_equal(b.grad, np.full(4, 6.0))  # summed over 2*3 leading slots
    with pytest.raises(DimensionError):
        tz.add(a, tz.Tensor(np.ones(3)))
    with pytest.raises(DimensionError):
        tz.mul(a, tz.Tensor(np.ones((2, 3))))


def test_embedding_lookup_rejects_bad_ids():
    table = tz.Tensor(np.zeros((5, 2)))
    with pytest.raises(VocabIndexError):
        tz.embedding_lookup(table, np.array([0, 5]))


def test_no_grad_suppresses_tape():
    x = tz.Tensor(np.ones((2, 2)), requires_grad=True)
    with tz.no_grad():
        out = tz.gelu(x)
    assert out._backward is None and out._parents == ()


# ---------------------------------------------------------------------------
# finite-difference sweep, one entry per differentiable op


def _case_matmul(rng):
    arrays = [rng.standard_normal((4, 3)), rng.standard_normal((3, 5))]
    w = rng.standard_normal((4, 5))

    def make_loss(a, b):
        ta = tz.Tensor(a.copy(), requires_grad=True)
        tb = tz.Tensor(b.copy(), requires_grad=True)
        return _weighted_sum(ta.matmul(tb), w), [ta, tb]

    return make_loss, arrays


def _case_matmul_batched(rng):
    arrays = [rng.standard_normal((2, 3, 4)), rng.standard_normal((4, 5))]
    w = rng.standard_normal((2, 3, 5))

    def make_loss(a, b):
        ta = tz.Tensor(a.copy(), requires_grad=True)
        tb = tz.Tensor(b.copy(), requires_grad=True)
        return _weighted_sum(ta.matmul(tb), w), [ta, tb]

    return make_loss, arrays


def _case_matmul_4d(rng):
    arrays = [rng.standard_normal((2, 2, 3, 4)), rng.standard_normal((2, 2, 4, 3))]
    w = rng.standard_normal((2, 2, 3, 3))

    def make_loss(a, b):
        ta = tz.Tensor(a.copy(), requires_grad=True)
        tb = tz.Tensor(b.copy(), requires_grad=True)
        return _weighted_sum(ta.matmul(tb), w), [ta, tb]

    return make_loss, arrays


def _case_add(rng):
    arrays = [rng.standard_normal((3, 4)), rng.standard_normal((3, 4))]
    w = rng.standard_normal((3, 4))

    def make_loss(a, b):
        ta = tz.Tensor(a.copy(), requires_grad=True)
        tb = tz.Tensor(b.copy(), requires_grad=True)
        return _weighted_sum(tz.add(ta, tb), w), [ta, tb]

    return make_loss, arrays


def _case_add_bias(rng):
    arrays = [rng.standard_normal((2, 3, 4)), rng.standard_normal(4)]
    w = rng.standard_normal((2, 3, 4))

    def make_loss(a, b):
        ta = tz.Tensor(a.copy(), requires_grad=True)
        tb = tz.Tensor(b.copy(), requires_grad=True)
        return _weighted_sum(tz.add(ta, tb), w), [ta, tb]

    return make_loss, arrays


def _case_mul(rng):
    arrays = [rng.standard_normal((3, 5)), rng.standard_normal((3, 5))]
    w = rng.standard_normal((3, 5))

    def make_loss(a, b):
        ta = tz.Tensor(a.copy(), requires_grad=True)
        tb = tz.Tensor(b.copy(), requires_grad=True)
        return _weighted_sum(tz.mul(ta, tb), w), [ta, tb]

    return make_loss, arrays


def _case_gelu(rng):
    arrays = [rng.standard_normal((4, 6))]
    w = rng.standard_normal((4, 6))

    def make_loss(a):
        ta = tz.Tensor(a.copy(), requires_grad=True)
        return _weighted_sum(tz.gelu(ta), w), [ta]

    return make_loss, arrays


def _case_layer_norm(rng):
    arrays = [
        rng.standard_normal((2, 3, 8)),
        rng.standard_normal(8),
        rng.standard_normal(8),
    ]
    w = rng.standard_normal((2, 3, 8))

    def make_loss(x, g, b):
        tx = tz.Tensor(x.copy(), requires_grad=True)
        tg = tz.Tensor(g.copy(), requires_grad=True)
        tb = tz.Tensor(b.copy(), requires_grad=True)
        return _weighted_sum(tz.layer_norm(tx, tg, tb), w), [tx, tg, tb]

    return make_loss, arrays


def _case_softmax(rng):
    arrays = [rng.standard_normal((3, 7))]
    w = rng.standard_normal((3, 7))

    def make_loss(x):
        tx = tz.Tensor(x.copy(), requires_grad=True)
        return _weighted_sum(tz.softmax(tx), w), [tx]

    return make_loss, arrays


def _case_embedding(rng):
    arrays = [rng.standard_normal((6, 4))]
    ids = rng.integers(0, 6, size=(2, 5))  # repeats exercise accumulation
    w = rng.standard_normal((2, 5, 4))

    def make_loss(table):
        tt = tz.Tensor(table.copy(), requires_grad=True)
        return _weighted_sum(tz.embedding_lookup(tt, ids), w), [tt]

    return make_loss, arrays


def _case_transpose_reshape(rng):
    arrays = [rng.standard_normal((2, 3, 4))]
    w = rng.standard_normal((12, 2))

    def make_loss(x):
        tx = tz.Tensor(x.copy(), requires_grad=True)
        out = tx.transpose(0, 2).reshape((12, 2))
        return _weighted_sum(out, w), [tx]

    return make_loss, arrays


def _case_concat(rng):
    arrays = [rng.standard_normal((2, 3)), rng.standard_normal((2, 2)),
              rng.standard_normal((2, 4))]
    w = rng.standard_normal((2, 9))

    def make_loss(a, b, c):
        ts = [tz.Tensor(arr.copy(), requires_grad=True) for arr in (a, b, c)]
        return _weighted_sum(tz.concat(ts, axis=1), w), ts

    return make_loss, arrays


def _case_cross_entropy(rng):
    arrays = [rng.standard_normal((6, 9))]
    targets = rng.integers(0, 9, size=6)
    mask = (rng.random(6) < 0.7).astype(float)
    mask[0] = 1.0  # never fully masked

    def make_loss(logits):
        tl = tz.Tensor(logits.copy(), requires_grad=True)
        return tz.softmax_cross_entropy(tl, targets, mask), [tl]

    return make_loss, arrays


def _case_sum(rng):
    arrays = [rng.standard_normal((3, 4))]

    def make_loss(x):
        tx = tz.Tensor(x.copy(), requires_grad=True)
        return tx.sum(), [tx]

    return make_loss, arrays


OP_CASES = {
    "matmul": _case_matmul,
    "matmul_batched": _case_matmul_batched,
    "matmul_4d": _case_matmul_4d,
    "add": _case_add,
    "add_bias": _case_add_bias,
    "mul": _case_mul,
    "gelu": _case_gelu,
    "layer_norm": _case_layer_norm,
    "softmax": _case_softmax,
    "embedding_lookup": _case_embedding,
    "transpose_reshape": _case_transpose_reshape,
    "concat": _case_concat,
    "softmax_cross_entropy": _case_cross_entropy,
    "sum": _case_sum,
}


def run_op_sweep(cases_per_op: int = 100, seed: int = 0) -> dict[str, float]:
    """Worst FD relative error per op over `cases_per_op` random cases."""
    worst: dict[str, float] = {}
    for name, case_fn in OP_CASES.items():
        rng = np.random.default_rng(seed)
        err = 0.0
        for _ in range(cases_per_op):
            make_loss, arrays = case_fn(rng)
            err = max(err, check_grads(make_loss, arrays))
        worst[name] = err
    return worst


@pytest.mark.parametrize("op_name", sorted(OP_CASES))
def test_op_gradients_match_finite_differences(op_name):
    rng = np.random.default_rng(7)
    err = 0.0
    for _ in range(100):
        make_loss, arrays = OP_CASES[op_name](rng)
        err = max(err, check_grads(make_loss, arrays))
    assert err <= REL_TOL, f"{op_name}: max rel err {err:.3e}"
