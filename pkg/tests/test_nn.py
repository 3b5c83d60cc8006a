import numpy as np
import pytest

from treecost import nn
from treecost.nn.checkpoint import dumps_params, loads_params


def p64(rng, *shape, lo=-1.0, hi=1.0, name=""):
    return nn.param(rng.uniform(lo, hi, size=shape).astype(np.float64), name)


def reduce(v: nn.Var, w: np.ndarray) -> nn.Var:
    return nn.weighted_sum(v, w)


OPS = {
    "dense": lambda a, b, w, c: nn.dense(a, w, c),
    "relu": lambda a, b, w, c: nn.relu(a),
    "sigmoid": lambda a, b, w, c: nn.sigmoid(a),
    "tanh": lambda a, b, w, c: nn.tanh(a),
    "add": lambda a, b, w, c: nn.add(a, b),
    "mul": lambda a, b, w, c: nn.mul(a, b),
    "scale": lambda a, b, w, c: nn.scale(a, -2.5),
    "mean2": lambda a, b, w, c: nn.mean2(a, b),
    "concat": lambda a, b, w, c: nn.concat([a, b]),
    "concat0": lambda a, b, w, c: nn.concat([a, b], axis=0),
    "gather": lambda a, b, w, c: nn.gather_rows(a, np.array([2, 0, 0, 1])),
    "min": lambda a, b, w, c: nn.pool_pair(a, b, "min"),
    "max": lambda a, b, w, c: nn.pool_pair(a, b, "max"),
    "select": lambda a, b, w, c: nn.pool_select(a, b, np.array([True, False, True])),
    "affine": lambda a, b, w, c: nn.affine_const(a, 0.001, 1.0),
}


@pytest.mark.parametrize("name", sorted(OPS))
def test_op_gradients(name):
    rng = np.random.default_rng(sorted(OPS).index(name))
    a, b = p64(rng, 3, 4, name="a"), p64(rng, 3, 4, name="b")
    w, c = p64(rng, 5, 4, name="w"), p64(rng, 5, name="c")
    out = OPS[name](a, b, w, c)
    weights = rng.normal(size=out.shape)
    err = nn.grad_check(lambda: reduce(OPS[name](a, b, w, c), weights), {"a": a, "b": b, "w": w, "c": c}, h=1e-6)
    assert err < 1e-6


def test_qerror_gradient_both_branches():
    rng = np.random.default_rng(1)
    p = p64(rng, 6, 1, lo=0.05, hi=1.0)
    t = np.array([[0.5], [0.1], [0.9], [0.02], [0.7], [0.3]])
    assert nn.grad_check(lambda: nn.mean(nn.qerror(p, t)), {"p": p}, h=1e-7) < 1e-5


def test_qerror_rejects_non_positive():
    with pytest.raises(ValueError):
        nn.qerror(nn.param(np.array([[0.0]])), np.array([[1.0]]))


def test_lstm_cell_gradients():
    rng = np.random.default_rng(3)
    cell = nn.init_cell(rng, 5, 4, dtype=np.float64)
    x, g, r = p64(rng, 2, 5), p64(rng, 2, 4), p64(rng, 2, 4)
    params = {"x": x, "g": g, "r": r}
    for k, blk in cell.blocks().items():
        params[k + ".W"], params[k + ".b"] = blk.W, blk.b
    w = rng.normal(size=(2, 4))

    def f():
        g2, r2 = nn.lstm_cell(cell, x, g, r)
        return nn.add(reduce(g2, w), reduce(r2, w[::-1]))

    assert nn.grad_check(f, params, h=1e-6) < 1e-6


def test_pooling_ties_go_to_first_input():
    a = nn.param(np.array([[1.0, 2.0]]))
    b = nn.param(np.array([[1.0, 3.0]]))
    nn.mean(nn.pool_pair(a, b, "min")).backward()
    assert a.grad.tolist() == [[0.5, 0.5]] and b.grad.tolist() == [[0.0, 0.0]]


def test_shared_input_accumulates():
    x = nn.param(np.array([2.0]))
    nn.weighted_sum(nn.mul(x, x), np.ones(1)).backward()
    assert x.grad.tolist() == [4.0]


def test_check_finite_raises():
    with pytest.raises(nn.NonFiniteError):
        nn.check_finite(nn.const(np.array([np.nan])))


def test_dense_shape_mismatch():
    with pytest.raises(ValueError, match="dense shape"):
        nn.dense(nn.const(np.zeros((1, 3))), nn.const(np.zeros((2, 4))), nn.const(np.zeros(2)))


# ---------------------------------------------------------------- optimiser


def test_adam_first_step_moves_by_lr():
    p = nn.param(np.array([1.0, -1.0, 0.5]))
    opt = nn.Adam({"p": p}, lr=0.01)
    opt.step({"p": np.array([3.0, -0.2, 1e-3])})
    # bias-corrected first step is lr * sign(g) up to eps
    assert np.allclose(p.value, [0.99, -0.99, 0.49], atol=1e-6)


def test_adam_matches_hand_computed_second_step():
    p = nn.param(np.array([0.0]))
    opt = nn.Adam({"p": p}, lr=0.1, beta1=0.5, beta2=0.5, eps=0.0)
    opt.step({"p": np.array([1.0])})
    opt.step({"p": np.array([3.0])})
    m = (0.5 * 0.5 * 1 + 0.5 * 3) / (1 - 0.25)
    v = (0.5 * 0.5 * 1 + 0.5 * 9) / (1 - 0.25)
    assert p.value[0] == pytest.approx(-0.1 - 0.1 * m / np.sqrt(v))


def test_adam_minimises_quadratic():
    p = nn.param(np.array([3.0, -2.0]))
    opt = nn.Adam({"p": p}, lr=0.05)
    for _ in range(800):
        opt.zero_grad()
        nn.weighted_sum(nn.mul(p, p), np.ones(2)).backward()
        opt.step()
    assert np.abs(p.value).max() < 1e-2


# ---------------------------------------------------------------- checkpoints


def test_params_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    arrays = {"a.W": rng.normal(size=(3, 2)).astype(np.float32), "b": rng.normal(size=5).astype(np.float32)}
    nn.save_params(tmp_path / "m.bin", arrays, {"k": [1, 2]})
    back, meta = nn.load_params(tmp_path / "m.bin")
    assert meta == {"k": [1, 2]}
    for k in arrays:
        assert np.array_equal(back[k], arrays[k])


def test_corrupt_checkpoint_detected():
    blob = bytearray(dumps_params({"w": np.ones((2, 2), np.float32)}))
    blob[-10] ^= 0xFF
    with pytest.raises(nn.CheckpointError, match="checksum"):
        loads_params(bytes(blob))


def test_foreign_file_rejected():
    with pytest.raises(nn.CheckpointError):
        loads_params(b"PK\x03\x04 definitely not ours")
