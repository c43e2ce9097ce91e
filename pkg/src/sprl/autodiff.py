"""Reverse-mode automatic differentiation on a per-run tape, plus Adam.

A Graph owns an append-only tape of operations. Leaves are constants or named
parameters; every op records its inputs and a backward closure, so the tape is
topologically ordered by construction and the backward pass visits each node
exactly once, in reverse. Arrays are float32 by default; a graph can be built
in float64, which the gradient checker uses to measure derivative math without
single-precision noise.

Graphs are single-threaded; independent graphs share no mutable state.
"""

import numpy as np

from . import kernels

LOG_CLAMP = 1e-12


class ShapeError(ValueError):
    """Operand shapes do not conform for the requested operation."""


class GradientError(RuntimeError):
    """A gradient or loss value is non-finite."""


class Tensor:
    """A numeric array participating in a recorded computation graph."""

    __slots__ = ("data", "graph", "needs_grad", "name")

    def __init__(self, data, graph, needs_grad=False, name=None):
        self.data = data
        self.graph = graph
        self.needs_grad = needs_grad
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, name={self.name!r})"


class _Node:
    __slots__ = ("out", "inputs", "bwd", "kind")

    def __init__(self, out, inputs, bwd, kind):
        self.out = out
        self.inputs = inputs
        self.bwd = bwd
        self.kind = kind


class Graph:
    """Append-only record of operations for one forward/backward pass."""

    def __init__(self, dtype=np.float32):
        self.dtype = np.dtype(dtype)
        self._nodes = []
        self._params = {}  # name -> Tensor

    def constant(self, data, name=None):
        arr = np.asarray(data, dtype=self.dtype)
        return Tensor(arr, self, needs_grad=False, name=name)

    def parameter(self, data, name):
        if name in self._params:
            raise ValueError(f"duplicate parameter name {name!r}")
        arr = np.asarray(data, dtype=self.dtype)
        t = Tensor(arr, self, needs_grad=True, name=name)
        self._params[name] = t
        return t

    @property
    def parameters(self):
        return dict(self._params)

    def record(self, data, inputs, bwd, kind):
        out = Tensor(
            np.asarray(data, dtype=self.dtype),
            self,
            needs_grad=any(t.needs_grad for t in inputs),
        )
        if out.needs_grad:
            self._nodes.append(_Node(out, inputs, bwd, kind))
        return out


def _as_tensor(x, graph):
    if isinstance(x, Tensor):
        if x.graph is not graph:
            raise ValueError("operands belong to different graphs")
        return x
    return graph.constant(x)


def _graph_of(operands):
    for x in operands:
        if isinstance(x, Tensor):
            return x.graph
    raise TypeError("at least one operand must be a Tensor")


def matmul(a, b):
    g = _graph_of((a, b))
    a, b = _as_tensor(a, g), _as_tensor(b, g)
    ad, bd = a.data, b.data
    if ad.ndim != 2 or bd.ndim not in (1, 2) or ad.shape[1] != bd.shape[0]:
        raise ShapeError(f"matmul: cannot multiply shapes {ad.shape} and {bd.shape}")

    def bwd(dout):
        if bd.ndim == 1:
            return np.outer(dout, bd), ad.T @ dout
        return dout @ bd.T, ad.T @ dout

    return g.record(ad @ bd, (a, b), bwd, "matmul")


def _binary_equal_shape(a, b, kind):
    g = _graph_of((a, b))
    a, b = _as_tensor(a, g), _as_tensor(b, g)
    if a.data.shape != b.data.shape:
        raise ShapeError(f"{kind}: shapes {a.data.shape} and {b.data.shape} differ")
    return g, a, b


def add(a, b):
    g, a, b = _binary_equal_shape(a, b, "add")
    return g.record(a.data + b.data, (a, b), lambda dout: (dout, dout), "add")


def sub(a, b):
    g, a, b = _binary_equal_shape(a, b, "sub")
    return g.record(a.data - b.data, (a, b), lambda dout: (dout, -dout), "sub")


def elementwise_mul(a, b):
    g, a, b = _binary_equal_shape(a, b, "elementwise_mul")
    ad, bd = a.data, b.data
    return g.record(ad * bd, (a, b), lambda dout: (dout * bd, dout * ad), "elementwise_mul")


def scale(x, c):
    """x * c for a plain python scalar c (no gradient w.r.t. c)."""
    g = _graph_of((x,))
    x = _as_tensor(x, g)
    c = float(c)
    return g.record(x.data * c, (x,), lambda dout: (dout * c,), "scale")


def concat(tensors, axis=0):
    g = _graph_of(tensors)
    tensors = [_as_tensor(t, g) for t in tensors]
    shapes = [t.data.shape for t in tensors]
    ndim = len(shapes[0])
    for s in shapes[1:]:
        if len(s) != ndim or any(s[i] != shapes[0][i] for i in range(ndim) if i != axis % ndim):
            raise ShapeError(f"concat: incompatible shapes {shapes} along axis {axis}")
    sizes = [s[axis % ndim] for s in shapes]
    splits = np.cumsum(sizes)[:-1]

    def bwd(dout):
        return tuple(np.split(dout, splits, axis=axis))

    return g.record(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), bwd, "concat")


def reshape(x, shape):
    g = _graph_of((x,))
    x = _as_tensor(x, g)
    old = x.data.shape
    return g.record(x.data.reshape(shape), (x,), lambda dout: (dout.reshape(old),), "reshape")


def tanh(x):
    g = _graph_of((x,))
    x = _as_tensor(x, g)
    out = np.tanh(x.data)
    return g.record(out, (x,), lambda dout: (dout * (1.0 - out * out),), "tanh")


def sigmoid(x):
    g = _graph_of((x,))
    x = _as_tensor(x, g)
    out = kernels.numpy_impl.sigmoid(x.data)
    return g.record(out, (x,), lambda dout: (dout * out * (1.0 - out),), "sigmoid")


def relu(x):
    g = _graph_of((x,))
    x = _as_tensor(x, g)
    mask = x.data > 0
    return g.record(np.where(mask, x.data, 0.0), (x,), lambda dout: (dout * mask,), "relu")


def square(x):
    g = _graph_of((x,))
    x = _as_tensor(x, g)
    xd = x.data
    return g.record(xd * xd, (x,), lambda dout: (dout * 2.0 * xd,), "square")


def softmax(x, axis=-1):
    g = _graph_of((x,))
    x = _as_tensor(x, g)
    if x.data.shape == () or x.data.shape[axis] == 0:
        raise ShapeError(f"softmax: empty axis {axis} for shape {x.data.shape}")
    shifted = np.exp(x.data - x.data.max(axis=axis, keepdims=True))
    out = shifted / shifted.sum(axis=axis, keepdims=True)

    def bwd(dout):
        inner = (out * dout).sum(axis=axis, keepdims=True)
        return (out * (dout - inner),)

    return g.record(out, (x,), bwd, "softmax")


def log(x):
    """Natural log with the argument clamped below at LOG_CLAMP."""
    g = _graph_of((x,))
    x = _as_tensor(x, g)
    clamped = np.maximum(x.data, LOG_CLAMP)
    live = x.data >= LOG_CLAMP
    return g.record(np.log(clamped), (x,), lambda dout: (dout * live / clamped,), "log")


def sum_(x):
    g = _graph_of((x,))
    x = _as_tensor(x, g)
    shape = x.data.shape
    return g.record(x.data.sum(), (x,), lambda dout: (np.broadcast_to(dout, shape).copy(),), "sum")


def mean(x):
    g = _graph_of((x,))
    x = _as_tensor(x, g)
    shape = x.data.shape
    n = x.data.size
    return g.record(x.data.mean(), (x,), lambda dout: (np.broadcast_to(dout / n, shape).copy(),), "mean")


def bilstm(x, wf, uf, bf, wb, ub, bb):
    """Bidirectional recurrent read; output (T, 2H) = [forward ; backward]."""
    g = _graph_of((x, wf))
    x, wf, uf, bf = (_as_tensor(t, g) for t in (x, wf, uf, bf))
    wb, ub, bb = (_as_tensor(t, g) for t in (wb, ub, bb))
    xd = x.data
    xr = np.ascontiguousarray(xd[::-1])
    fwd = kernels.lstm_forward(xd, wf.data, uf.data, bf.data)
    bwdr = kernels.lstm_forward(xr, wb.data, ub.data, bb.data)
    H = fwd[0].shape[1]
    s = np.concatenate([fwd[0], bwdr[0][::-1]], axis=1)

    def bwd(dout):
        dhf = np.ascontiguousarray(dout[:, :H])
        dhb_r = np.ascontiguousarray(dout[::-1, H:])
        dx1, dwf, duf, dbf = kernels.lstm_backward(dhf, xd, wf.data, uf.data, *fwd)
        dx2r, dwb, dub, dbb = kernels.lstm_backward(dhb_r, xr, wb.data, ub.data, *bwdr)
        dx = dx1 + dx2r[::-1]
        return dx, dwf, duf, dbf, dwb, dub, dbb

    return g.record(s, (x, wf, uf, bf, wb, ub, bb), bwd, "bilstm")


def pairwise_attention(s, q, k, beta, v, alpha):
    """Every position attends to every position; output mixes the states."""
    g = _graph_of((s, q))
    s, q, k, beta, v, alpha = (_as_tensor(t, g) for t in (s, q, k, beta, v, alpha))
    z, qs, ks, hp, es, att = kernels.attention_forward(
        s.data, q.data, k.data, beta.data, v.data, alpha.data
    )

    def bwd(dout):
        return kernels.attention_backward(
            dout, s.data, q.data, k.data, v.data, qs, ks, hp, es, att
        )

    return g.record(z, (s, q, k, beta, v, alpha), bwd, "pairwise_attention")


_OPS = {
    "matmul": matmul,
    "add": add,
    "elementwise_mul": elementwise_mul,
    "concat": lambda *ts, axis=0: concat(ts, axis=axis),
    "tanh": tanh,
    "sigmoid": sigmoid,
    "relu": relu,
    "softmax": softmax,
    "sum": sum_,
    "mean": mean,
    "square": square,
    # extras used by the model/loss builders
    "sub": sub,
    "scale": scale,
    "log": log,
    "reshape": reshape,
    "bilstm": bilstm,
    "pairwise_attention": pairwise_attention,
}


def op_apply(kind, *operands, **kwargs):
    """Apply a named operation to tensors, recording it in their graph."""
    try:
        fn = _OPS[kind]
    except KeyError:
        raise ValueError(f"unknown op kind {kind!r}") from None
    return fn(*operands, **kwargs)


def backward(graph, loss):
    """Gradient of a scalar loss w.r.t. every parameter registered in graph.

    Parameters that do not participate in the loss get a zero gradient.
    """
    if not isinstance(loss, Tensor) or loss.graph is not graph:
        raise ValueError("loss must be a Tensor produced by this graph")
    if loss.data.shape != ():
        raise ShapeError(f"loss must be scalar, got shape {loss.data.shape}")
    grads = {id(loss): np.ones((), dtype=graph.dtype)}
    for node in reversed(graph._nodes):
        dout = grads.pop(id(node.out), None)
        if dout is None:
            continue
        dins = node.bwd(dout)
        for t, din in zip(node.inputs, dins):
            if not t.needs_grad:
                continue
            acc = grads.get(id(t))
            if acc is None:
                grads[id(t)] = np.asarray(din, dtype=graph.dtype).reshape(t.data.shape)
            else:
                acc += np.asarray(din, dtype=graph.dtype).reshape(t.data.shape)
    return {
        name: grads.get(id(t), np.zeros_like(t.data)) for name, t in graph._params.items()
    }


class AdamState:
    """First/second moment accumulators plus the shared step counter."""

    def __init__(self, params):
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0


def adam_step(params, grads, state, lr, beta1=0.9, beta2=0.999, eps=1e-7):
    """One Adam update with bias correction, in place on the param arrays."""
    for name, grad in grads.items():
        if not np.all(np.isfinite(grad)):
            raise GradientError(f"non-finite gradient for parameter {name!r}")
    state.t += 1
    c1 = 1.0 - beta1 ** state.t
    c2 = 1.0 - beta2 ** state.t
    for name, p in params.items():
        grad = grads[name]
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * grad
        v *= beta2
        v += (1.0 - beta2) * grad * grad
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return params, state


def grad_check(build, point, epsilon=1e-3):
    """Max relative error between analytic and central-difference gradients.

    `build` maps a dict of leaf Tensors (same keys as `point`) to a scalar
    loss Tensor. The dtype of the arrays in `point` decides the evaluation
    precision. Relative error per coordinate is
    |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
    """
    dtype = next(iter(point.values())).dtype
    g = Graph(dtype=dtype)
    leaves = {name: g.parameter(arr, name) for name, arr in point.items()}
    analytic = backward(g, build(leaves))

    def evaluate(pt):
        g2 = Graph(dtype=dtype)
        lv = {name: g2.parameter(arr, name) for name, arr in pt.items()}
        return float(build(lv).data)

    worst = 0.0
    for name, arr in point.items():
        flat_a = analytic[name].ravel()
        work = {k: v.copy() for k, v in point.items()}
        target = work[name].ravel()
        for idx in range(target.size):
            orig = target[idx]
            target[idx] = orig + epsilon
            hi_x = float(target[idx])
            hi = evaluate(work)
            target[idx] = orig - epsilon
            lo_x = float(target[idx])
            lo = evaluate(work)
            target[idx] = orig
            numeric = (hi - lo) / (hi_x - lo_x)
            a = float(flat_a[idx])
            rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            worst = max(worst, rel)
    return worst
