"""Reverse-mode automatic differentiation over dense float64 matrices.

Everything is a 2-d float64 array: scalars are 1x1, row vectors 1xN.
Each operation returns a new :class:`Tensor` whose backward closure
accumulates gradients into its parents, so calling ``backward()`` on a
scalar loss fills the ``grad`` field of every parameter that fed it.
The op set is deliberately small: exactly the layers and reductions the
hash networks and their losses need.
"""

import numpy as np

from .errors import DegenerateBatchError, DegenerateVectorError, ShapeError


def as_matrix(x) -> np.ndarray:
    """Coerce to a 2-d float64 array (1-d input becomes a row vector)."""
    a = np.asarray(x, dtype=np.float64)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = a.reshape(1, -1)
    if a.ndim != 2:
        raise ShapeError(f"expected a matrix, got array of shape {a.shape}")
    return a


class Tensor:
    """A matrix node in the backward graph.

    ``data`` holds the value, ``grad`` accumulates d(loss)/d(data) once
    ``backward()`` has run on a downstream scalar. Leaf tensors (inputs,
    parameters) have no parents; op results carry a closure that routes
    their gradient to the operands.
    """

    __slots__ = ("data", "_grad", "_parents", "_backward")

    # make ndarray <op> Tensor defer to our reflected operators instead of
    # numpy trying to broadcast over the Tensor object
    __array_ufunc__ = None

    def __init__(self, data, _parents=(), _backward=None):
        self.data = as_matrix(data)
        self._grad = None
        self._parents = tuple(_parents)
        self._backward = _backward

    @property
    def grad(self) -> np.ndarray:
        # allocated on first touch: forward-only evaluations never pay for it
        if self._grad is None:
            self._grad = np.zeros_like(self.data)
        return self._grad

    @grad.setter
    def grad(self, value):
        self._grad = value

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() on non-scalar tensor of shape {self.shape}")
        return float(self.data[0, 0])

    def detach(self) -> "Tensor":
        """Copy of the value with no graph history (gradients stop here)."""
        return Tensor(self.data.copy())

    def zero_grad(self):
        if self._grad is not None:
            self._grad[...] = 0.0

    def backward(self):
        """Backpropagate from a scalar: fills grad on every ancestor."""
        if self.data.size != 1:
            raise ShapeError(f"backward() needs a scalar loss, got shape {self.shape}")
        order = _topo_order(self)
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None:
                node._backward(node.grad)

    # arithmetic sugar; the right operand may be a Tensor, a python scalar,
    # or a constant ndarray (constants receive no gradient)
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(_wrap_const(other, self)))

    def __rsub__(self, other):
        return add(neg(self), other)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise ShapeError("tensor/tensor division is not part of the op set")
        return mul(self, 1.0 / float(other))

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, leaf={self._backward is None})"


class Param(Tensor):
    """Trainable leaf tensor carrying Adam moment buffers."""

    __slots__ = ("adam_m", "adam_v")

    def __init__(self, value):
        super().__init__(value)
        self.adam_m = np.zeros_like(self.data)
        self.adam_v = np.zeros_like(self.data)


def _topo_order(root: Tensor):
    """Iterative DFS topological order of the graph below ``root``."""
    order, visited = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in visited:
                stack.append((p, False))
    return order


def _wrap_const(x, like: Tensor) -> Tensor:
    """Turn scalars / ndarrays into constant (parentless) tensors."""
    if isinstance(x, Tensor):
        return x
    if np.isscalar(x):
        return Tensor(np.full_like(like.data, float(x)))
    return Tensor(x)


# ---------------------------------------------------------------------------
# elementwise and structural ops


def add(a: Tensor, b) -> Tensor:
    """a + b. b may be a same-shape tensor, a 1xN row (bias broadcast),
    a scalar, or a constant ndarray."""
    if not isinstance(b, Tensor):
        if np.isscalar(b):
            out = Tensor(a.data + float(b), (a,))

            def bwd_scalar(g, a=a):
                a.grad += g

            out._backward = bwd_scalar
            return out
        b = Tensor(b)  # constant matrix, no parents -> no gradient
    if b.shape == a.shape:
        out = Tensor(a.data + b.data, (a, b))

        def bwd(g, a=a, b=b):
            a.grad += g
            b.grad += g

        out._backward = bwd
        return out
    if b.shape == (1, a.shape[1]):
        out = Tensor(a.data + b.data, (a, b))

        def bwd_row(g, a=a, b=b):
            a.grad += g
            b.grad += g.sum(axis=0, keepdims=True)

        out._backward = bwd_row
        return out
    raise ShapeError(f"add: shapes {a.shape} and {b.shape} do not conform")


def neg(a: Tensor) -> Tensor:
    out = Tensor(-a.data, (a,))

    def bwd(g, a=a):
        a.grad -= g

    out._backward = bwd
    return out


def mul(a: Tensor, b) -> Tensor:
    """Elementwise product. b may be a same-shape tensor, a scalar, or a
    constant ndarray mask (no gradient flows into constants)."""
    if isinstance(b, Tensor):
        if a.shape != b.shape:
            raise ShapeError(f"mul: shapes {a.shape} and {b.shape} differ")
        out = Tensor(a.data * b.data, (a, b))

        def bwd(g, a=a, b=b):
            a.grad += g * b.data
            b.grad += g * a.data

        out._backward = bwd
        return out
    const = float(b) if np.isscalar(b) else as_matrix(b)
    if not np.isscalar(const) and const.shape != a.shape:
        raise ShapeError(f"mul: constant shape {const.shape} != tensor shape {a.shape}")
    out = Tensor(a.data * const, (a,))

    def bwd_const(g, a=a, const=const):
        a.grad += g * const

    out._backward = bwd_const
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: {a.shape} @ {b.shape} (inner dimensions differ)")
    out = Tensor(a.data @ b.data, (a, b))

    def bwd(g, a=a, b=b):
        a.grad += g @ b.data.T
        b.grad += a.data.T @ g

    out._backward = bwd
    return out


def transpose(a: Tensor) -> Tensor:
    out = Tensor(a.data.T.copy(), (a,))

    def bwd(g, a=a):
        a.grad += g.T

    out._backward = bwd
    return out


def exp(a: Tensor) -> Tensor:
    val = np.exp(a.data)
    out = Tensor(val, (a,))

    def bwd(g, a=a, val=val):
        a.grad += g * val

    out._backward = bwd
    return out


def log(a: Tensor) -> Tensor:
    out = Tensor(np.log(a.data), (a,))

    def bwd(g, a=a):
        a.grad += g / a.data

    out._backward = bwd
    return out


def clamp(a: Tensor, lo: float, hi: float) -> Tensor:
    """Clip values to [lo, hi]; gradient passes only where unclipped."""
    val = np.clip(a.data, lo, hi)
    out = Tensor(val, (a,))
    inside = (a.data >= lo) & (a.data <= hi)

    def bwd(g, a=a, inside=inside):
        a.grad += g * inside

    out._backward = bwd
    return out


def relu(a: Tensor) -> Tensor:
    out = Tensor(np.maximum(a.data, 0.0), (a,))
    pos = a.data > 0

    def bwd(g, a=a, pos=pos):
        a.grad += g * pos

    out._backward = bwd
    return out


def tanh(a: Tensor) -> Tensor:
    val = np.tanh(a.data)
    out = Tensor(val, (a,))

    def bwd(g, a=a, val=val):
        a.grad += g * (1.0 - val * val)

    out._backward = bwd
    return out


def sigmoid(a: Tensor) -> Tensor:
    # split by sign for overflow-free evaluation
    x = a.data
    val = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                   np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
    out = Tensor(val, (a,))

    def bwd(g, a=a, val=val):
        a.grad += g * val * (1.0 - val)

    out._backward = bwd
    return out


ACTIVATIONS = {"relu": relu, "tanh": tanh, "sigmoid": sigmoid}


def activation_forward(a: Tensor, kind: str) -> Tensor:
    try:
        fn = ACTIVATIONS[kind]
    except KeyError:
        raise ShapeError(f"unknown activation kind {kind!r}") from None
    return fn(a)


# ---------------------------------------------------------------------------
# reductions


def sum_all(a: Tensor) -> Tensor:
    out = Tensor([[a.data.sum()]], (a,))

    def bwd(g, a=a):
        a.grad += g[0, 0]

    out._backward = bwd
    return out


def mean_all(a: Tensor) -> Tensor:
    n = a.data.size
    out = Tensor([[a.data.sum() / n]], (a,))

    def bwd(g, a=a, n=n):
        a.grad += g[0, 0] / n

    out._backward = bwd
    return out


def sum_rows(a: Tensor) -> Tensor:
    """Sum each row: MxN -> Mx1."""
    out = Tensor(a.data.sum(axis=1, keepdims=True), (a,))

    def bwd(g, a=a):
        a.grad += g  # broadcasts Mx1 over columns

    out._backward = bwd
    return out


def sum_cols(a: Tensor) -> Tensor:
    """Sum each column over the batch: MxN -> 1xN."""
    out = Tensor(a.data.sum(axis=0, keepdims=True), (a,))

    def bwd(g, a=a):
        a.grad += g  # broadcasts 1xN over rows

    out._backward = bwd
    return out


def diag_part(a: Tensor) -> Tensor:
    """Diagonal of a square matrix as a column vector."""
    m, n = a.shape
    if m != n:
        raise ShapeError(f"diag_part: matrix is {a.shape}, not square")
    out = Tensor(np.diag(a.data).reshape(-1, 1).copy(), (a,))

    def bwd(g, a=a, m=m):
        a.grad[np.arange(m), np.arange(m)] += g[:, 0]

    out._backward = bwd
    return out


def vstack(tensors) -> Tensor:
    """Stack tensors with equal width along the row axis."""
    tensors = list(tensors)
    width = tensors[0].shape[1]
    for t in tensors:
        if t.shape[1] != width:
            raise ShapeError(f"vstack: widths differ ({t.shape[1]} vs {width})")
    out = Tensor(np.concatenate([t.data for t in tensors], axis=0), tuple(tensors))
    offsets = np.cumsum([0] + [t.shape[0] for t in tensors])

    def bwd(g, tensors=tensors, offsets=offsets):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            t.grad += g[lo:hi]

    out._backward = bwd
    return out


def row_l2_normalize(a: Tensor) -> Tensor:
    """Scale each row to unit L2 norm. Zero rows are rejected: embeddings
    and tanh codes never legitimately vanish, so a zero row is a bug."""
    norms = np.linalg.norm(a.data, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        row = int(np.argmin(norms))
        raise DegenerateVectorError(f"row {row} has zero norm, cannot normalize")
    val = a.data / norms
    out = Tensor(val, (a,))

    def bwd(g, a=a, val=val, norms=norms):
        dots = (g * val).sum(axis=1, keepdims=True)
        a.grad += (g - dots * val) / norms

    out._backward = bwd
    return out


# ---------------------------------------------------------------------------
# layers


def linear_forward(inp: Tensor, weight: Param, bias: Param) -> Tensor:
    """inp @ weight + bias with bias broadcast across the batch."""
    if inp.shape[1] != weight.shape[0]:
        raise ShapeError(
            f"linear: input {inp.shape} does not conform to weight {weight.shape}")
    if bias.shape != (1, weight.shape[1]):
        raise ShapeError(
            f"linear: bias {bias.shape} does not match weight {weight.shape}")
    return add(matmul(inp, weight), bias)


class BatchNorm:
    """Per-column batch normalization with learnable scale/shift.

    Train mode normalizes with batch statistics and updates the running
    mean/variance by exponential moving average (``momentum`` is the
    weight of the new batch). Eval mode is a fixed affine map from the
    running statistics, so a row's output never depends on its batch.
    """

    def __init__(self, width: int, momentum: float = 0.1, epsilon: float = 1e-5):
        self.gamma = Param(np.ones((1, width)))
        self.beta = Param(np.zeros((1, width)))
        self.running_mean = np.zeros((1, width))
        self.running_var = np.ones((1, width))
        self.momentum = momentum
        self.epsilon = epsilon

    @property
    def width(self) -> int:
        return self.gamma.shape[1]

    def forward(self, x: Tensor, train: bool) -> Tensor:
        if x.shape[1] != self.width:
            raise ShapeError(f"batchnorm: input {x.shape} vs width {self.width}")
        if not train:
            std = np.sqrt(self.running_var + self.epsilon)
            xhat = (x.data - self.running_mean) / std
            return Tensor(self.gamma.data * xhat + self.beta.data)

        m = x.shape[0]
        if m < 2:
            raise DegenerateBatchError(
                f"batchnorm in train mode needs at least 2 rows, got {m}")
        mean = x.data.mean(axis=0, keepdims=True)
        var = x.data.var(axis=0, keepdims=True)
        std = np.sqrt(var + self.epsilon)
        xhat = (x.data - mean) / std
        self.running_mean = (1 - self.momentum) * self.running_mean + self.momentum * mean
        self.running_var = (1 - self.momentum) * self.running_var + self.momentum * var

        gamma, beta = self.gamma, self.beta
        out = Tensor(gamma.data * xhat + beta.data, (x, gamma, beta))

        def bwd(g, x=x, gamma=gamma, beta=beta, xhat=xhat, std=std):
            beta.grad += g.sum(axis=0, keepdims=True)
            gamma.grad += (g * xhat).sum(axis=0, keepdims=True)
            dxhat = g * gamma.data
            x.grad += (dxhat - dxhat.mean(axis=0, keepdims=True)
                       - xhat * (dxhat * xhat).mean(axis=0, keepdims=True)) / std

        out._backward = bwd
        return out

    def state_arrays(self) -> dict:
        return {"gamma": self.gamma.data, "beta": self.beta.data,
                "running_mean": self.running_mean, "running_var": self.running_var}


# ---------------------------------------------------------------------------
# verification


def finite_difference_check(loss_fn, params, step: float = 1e-5) -> float:
    """Compare analytic gradients of ``loss_fn`` against central finite
    differences over every coordinate of ``params``.

    ``loss_fn`` must rebuild its graph on each call (it is invoked twice
    per coordinate plus once for the analytic pass) and be deterministic.
    Returns the max over coordinates of
    ``|analytic - numeric| / max(|analytic|, |numeric|, 1e-12)``.

    The difference quotient carries rounding noise of roughly
    eps * |loss| / (2 * step); a deviation below that floor is not
    evidence of anything (it shows up on coordinates whose true gradient
    is tiny or exactly zero, e.g. a bias that batch normalization
    cancels), so such coordinates are counted as matching.
    """
    params = list(params)
    for p in params:
        p.zero_grad()
    out = loss_fn()
    out.backward()
    analytic = [p.grad.copy() for p in params]
    noise_floor = 64.0 * np.finfo(np.float64).eps * max(1.0, abs(out.item())) / (2.0 * step)

    worst = 0.0
    for p, grads in zip(params, analytic):
        flat = p.data.reshape(-1)
        gflat = grads.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = loss_fn().item()
            flat[i] = orig - step
            down = loss_fn().item()
            flat[i] = orig
            numeric = (up - down) / (2.0 * step)
            if abs(gflat[i] - numeric) <= noise_floor:
                continue
            err = abs(gflat[i] - numeric) / max(abs(gflat[i]), abs(numeric), 1e-12)
            worst = max(worst, err)
    return worst
