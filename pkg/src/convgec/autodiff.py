"""Reverse-mode autodiff over dense float64 arrays.

A minimal define-by-run engine: each forward op records a backward closure
on its output tensor, and ``backward()`` walks the recorded graph in reverse
topological order, summing gradient contributions from all consumers. Only
the operations the encoder-decoder model actually needs are provided; there
is no broadcasting beyond the row/bias patterns used here.

All data is float64. Randomness (dropout) takes an explicit
``numpy.random.Generator`` so every stochastic path is seedable.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, EvaluationError, ShapeError


class Tensor:
    """Dense float64 array plus a gradient slot and backward closure."""

    __slots__ = ("data", "grad", "requires_grad", "_backward", "_parents")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._backward: Callable[[], None] | None = None
        self._parents: tuple[Tensor, ...] = ()

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = g.copy() if isinstance(g, np.ndarray) else np.asarray(g, dtype=np.float64)
        else:
            self.grad += g

    def backward(self) -> None:
        """Reverse-mode sweep from a scalar output."""
        if self.data.size != 1:
            raise ShapeError(f"backward() needs a scalar, got shape {self.data.shape}")
        order = _toposort(self)
        self.grad = np.ones_like(self.data)
        for node in order:
            if node._backward is not None and node.grad is not None:
                node._backward()

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def _toposort(root: Tensor) -> list[Tensor]:
    # Iterative DFS; recursion would overflow on long sequence graphs.
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    order.reverse()
    return order


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(data: np.ndarray, parents: Sequence[Tensor], backward: Callable[[], None] | None) -> Tensor:
    out = Tensor(data)
    out.requires_grad = any(p.requires_grad for p in parents)
    if out.requires_grad:
        out._parents = tuple(parents)
        out._backward = backward
    return out


# ---------------------------------------------------------------------------
# Elementwise / structural ops
# ---------------------------------------------------------------------------


def add(a, b) -> Tensor:
    """a + b; b may be a trailing-axis vector broadcast over rows of a."""
    a, b = as_tensor(a), as_tensor(b)
    if a.data.shape != b.data.shape:
        if not (b.data.ndim == 1 and a.data.ndim == 2 and a.data.shape[1] == b.data.shape[0]):
            raise ShapeError(f"add: shapes {a.data.shape} and {b.data.shape} do not conform")
    out = _result(a.data + b.data, (a, b), None)

    def backward():
        g = out.grad
        if a.requires_grad:
            a.accumulate(g)
        if b.requires_grad:
            b.accumulate(g.sum(axis=0) if b.data.shape != g.shape else g)

    out._backward = backward
    return out


def mul(a, b) -> Tensor:
    """Elementwise product of same-shape tensors."""
    a, b = as_tensor(a), as_tensor(b)
    if a.data.shape != b.data.shape:
        raise ShapeError(f"mul: shapes {a.data.shape} and {b.data.shape} do not conform")
    out = _result(a.data * b.data, (a, b), None)

    def backward():
        g = out.grad
        if a.requires_grad:
            a.accumulate(g * b.data)
        if b.requires_grad:
            b.accumulate(g * a.data)

    out._backward = backward
    return out


def scale(a, c: float) -> Tensor:
    """a * c for a python scalar c."""
    a = as_tensor(a)
    out = _result(a.data * c, (a,), None)

    def backward():
        if a.requires_grad:
            a.accumulate(out.grad * c)

    out._backward = backward
    return out


def matmul(a, b) -> Tensor:
    """a @ b for 1-D or 2-D operands."""
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim not in (1, 2) or b.data.ndim not in (1, 2):
        raise ShapeError(f"matmul: only 1-D/2-D operands, got {a.data.shape} and {b.data.shape}")
    if a.data.shape[-1] != b.data.shape[0]:
        raise ShapeError(f"matmul: shapes {a.data.shape} and {b.data.shape} do not conform")
    out = _result(a.data @ b.data, (a, b), None)

    def backward():
        g = out.grad
        if a.requires_grad:
            if b.data.ndim == 2:
                a.accumulate(g @ b.data.T)
            elif a.data.ndim == 2:  # (n,k)@(k,) -> g (n,)
                a.accumulate(np.outer(g, b.data))
            else:  # (k,)@(k,) -> scalar
                a.accumulate(float(g) * b.data)
        if b.requires_grad:
            if a.data.ndim == 2:
                b.accumulate(a.data.T @ g)
            elif b.data.ndim == 2:  # (k,)@(k,m) -> g (m,)
                b.accumulate(np.outer(a.data, g))
            else:
                b.accumulate(float(g) * a.data)

    out._backward = backward
    return out


def transpose(a) -> Tensor:
    a = as_tensor(a)
    out = _result(a.data.T, (a,), None)

    def backward():
        if a.requires_grad:
            a.accumulate(out.grad.T)

    out._backward = backward
    return out


def sum_all(a) -> Tensor:
    a = as_tensor(a)
    out = _result(np.asarray(a.data.sum()), (a,), None)

    def backward():
        if a.requires_grad:
            a.accumulate(np.full_like(a.data, float(out.grad)))

    out._backward = backward
    return out


def pad_rows(a, before: int, after: int) -> Tensor:
    """Prepend/append zero rows to a 2-D tensor."""
    a = as_tensor(a)
    if a.data.ndim != 2:
        raise ShapeError(f"pad_rows: expected 2-D input, got shape {a.data.shape}")
    n = a.data.shape[0]
    data = np.zeros((before + n + after, a.data.shape[1]))
    data[before:before + n] = a.data
    out = _result(data, (a,), None)

    def backward():
        if a.requires_grad:
            a.accumulate(out.grad[before:before + n])

    out._backward = backward
    return out


def rows(a, start: int, stop: int) -> Tensor:
    """Slice rows [start:stop] of a 2-D tensor."""
    a = as_tensor(a)
    out = _result(a.data[start:stop].copy(), (a,), None)

    def backward():
        if a.requires_grad:
            g = np.zeros_like(a.data)
            g[start:stop] = out.grad
            a.accumulate(g)

    out._backward = backward
    return out


def embed_rows(table, indices, grad_mask_index: int | None = None) -> Tensor:
    """Gather rows of an embedding table; the row at ``grad_mask_index``
    never receives gradient."""
    table = as_tensor(table)
    idx = np.asarray(indices, dtype=np.intp)
    if idx.ndim != 1:
        raise ShapeError(f"embed_rows: indices must be 1-D, got shape {idx.shape}")
    if idx.size and (idx.min() < 0 or idx.max() >= table.data.shape[0]):
        raise ShapeError(f"embed_rows: index out of range for table of {table.data.shape[0]} rows")
    out = _result(table.data[idx], (table,), None)

    def backward():
        if table.requires_grad:
            g = np.zeros_like(table.data)
            np.add.at(g, idx, out.grad)
            if grad_mask_index is not None:
                g[grad_mask_index] = 0.0
            table.accumulate(g)

    out._backward = backward
    return out


# ---------------------------------------------------------------------------
# Model ops
# ---------------------------------------------------------------------------


def linear(x, W, b) -> Tensor:
    """W·x + b for a vector x, or row-wise x @ W.T + b for a matrix x."""
    x, W, b = as_tensor(x), as_tensor(W), as_tensor(b)
    if W.data.ndim != 2 or b.data.ndim != 1 or W.data.shape[0] != b.data.shape[0]:
        raise ShapeError(f"linear: weight {W.data.shape} and bias {b.data.shape} do not conform")
    if x.data.shape[-1] != W.data.shape[1]:
        raise ShapeError(f"linear: input {x.data.shape} and weight {W.data.shape} do not conform")
    out = _result(x.data @ W.data.T + b.data, (x, W, b), None)

    def backward():
        g = out.grad
        if x.requires_grad:
            x.accumulate(g @ W.data)
        if W.requires_grad:
            if x.data.ndim == 1:
                W.accumulate(np.outer(g, x.data))
            else:
                W.accumulate(g.T @ x.data)
        if b.requires_grad:
            b.accumulate(g if g.ndim == 1 else g.sum(axis=0))

    out._backward = backward
    return out


def conv1d(seq, filters) -> Tensor:
    """Width-3 valid convolution over rows.

    seq: (n, c_in) already padded by the caller; filters: (c_out, 3, c_in).
    Output row i is the filter response on rows (i, i+1, i+2), so the caller's
    padding convention decides alignment; n-2 output rows.
    """
    seq, filters = as_tensor(seq), as_tensor(filters)
    if seq.data.ndim != 2 or filters.data.ndim != 3 or filters.data.shape[1] != 3:
        raise ShapeError(f"conv1d: seq {seq.data.shape} and filters {filters.data.shape} do not conform")
    if filters.data.shape[2] != seq.data.shape[1]:
        raise ShapeError(f"conv1d: seq {seq.data.shape} and filters {filters.data.shape} disagree on channels")
    n, cin = seq.data.shape
    if n < 3:
        raise ShapeError(f"conv1d: empty input, padded sequence of {n} rows leaves no window")
    t = n - 2
    cout = filters.data.shape[0]
    # (t, 3*cin) windows, window-position-major, against (3*cin, cout).
    win = np.lib.stride_tricks.sliding_window_view(seq.data, 3, axis=0)  # (t, cin, 3)
    win2 = win.transpose(0, 2, 1).reshape(t, 3 * cin)
    w2 = filters.data.transpose(1, 2, 0).reshape(3 * cin, cout)
    out = _result(win2 @ w2, (seq, filters), None)

    def backward():
        g = out.grad  # (t, cout)
        if seq.requires_grad:
            dwin = (g @ w2.T).reshape(t, 3, cin)
            ds = np.zeros_like(seq.data)
            for w in range(3):
                ds[w:w + t] += dwin[:, w, :]
            seq.accumulate(ds)
        if filters.requires_grad:
            dw2 = win2.T @ g  # (3*cin, cout)
            filters.accumulate(dw2.reshape(3, cin, cout).transpose(2, 0, 1))

    out._backward = backward
    return out


def glu(f) -> Tensor:
    """Gated linear unit over the last axis: a ∘ σ(g) for f = [a; g]."""
    f = as_tensor(f)
    width = f.data.shape[-1]
    if width % 2 != 0:
        raise ShapeError(f"glu: last axis must be even, got shape {f.data.shape}")
    h = width // 2
    a = f.data[..., :h]
    sig = 1.0 / (1.0 + np.exp(-f.data[..., h:]))
    out = _result(a * sig, (f,), None)

    def backward():
        if f.requires_grad:
            g = out.grad
            df = np.empty_like(f.data)
            df[..., :h] = g * sig
            df[..., h:] = g * a * sig * (1.0 - sig)
            f.accumulate(df)

    out._backward = backward
    return out


def softmax(v) -> Tensor:
    """Stable softmax over the last axis."""
    v = as_tensor(v)
    if v.data.size < 1:
        raise ShapeError("softmax: empty input")
    shifted = v.data - v.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=-1, keepdims=True)
    out = _result(s, (v,), None)

    def backward():
        if v.requires_grad:
            g = out.grad
            dot = (g * s).sum(axis=-1, keepdims=True)
            v.accumulate(s * (g - dot))

    out._backward = backward
    return out


def log_softmax(v) -> Tensor:
    """Stable log-softmax over the last axis."""
    v = as_tensor(v)
    if v.data.size < 1:
        raise ShapeError("log_softmax: empty input")
    shifted = v.data - v.data.max(axis=-1, keepdims=True)
    ls = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    out = _result(ls, (v,), None)

    def backward():
        if v.requires_grad:
            g = out.grad
            v.accumulate(g - np.exp(ls) * g.sum(axis=-1, keepdims=True))

    out._backward = backward
    return out


def dropout(x, p: float, training: bool, rng: np.random.Generator | None = None) -> Tensor:
    """Inverted dropout: zero with probability p, scale survivors by 1/(1-p).

    Inference mode is the exact identity (the input tensor is returned).
    """
    x = as_tensor(x)
    if not 0.0 <= p < 1.0:
        raise ConfigError(f"dropout: probability must be in [0, 1), got {p}")
    if not training or p == 0.0:
        return x
    if rng is None:
        raise ConfigError("dropout: training mode needs an explicit rng")
    keep = (rng.random(x.data.shape) >= p).astype(np.float64) / (1.0 - p)
    out = _result(x.data * keep, (x,), None)

    def backward():
        if x.requires_grad:
            x.accumulate(out.grad * keep)

    out._backward = backward
    return out


def nll_mean(logprobs, targets) -> Tensor:
    """-(1/T) Σ_j logprobs[j, targets[j]] as a scalar tensor."""
    logprobs = as_tensor(logprobs)
    idx = np.asarray(targets, dtype=np.intp)
    t = idx.shape[0]
    if logprobs.data.ndim != 2 or logprobs.data.shape[0] != t:
        raise ShapeError(f"nll_mean: logprobs {logprobs.data.shape} vs {t} targets")
    picked = logprobs.data[np.arange(t), idx]
    out = _result(np.asarray(-picked.mean()), (logprobs,), None)

    def backward():
        if logprobs.requires_grad:
            g = np.zeros_like(logprobs.data)
            g[np.arange(t), idx] = -float(out.grad) / t
            logprobs.accumulate(g)

    out._backward = backward
    return out


# ---------------------------------------------------------------------------
# Gradient checking
# ---------------------------------------------------------------------------


def check_gradients(f: Callable[[Tensor], Tensor], x, step: float = 1e-5) -> float:
    """Compare reverse-mode gradients of scalar f against central differences.

    Returns the maximum per-element relative error, with a 1e-6 floor on the
    denominator so near-zero gradients are compared on an absolute scale.
    """
    base = np.asarray(x.data if isinstance(x, Tensor) else x, dtype=np.float64).copy()
    xt = Tensor(base.copy(), requires_grad=True)
    out = f(xt)
    if out.data.size != 1:
        raise ShapeError(f"check_gradients: f must be scalar-valued, got shape {out.data.shape}")
    if not np.isfinite(out.data).all():
        raise EvaluationError("check_gradients: f(x) is not finite")
    out.backward()
    analytic = np.zeros_like(base) if xt.grad is None else xt.grad.copy()

    flat = base.reshape(-1)
    fd = np.empty_like(flat)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        fp = float(f(Tensor(base.copy())).data)
        flat[i] = orig - step
        fm = float(f(Tensor(base.copy())).data)
        flat[i] = orig
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise EvaluationError("check_gradients: f is not finite near x")
        fd[i] = (fp - fm) / (2.0 * step)
    fd = fd.reshape(base.shape)

    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(fd)), 1e-6)
    return float(np.max(np.abs(analytic - fd) / denom)) if base.size else 0.0
