"""Tensor and tape: the reverse-mode core.

Operations executed while a :class:`Tape` is active (``with Tape() as tape``)
and touching at least one tensor with ``requires_grad`` are recorded in
order.  ``tape.backward(loss)`` replays the records in reverse and
accumulates gradients into the ``.grad`` buffers of leaf tensors.

Outside a tape nothing is recorded, so inference runs at plain numpy cost.
"""

from __future__ import annotations

import numpy as np

from ..errors import ContractError, DataError

DEFAULT_DTYPE = np.float32

_TAPES: list[Tape] = []


def current_tape() -> Tape | None:
    return _TAPES[-1] if _TAPES else None


class Tensor:
    """n-dimensional float array with an optional gradient buffer.

    Leaf tensors created with ``requires_grad=True`` own a zero-initialised
    ``grad`` of identical shape.  Tensors produced by recorded operations
    are non-leaf: their gradients live only inside a backward pass.
    """

    __array_priority__ = 100.0

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        if isinstance(data, Tensor):
            data = data.data
        if dtype is None:
            # only numpy float data keeps its precision; lists and scalars get the default
            if isinstance(data, (np.ndarray, np.generic)) and np.issubdtype(data.dtype, np.floating):
                arr = np.asarray(data)
            else:
                arr = np.asarray(data, dtype=DEFAULT_DTYPE)
        else:
            arr = np.asarray(data, dtype=dtype)
        self.data: np.ndarray = arr
        self.requires_grad = bool(requires_grad)
        self.is_leaf = True
        self.grad = np.zeros_like(arr) if self.requires_grad else None

    # -- introspection -------------------------------------------------
    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def __len__(self):
        return len(self.data)

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{flag})"

    def zero_grad(self):
        if self.grad is not None:
            self.grad[...] = 0

    def check_finite(self, what: str = "tensor"):
        """Raise :class:`DataError` if the data holds NaN or Inf."""
        if not np.all(np.isfinite(self.data)):
            bad = np.argwhere(~np.isfinite(self.data))[0]
            raise DataError(f"non-finite value in {what} at index {tuple(bad)}")

    def detach(self) -> Tensor:
        return Tensor(self.data)

    def astype(self, dtype) -> Tensor:
        from . import functional as F
        return F.cast(self, dtype)

    # -- operator sugar; the implementations live in functional ---------
    def __add__(self, other):
        from . import functional as F
        return F.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from . import functional as F
        return F.sub(self, other)

    def __rsub__(self, other):
        from . import functional as F
        return F.sub(other, self)

    def __mul__(self, other):
        from . import functional as F
        return F.mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        from . import functional as F
        return F.div(self, other)

    def __rtruediv__(self, other):
        from . import functional as F
        return F.div(other, self)

    def __neg__(self):
        from . import functional as F
        return F.neg(self)

    def __pow__(self, exponent):
        from . import functional as F
        return F.power(self, exponent)

    def __matmul__(self, other):
        from . import functional as F
        return F.matmul(self, other)

    def __getitem__(self, index):
        from . import functional as F
        return F.getitem(self, index)

    def sum(self, axis=None, keepdims=False):
        from . import functional as F
        return F.sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        from . import functional as F
        return F.mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        from . import functional as F
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return F.reshape(self, shape)

    def transpose(self, *axes):
        from . import functional as F
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return F.transpose(self, axes or None)


def as_tensor(x, dtype=None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(x, dtype=dtype)


class _Record:
    __slots__ = ("out", "inputs", "backward")

    def __init__(self, out, inputs, backward):
        self.out = out
        self.inputs = inputs
        self.backward = backward


class Tape:
    """Ordered record of differentiable operations.

    Single-writer: create one tape per training step.  ``backward`` may be
    called once; call :meth:`reset` to reuse the object.
    """

    def __init__(self):
        self.records: list[_Record] = []
        self.consumed = False

    def __enter__(self):
        _TAPES.append(self)
        return self

    def __exit__(self, *exc):
        _TAPES.remove(self)
        return False

    def __len__(self):
        return len(self.records)

    def record(self, out: Tensor, inputs, backward):
        if self.consumed:
            raise ContractError("tape already consumed by backward(); call reset()")
        self.records.append(_Record(out, tuple(inputs), backward))

    def reset(self):
        self.records.clear()
        self.consumed = False

    def backward(self, loss: Tensor):
        if self.consumed:
            raise ContractError("backward() called twice on the same tape without reset()")
        if loss.size != 1:
            raise ContractError(f"loss must be a scalar, got shape {loss.shape}")
        self.consumed = True
        if loss.is_leaf:
            if loss.requires_grad:
                loss.grad += np.ones_like(loss.data)
            return
        grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        for rec in reversed(self.records):
            g = grads.pop(id(rec.out), None)
            if g is None:
                continue
            in_grads = rec.backward(g)
            for inp, gi in zip(rec.inputs, in_grads):
                if gi is None or not isinstance(inp, Tensor) or not inp.requires_grad:
                    continue
                if gi.shape != inp.shape:
                    raise ContractError(
                        f"backward rule produced gradient of shape {gi.shape} for input {inp.shape}"
                    )
                if inp.is_leaf:
                    inp.grad += gi.astype(inp.grad.dtype, copy=False)
                else:
                    key = id(inp)
                    if key in grads:
                        grads[key] = grads[key] + gi
                    else:
                        grads[key] = gi
        self.records.clear()


def backward(tape: Tape, loss: Tensor):
    """Functional alias of :meth:`Tape.backward`."""
    tape.backward(loss)


def make_result(data: np.ndarray, inputs, backward) -> Tensor:
    """Wrap an op result, recording it on the active tape when needed."""
    out = Tensor(data)
    tape = current_tape()
    if tape is not None and any(isinstance(t, Tensor) and t.requires_grad for t in inputs):
        out.requires_grad = True
        out.is_leaf = False
        tape.record(out, inputs, backward)
    return out
