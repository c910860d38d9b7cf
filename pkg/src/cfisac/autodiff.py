"""Tape-based reverse-mode differentiation over dense real numpy arrays.

Just enough machinery to train the beamforming network: a Tape records every
primitive application in order, and backward() replays the records once in
reverse, accumulating exact analytic partials into the registered parameters.
Complex quantities are handled by the callers as stacked real pairs.
"""

from __future__ import annotations

from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np


class AutodiffError(ValueError):
    pass


class Tensor:
    """A value living on a tape. Do not mutate .data after creation."""

    __slots__ = ("data", "tape", "param_name")

    def __init__(self, data: np.ndarray, tape: "Tape",
                 param_name: Optional[str] = None):
        self.data = data
        self.tape = tape
        self.param_name = param_name

    @property
    def shape(self):
        return self.data.shape


class Tape:
    """Append-only record of primitive applications plus a parameter registry."""

    def __init__(self):
        self._nodes: list = []      # (out, inputs, vjp)
        self._params: Dict[str, Tensor] = {}

    def parameter(self, name: str, value: np.ndarray) -> Tensor:
        if name in self._params:
            raise AutodiffError(f"parameter {name!r} registered twice")
        t = Tensor(np.asarray(value), self, param_name=name)
        self._params[name] = t
        return t

    def constant(self, value) -> Tensor:
        return Tensor(np.asarray(value), self)

    def _record(self, out: Tensor, inputs: Tuple[Tensor, ...], vjp: Callable):
        self._nodes.append((out, inputs, vjp))

    @property
    def parameters(self) -> Dict[str, Tensor]:
        return dict(self._params)

    def clear(self) -> None:
        """Drop all records, breaking the Tensor/closure reference cycles.

        Tapes are cyclic (tensors point at the tape, the tape's records point
        back at the tensors through the vjp closures), so without this the
        arrays of every training step linger until a full gc pass. Call once
        the gradients are out; the tape is unusable afterwards.
        """
        self._nodes.clear()
        self._params.clear()


def backward(tape: Tape, loss: Tensor) -> Dict[str, np.ndarray]:
    """Gradients of a scalar loss for every registered parameter."""
    if loss.data.size != 1:
        raise AutodiffError(f"loss must be scalar, got shape {loss.data.shape}")
    grads: Dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for out, inputs, vjp in reversed(tape._nodes):
        g = grads.pop(id(out), None)
        if g is None:
            continue
        for t, gi in zip(inputs, vjp(g)):
            if gi is None:
                continue
            acc = grads.get(id(t))
            # never accumulate in place: vjp outputs may alias each other
            grads[id(t)] = gi if acc is None else acc + gi
    out = {}
    for name, p in tape._params.items():
        out[name] = grads.get(id(p), np.zeros_like(p.data))
    return out


def _same_tape(*ts: Tensor) -> Tape:
    tape = ts[0].tape
    for t in ts[1:]:
        if t.tape is not tape:
            raise AutodiffError("operands recorded on different tapes")
    return tape


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (gs, ss) in enumerate(zip(g.shape, shape))
                 if ss == 1 and gs != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def add(a: Tensor, b: Tensor) -> Tensor:
    tape = _same_tape(a, b)
    out = Tensor(a.data + b.data, tape)
    tape._record(out, (a, b), lambda g: (_unbroadcast(g, a.data.shape),
                                         _unbroadcast(g, b.data.shape)))
    return out


def subtract(a: Tensor, b: Tensor) -> Tensor:
    tape = _same_tape(a, b)
    out = Tensor(a.data - b.data, tape)
    tape._record(out, (a, b), lambda g: (_unbroadcast(g, a.data.shape),
                                         _unbroadcast(-g, b.data.shape)))
    return out


def scalar_mul(a: Tensor, c: float) -> Tensor:
    out = Tensor(a.data * c, a.tape)
    a.tape._record(out, (a,), lambda g: (g * c,))
    return out


def elementwise_mul(a: Tensor, b: Tensor) -> Tensor:
    tape = _same_tape(a, b)
    out = Tensor(a.data * b.data, tape)
    tape._record(out, (a, b), lambda g: (_unbroadcast(g * b.data, a.data.shape),
                                         _unbroadcast(g * a.data, b.data.shape)))
    return out


def divide(a: Tensor, b: Tensor) -> Tensor:
    tape = _same_tape(a, b)
    out = Tensor(a.data / b.data, tape)

    def vjp(g):
        ga = _unbroadcast(g / b.data, a.data.shape)
        gb = _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape)
        return ga, gb

    tape._record(out, (a, b), vjp)
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    tape = _same_tape(a, b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise AutodiffError(f"matmul needs 2-D operands, got "
                            f"{a.data.shape} @ {b.data.shape}")
    out = Tensor(a.data @ b.data, tape)
    tape._record(out, (a, b), lambda g: (g @ b.data.T, a.data.T @ g))
    return out


def concat(tensors: Sequence[Tensor], axis: int) -> Tensor:
    tape = _same_tape(*tensors)
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis), tape)
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]
    tape._record(out, tuple(tensors),
                 lambda g: tuple(np.split(g, splits, axis=axis)))
    return out


def slice_(a: Tensor, index) -> Tensor:
    """Basic (non-fancy) indexing; gradients scatter back into zeros."""
    out = Tensor(a.data[index], a.tape)

    def vjp(g):
        z = np.zeros_like(a.data)
        z[index] = g
        return (z,)

    a.tape._record(out, (a,), vjp)
    return out


def reshape(a: Tensor, shape) -> Tensor:
    out = Tensor(a.data.reshape(shape), a.tape)
    a.tape._record(out, (a,), lambda g: (g.reshape(a.data.shape),))
    return out


def sum_reduce(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = Tensor(a.data.sum(axis=axis, keepdims=keepdims), a.tape)

    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g, a.data.shape).astype(a.data.dtype,
                                                            copy=True),)
        if not keepdims:
            axes = axis if isinstance(axis, tuple) else (axis,)
            axes = tuple(ax % a.data.ndim for ax in axes)
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, a.data.shape).astype(a.data.dtype, copy=True),)

    a.tape._record(out, (a,), vjp)
    return out


def square(a: Tensor) -> Tensor:
    out = Tensor(a.data * a.data, a.tape)
    a.tape._record(out, (a,), lambda g: (2.0 * g * a.data,))
    return out


def sqrt(a: Tensor) -> Tensor:
    if np.any(a.data <= 0):
        raise AutodiffError("sqrt requires strictly positive inputs")
    root = np.sqrt(a.data)
    out = Tensor(root, a.tape)
    a.tape._record(out, (a,), lambda g: (g / (2.0 * root),))
    return out


def natural_log(a: Tensor) -> Tensor:
    if np.any(a.data <= 0):
        raise AutodiffError("log requires strictly positive inputs")
    out = Tensor(np.log(a.data), a.tape)
    a.tape._record(out, (a,), lambda g: (g / a.data,))
    return out


def leaky_relu(a: Tensor, slope: float) -> Tensor:
    scale = np.where(a.data >= 0, 1.0, slope).astype(a.data.dtype)
    out = Tensor(a.data * scale, a.tape)
    a.tape._record(out, (a,), lambda g: (g * scale,))
    return out


def finite_difference_check(build: Callable[[Dict[str, np.ndarray]],
                                            Tuple[Tape, Tensor]],
                            params: Dict[str, np.ndarray],
                            step: float = 1e-6,
                            floor: float = 1e-4) -> float:
    """Worst relative disagreement between backward() and central differences.

    build(params) must return a fresh (tape, scalar loss) pair. The forward
    evaluations for the differences never touch the reverse path. Relative
    error per coordinate uses max(|ad|, |fd|, floor) as the denominator.
    """
    tape, loss = build(params)
    grads = backward(tape, loss)

    def value(p):
        _, l = build(p)
        return float(l.data)

    worst = 0.0
    for name, base in params.items():
        flat = np.asarray(base, dtype=np.float64).ravel()
        g = grads[name].ravel()
        for i in range(flat.size):
            bumped = dict(params)
            plus = flat.copy(); plus[i] += step
            minus = flat.copy(); minus[i] -= step
            bumped[name] = plus.reshape(np.shape(base))
            f_plus = value(bumped)
            bumped[name] = minus.reshape(np.shape(base))
            f_minus = value(bumped)
            fd = (f_plus - f_minus) / (2 * step)
            err = abs(fd - g[i]) / max(abs(fd), abs(g[i]), floor)
            worst = max(worst, err)
    return worst
