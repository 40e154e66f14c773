"""Recorded-tape reverse pass for the small, fixed set of ops the models use.

Each op computes its value eagerly and, when a tape is active and an input
needs a gradient, pushes a closure that propagates the output gradient back to
its inputs. ``Tape.backward`` replays the closures in reverse.
"""

from __future__ import annotations

import numpy as np

from .errors import HigemineError, ShapeError


class Var:
    __slots__ = ("value", "grad", "requires_grad")

    def __init__(self, value, requires_grad: bool = False):
        self.value = value
        self.grad = None
        self.requires_grad = requires_grad

    @property
    def shape(self):
        return self.value.shape

    def _accumulate(self, g):
        if not self.requires_grad:
            return
        self.grad = g if self.grad is None else self.grad + g


class TapeError(HigemineError, RuntimeError):
    pass


class Tape:
    def __init__(self):
        self._steps = []
        self._watched: dict[int, tuple[np.ndarray, Var]] = {}
        self.consumed = False

    def watch(self, array: np.ndarray) -> Var:
        """Trainable leaf for ``array``; the same array always maps to the same Var."""
        hit = self._watched.get(id(array))
        if hit is None:
            hit = self._watched[id(array)] = (array, Var(array, requires_grad=True))
        return hit[1]

    def push(self, step) -> None:
        if self.consumed:
            raise TapeError("tape already replayed; record a new forward pass")
        self._steps.append(step)

    def backward(self, out: Var, upstream) -> None:
        if self.consumed:
            raise TapeError("backward called twice on the same tape")
        upstream = np.asarray(upstream, dtype=np.float64)
        if upstream.shape != out.value.shape:
            raise ShapeError(f"upstream gradient {upstream.shape} vs output {out.value.shape}")
        self.consumed = True
        if not out.requires_grad:
            return
        out.grad = upstream
        for step in reversed(self._steps):
            step()

    def grad_of(self, array: np.ndarray) -> np.ndarray:
        hit = self._watched.get(id(array))
        if hit is None or hit[1].grad is None:
            return np.zeros_like(array)
        return hit[1].grad


def param(tape: Tape | None, array: np.ndarray) -> Var:
    return tape.watch(array) if tape is not None else Var(array)


def const(x) -> Var:
    return x if isinstance(x, Var) else Var(np.asarray(x, dtype=np.float64))


def _record(tape, out, inputs, step):
    if tape is not None and any(v.requires_grad for v in inputs):
        out.requires_grad = True

        def run():
            if out.grad is not None:
                step(out.grad)

        tape.push(run)
    return out


def spmm(tape, adj, x) -> Var:
    """Sparse constant ``adj`` times ``x``."""
    x = const(x)
    if adj.cols != x.value.shape[0]:
        raise ShapeError(f"spmm: {adj.shape} @ {x.value.shape}")
    out = Var(np.asarray(adj.csr @ x.value))
    adj_t = adj.csr.T.tocsr() if tape is not None else None
    return _record(tape, out, [x], lambda g: x._accumulate(np.asarray(adj_t @ g)))


def matmul(tape, a, b) -> Var:
    a, b = const(a), const(b)
    if a.value.shape[1] != b.value.shape[0]:
        raise ShapeError(f"matmul: {a.value.shape} @ {b.value.shape}")
    out = Var(a.value @ b.value)

    def step(g):
        a._accumulate(g @ b.value.T)
        b._accumulate(a.value.T @ g)

    return _record(tape, out, [a, b], step)


def matmul_nt(tape, a, b) -> Var:
    """a @ b.T, used for the document-label dot products."""
    a, b = const(a), const(b)
    if a.value.shape[1] != b.value.shape[1]:
        raise ShapeError(f"matmul_nt: {a.value.shape} @ {b.value.shape}.T")
    out = Var(a.value @ b.value.T)

    def step(g):
        a._accumulate(g @ b.value)
        b._accumulate(g.T @ a.value)

    return _record(tape, out, [a, b], step)


def add_bias(tape, x, b) -> Var:
    x, b = const(x), const(b)
    if x.value.shape[1] != b.value.shape[0]:
        raise ShapeError(f"bias of length {b.value.shape[0]} on {x.value.shape}")
    out = Var(x.value + b.value)

    def step(g):
        x._accumulate(g)
        b._accumulate(g.sum(axis=0))

    return _record(tape, out, [x, b], step)


def add(tape, a, b) -> Var:
    a, b = const(a), const(b)
    if a.value.shape != b.value.shape:
        raise ShapeError(f"add: {a.value.shape} vs {b.value.shape}")
    out = Var(a.value + b.value)

    def step(g):
        a._accumulate(g)
        b._accumulate(g)

    return _record(tape, out, [a, b], step)


def relu(tape, x) -> Var:
    x = const(x)
    mask = x.value > 0
    out = Var(np.where(mask, x.value, 0.0))
    return _record(tape, out, [x], lambda g: x._accumulate(np.where(mask, g, 0.0)))


def activate(tape, x, activation: str) -> Var:
    if activation == "relu":
        return relu(tape, x)
    if activation == "identity":
        return const(x)
    raise ValueError(f"unknown activation {activation!r}")


def concat_cols(tape, parts) -> Var:
    parts = [const(p) for p in parts]
    n = parts[0].value.shape[0]
    if any(p.value.shape[0] != n for p in parts):
        raise ShapeError(f"concat_cols: row mismatch {[p.value.shape for p in parts]}")
    out = Var(np.hstack([p.value for p in parts]))
    bounds = np.cumsum([0] + [p.value.shape[1] for p in parts])

    def step(g):
        for p, lo, hi in zip(parts, bounds[:-1], bounds[1:]):
            p._accumulate(g[:, lo:hi])

    return _record(tape, out, parts, step)


def take_rows(tape, x, n: int) -> Var:
    """Keep the first ``n`` rows."""
    x = const(x)
    out = Var(x.value[:n].copy())

    def step(g):
        full = np.zeros_like(x.value)
        full[:n] = g
        x._accumulate(full)

    return _record(tape, out, [x], step)


def mix(tape, zb, zp, lam) -> Var:
    """Row-wise lam * zb + (1 - lam) * zp; rows with lam exactly 0 or 1 copy one side."""
    zb, zp = const(zb), const(zp)
    if zb.value.shape != zp.value.shape:
        raise ShapeError(f"mix: {zb.value.shape} vs {zp.value.shape}")
    lam = np.broadcast_to(np.asarray(lam, dtype=np.float64).reshape(-1, 1), (zb.value.shape[0], 1))
    blended = lam * zb.value + (1.0 - lam) * zp.value
    out = Var(np.where(lam == 1.0, zb.value, np.where(lam == 0.0, zp.value, blended)))

    def step(g):
        zb._accumulate(np.where(lam == 0.0, 0.0, lam * g))
        zp._accumulate(np.where(lam == 1.0, 0.0, (1.0 - lam) * g))

    return _record(tape, out, [zb, zp], step)
