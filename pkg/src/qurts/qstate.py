"""Dense state vectors over dynamically labelled qubits."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

TOL = 1e-9


class QubitLimitError(RuntimeError):
    pass


class StateError(ValueError):
    pass


def max_qubits() -> int:
    return int(os.environ.get("QURTS_MAX_QUBITS", "24"))


_S2 = 1 / math.sqrt(2)
_FIXED = {
    "H": np.array([[_S2, _S2], [_S2, -_S2]], dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    "S": np.array([[1, 0], [0, 1j]], dtype=complex),
    "T": np.array([[1, 0], [0, np.exp(1j * math.pi / 4)]], dtype=complex),
    "CX": np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex),
}

_USER_GATES: dict = {}


def register_gate(name: str, matrix) -> None:
    """Make a user matrix available as a named unitary."""
    m = np.asarray(matrix, dtype=complex)
    check_unitary(m)
    _USER_GATES[name] = m


def gate_arity(name: str) -> int:
    if name == "phase":
        return 0
    if name in _FIXED:
        return int(round(math.log2(_FIXED[name].shape[0])))
    if name in _USER_GATES:
        return int(round(math.log2(_USER_GATES[name].shape[0])))
    raise KeyError(name)


def gate_matrix(name: str, params=()) -> np.ndarray:
    if name == "phase":
        (theta,) = params
        return np.array([[np.exp(1j * theta)]], dtype=complex)
    if name in _FIXED:
        return _FIXED[name]
    return _USER_GATES[name]


def check_unitary(m: np.ndarray) -> None:
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise StateError(f"matrix of shape {m.shape} is not square")
    k = m.shape[0]
    if k & (k - 1):
        raise StateError(f"matrix dimension {k} is not a power of two")
    if not np.allclose(m.conj().T @ m, np.eye(k), atol=TOL):
        raise StateError("matrix is not unitary")


@dataclass(frozen=True)
class QState:
    """Amplitudes as a tensor with one axis of length 2 per label.

    The first label is the most significant bit of the flattened vector.
    """
    labels: tuple
    tensor: np.ndarray

    @staticmethod
    def scalar(value: complex = 1.0) -> "QState":
        return QState((), np.array(complex(value)))

    @staticmethod
    def from_vector(labels, vec) -> "QState":
        labels = tuple(labels)
        v = np.asarray(vec, dtype=complex)
        if v.size != 2 ** len(labels):
            raise StateError("vector length does not match label count")
        if len(set(labels)) != len(labels):
            raise StateError("duplicate labels")
        return QState(labels, v.reshape((2,) * len(labels)))

    @staticmethod
    def basis(labels, bits) -> "QState":
        labels = tuple(labels)
        t = np.zeros((2,) * len(labels), dtype=complex)
        t[tuple(bits)] = 1
        return QState(labels, t)

    @property
    def n(self) -> int:
        return len(self.labels)

    def vector(self, order=None) -> np.ndarray:
        if order is None:
            return self.tensor.reshape(-1).copy()
        return self.reorder(order).tensor.reshape(-1).copy()

    def axis(self, label) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise StateError(f"label {label!r} not present") from None

    def reorder(self, order) -> "QState":
        order = tuple(order)
        if sorted(map(repr, order)) != sorted(map(repr, self.labels)):
            raise StateError(f"reorder {order} does not match {self.labels}")
        perm = [self.axis(l) for l in order]
        return QState(order, np.transpose(self.tensor, perm) if perm else self.tensor)

    def relabel(self, mapping) -> "QState":
        new = tuple(mapping.get(l, l) for l in self.labels)
        if len(set(new)) != len(new):
            raise StateError("relabelling merges labels")
        return QState(new, self.tensor)

    def __repr__(self):
        return f"QState(labels={self.labels}, vec={np.round(self.vector(), 6).tolist()})"


def norm2(s: QState) -> float:
    return float(np.sum(np.abs(s.tensor) ** 2))


def adjoin_zero(s: QState, label) -> QState:
    if label in s.labels:
        raise StateError(f"label {label!r} already present")
    if s.n + 1 > max_qubits():
        raise QubitLimitError(f"more than {max_qubits()} qubits")
    t = np.zeros(s.tensor.shape + (2,), dtype=complex)
    t[..., 0] = s.tensor
    return QState(s.labels + (label,), t)


def _ctrl_index(s: QState, controls):
    idx = [slice(None)] * s.n
    for lab, pol in controls:
        idx[s.axis(lab)] = 1 if pol else 0
    return idx


def apply_single_target(s: QState, target, controls=()) -> QState:
    """Flip ``target`` where every control has its polarity
    (``(label, True)`` means the control must be 1)."""
    labs = [c for c, _ in controls]
    if target in labs:
        raise StateError("target among controls")
    if len(set(labs)) != len(labs):
        raise StateError("repeated control")
    t = s.tensor.copy()
    ta = s.axis(target)
    idx0 = _ctrl_index(s, controls)
    idx1 = list(idx0)
    idx0[ta], idx1[ta] = 0, 1
    a = s.tensor[tuple(idx0)].copy()
    t[tuple(idx0)] = s.tensor[tuple(idx1)]
    t[tuple(idx1)] = a
    return QState(s.labels, t)


def apply_unitary(s: QState, U, targets=(), controls=()) -> QState:
    """Apply ``U`` on ``targets`` (``k = 0`` scales by a phase), optionally
    controlled by ``(label, polarity)`` pairs."""
    U = np.asarray(U, dtype=complex)
    targets = list(targets)
    k = len(targets)
    if U.shape != (2 ** k, 2 ** k):
        raise StateError(f"matrix shape {U.shape} does not match {k} targets")
    check_unitary(U)
    if set(targets) & {c for c, _ in controls}:
        raise StateError("target among controls")
    t = s.tensor.copy()
    idx = tuple(_ctrl_index(s, controls))
    sub = s.tensor[idx]
    # axes of the controlled sub-tensor, with control axes removed
    rest = [l for l in s.labels if l not in {c for c, _ in controls}]
    axes = [rest.index(l) for l in targets]
    if k == 0:
        t[idx] = U[0, 0] * sub
        return QState(s.labels, t)
    Ut = U.reshape((2,) * (2 * k))
    moved = np.tensordot(Ut, sub, axes=(list(range(k, 2 * k)), axes))
    # tensordot puts the k output axes first
    moved = np.moveaxis(moved, list(range(k)), axes)
    t[idx] = moved
    return QState(s.labels, t)


def apply_lifted(s: QState, table, in_labels, fresh_labels) -> QState:
    """``|x⟩ ↦ |c(x)⟩`` over ``in_labels`` followed by ``fresh_labels``."""
    in_labels, fresh_labels = list(in_labels), list(fresh_labels)
    if len(in_labels) != table.n or len(fresh_labels) != table.m - table.n:
        raise StateError("lifted function applied to the wrong number of qubits")
    for l in fresh_labels:
        if l in s.labels:
            raise StateError(f"label {l!r} already present")
    if s.n + len(fresh_labels) > max_qubits():
        raise QubitLimitError(f"more than {max_qubits()} qubits")
    rest = [l for l in s.labels if l not in in_labels]
    src = s.reorder(in_labels + rest).tensor.reshape(2 ** table.n, -1)
    out = np.zeros((2 ** table.m, src.shape[1]), dtype=complex)
    for x in range(2 ** table.n):
        out[table.image(x)] += src[x]
    labels = tuple(in_labels + fresh_labels + rest)
    res = QState(labels, out.reshape((2,) * len(labels)))
    return res.reorder(tuple(l for l in s.labels) + tuple(fresh_labels))


def project(s: QState, label, bit: int) -> QState:
    """``(id ⊗ ⟨bit|)`` on ``label``; the label is removed."""
    ax = s.axis(label)
    t = np.take(s.tensor, bit, axis=ax)
    return QState(s.labels[:ax] + s.labels[ax + 1:], np.array(t, copy=True))


def measure(s: QState, label):
    return [(0, project(s, label, 0)), (1, project(s, label, 1))]


def drop_sum(s: QState, labels) -> QState:
    """Sum out ``labels``: ``Σ_i |φ_i⟩|i⟩ ↦ Σ_i |φ_i⟩`` (not norm preserving)."""
    labels = list(labels)
    if not labels:
        return s
    axes = tuple(s.axis(l) for l in labels)
    t = s.tensor.sum(axis=axes)
    keep = tuple(l for l in s.labels if l not in labels)
    return QState(keep, np.asarray(t, dtype=complex))


def add(a: QState, b: QState) -> QState:
    b = b.reorder(a.labels)
    return QState(a.labels, a.tensor + b.tensor)


def scale(s: QState, c: complex) -> QState:
    return QState(s.labels, s.tensor * c)


def allclose(a: QState, b: QState, tol: float = TOL) -> bool:
    if set(a.labels) != set(b.labels):
        return False
    return bool(np.max(np.abs(a.tensor - b.reorder(a.labels).tensor), initial=0.0) <= tol)
