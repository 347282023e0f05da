"""Exact statevector simulation of the hybrid model's quantum head.

The circuit family is fixed: a pairwise-entangling data encoding (Hadamard
layer, per-qubit data phases, XOR-conditioned pairwise phases), a trainable
single-qubit Ry ansatz, and a full-parity Z measurement mapped to a
probability. Gradients come from the two-point parameter-shift rule applied
per gate occurrence, with the chain rule onto features and ansatz angles.

Qubit 0 is the least-significant bit of the basis index. Simulation is
complex128 throughout; the register is capped at 12 qubits.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BadLength, BadQubit

MAX_QUBITS = 12

_SQRT2_INV = 1.0 / math.sqrt(2.0)


@dataclass
class StateVector:
    """2^n complex amplitudes of an n-qubit register."""

    n_qubits: int
    amps: np.ndarray

    def __post_init__(self):
        if not 1 <= self.n_qubits <= MAX_QUBITS:
            raise BadQubit(f"n_qubits must be in [1, {MAX_QUBITS}], got {self.n_qubits}")
        self.amps = np.asarray(self.amps, dtype=np.complex128)
        if self.amps.shape != (2**self.n_qubits,):
            raise BadLength(f"need {2**self.n_qubits} amplitudes, got shape {self.amps.shape}")

    @classmethod
    def zero(cls, n_qubits: int) -> "StateVector":
        if not 1 <= n_qubits <= MAX_QUBITS:
            raise BadQubit(f"n_qubits must be in [1, {MAX_QUBITS}], got {n_qubits}")
        amps = np.zeros(2**n_qubits, dtype=np.complex128)
        amps[0] = 1.0
        return cls(n_qubits, amps)

    def norm(self) -> float:
        return float(np.sum(np.abs(self.amps) ** 2))


def _check_qubit(s: StateVector, q: int) -> None:
    if not 0 <= q < s.n_qubits:
        raise BadQubit(f"qubit {q} outside [0, {s.n_qubits})")


def _bit(n_states: int, q: int) -> np.ndarray:
    return (np.arange(n_states) >> q) & 1


def _apply_1q(s: StateVector, q: int, m00: complex, m01: complex, m10: complex, m11: complex) -> StateVector:
    _check_qubit(s, q)
    lo = _bit(s.amps.size, q) == 0
    hi = ~lo
    a0 = s.amps[lo]
    a1 = s.amps[hi]
    out = np.empty_like(s.amps)
    out[lo] = m00 * a0 + m01 * a1
    out[hi] = m10 * a0 + m11 * a1
    return StateVector(s.n_qubits, out)


def apply_h(s: StateVector, q: int) -> StateVector:
    """Hadamard on qubit q."""
    return _apply_1q(s, q, _SQRT2_INV, _SQRT2_INV, _SQRT2_INV, -_SQRT2_INV)


def apply_p(s: StateVector, q: int, lam: float) -> StateVector:
    """Phase gate: amplitudes with qubit q set gain e^{i lam}."""
    _check_qubit(s, q)
    out = s.amps.copy()
    hi = _bit(out.size, q) == 1
    out[hi] *= np.exp(1j * lam)
    return StateVector(s.n_qubits, out)


def apply_cz(s: StateVector, q1: int, q2: int) -> StateVector:
    """Controlled-Z: negates amplitudes where both qubits are set."""
    _check_qubit(s, q1)
    _check_qubit(s, q2)
    if q1 == q2:
        raise BadQubit(f"controlled-Z needs two distinct qubits, got {q1} twice")
    out = s.amps.copy()
    both = (_bit(out.size, q1) & _bit(out.size, q2)) == 1
    out[both] *= -1.0
    return StateVector(s.n_qubits, out)


def apply_ry(s: StateVector, q: int, theta: float) -> StateVector:
    """Real rotation [[cos(t/2), -sin(t/2)], [sin(t/2), cos(t/2)]] on qubit q."""
    c, sn = math.cos(theta / 2.0), math.sin(theta / 2.0)
    return _apply_1q(s, q, c, -sn, sn, c)


def apply_zz_phase(s: StateVector, q1: int, q2: int, phi: float) -> StateVector:
    """Pairwise data phase: amplitudes with qubit q1 XOR qubit q2 gain e^{i phi}.

    This is the net effect of the entangler-sandwiched phase in the encoding;
    a literal CZ sandwich around a diagonal phase would cancel (CZ^2 = I).
    """
    _check_qubit(s, q1)
    _check_qubit(s, q2)
    if q1 == q2:
        raise BadQubit(f"pairwise phase needs two distinct qubits, got {q1} twice")
    out = s.amps.copy()
    odd = (_bit(out.size, q1) ^ _bit(out.size, q2)) == 1
    out[odd] *= np.exp(1j * phi)
    return StateVector(s.n_qubits, out)


# circuit construction -------------------------------------------------

def _validated(x, n: int | None = None) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64).reshape(-1)
    if n is not None and arr.size != n:
        raise BadLength(f"expected length {n}, got {arr.size}")
    if arr.size < 1 or arr.size > MAX_QUBITS:
        raise BadLength(f"vector length must be in [1, {MAX_QUBITS}], got {arr.size}")
    if not np.isfinite(arr).all():
        raise BadLength("vector entries must be finite")
    return arr


def _encoding_ops(x: np.ndarray) -> list[tuple]:
    """Gate list (kind, qubits, angle) for the data-encoding stage."""
    n = x.size
    ops: list[tuple] = [("h", (q,), None) for q in range(n)]
    ops += [("p", (q,), 2.0 * x[q]) for q in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            ops.append(("zz", (i, j), 2.0 * (math.pi - x[i]) * (math.pi - x[j])))
    return ops


def _ansatz_ops(theta: np.ndarray) -> list[tuple]:
    return [("ry", (q,), theta[q]) for q in range(theta.size)]


def _run(n: int, ops: list[tuple]) -> StateVector:
    s = StateVector.zero(n)
    for kind, qubits, angle in ops:
        if kind == "h":
            s = apply_h(s, qubits[0])
        elif kind == "p":
            s = apply_p(s, qubits[0], angle)
        elif kind == "zz":
            s = apply_zz_phase(s, qubits[0], qubits[1], angle)
        elif kind == "ry":
            s = apply_ry(s, qubits[0], angle)
        else:  # pragma: no cover - internal construction only
            raise ValueError(kind)
    return s


def encode_zz(x) -> StateVector:
    """Encode features as |0..0> -> H layer -> per-qubit phases -> pairwise phases.

    Single repetition, full pairwise topology in lexicographic (i < j) order.
    The encoding is diagonal after the Hadamard layer, so every output
    amplitude has magnitude 2^{-n/2}.
    """
    x = _validated(x)
    return _run(x.size, _encoding_ops(x))


def apply_ansatz(s: StateVector, theta) -> StateVector:
    """Trainable Ry(theta_q) on each qubit, in qubit-index order."""
    theta = _validated(theta, s.n_qubits)
    for q in range(s.n_qubits):
        s = apply_ry(s, q, theta[q])
    return s


def expectation_parity(s: StateVector) -> float:
    """<Z x ... x Z>: sum of (+-1 by bit parity) times basis probabilities."""
    idx = np.arange(s.amps.size, dtype=np.uint64)
    parity = 1.0 - 2.0 * (np.bitwise_count(idx).astype(np.float64) % 2.0)
    return float(np.sum(parity * np.abs(s.amps) ** 2))


def pqc_forward(x, theta) -> float:
    """Probability output (parity expectation + 1) / 2, in [0, 1]."""
    x = _validated(x)
    theta = _validated(theta, x.size)
    state = apply_ansatz(encode_zz(x), theta)
    return (expectation_parity(state) + 1.0) / 2.0


def _shift_gradients(n: int, ops: list[tuple]) -> list[float]:
    """d<parity>/d(angle) for each parameterized gate occurrence.

    Two-point rule with shift pi/2 and divisor 2; valid for all three gate
    families here (Ry generator eigenvalues +-1/2, phase generators {0, 1}).
    """
    grads = []
    for k, (kind, qubits, angle) in enumerate(ops):
        if kind == "h":
            continue
        shifted = list(ops)
        shifted[k] = (kind, qubits, angle + math.pi / 2.0)
        f_plus = expectation_parity(_run(n, shifted))
        shifted[k] = (kind, qubits, angle - math.pi / 2.0)
        f_minus = expectation_parity(_run(n, shifted))
        grads.append((f_plus - f_minus) / 2.0)
    return grads


def pqc_backward(x, theta, upstream: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Parameter-shift gradients of the probability output.

    Returns (grad_x, grad_theta), each scaled by `upstream` times the 1/2
    factor from mapping the expectation to a probability. Feature gradients
    chain through every gate occurrence the feature enters: d(angle)/dx_i is
    2 for its own phase gate and -2(pi - x_j) for each pairwise phase.
    """
    x = _validated(x)
    theta = _validated(theta, x.size)
    n = x.size
    ops = _encoding_ops(x) + _ansatz_ops(theta)
    per_gate = iter(_shift_gradients(n, ops))

    grad_x = np.zeros(n)
    grad_theta = np.zeros(n)
    for kind, qubits, _ in ops:
        if kind == "h":
            continue
        d = next(per_gate)
        if kind == "p":
            grad_x[qubits[0]] += d * 2.0
        elif kind == "zz":
            i, j = qubits
            grad_x[i] += d * (-2.0 * (math.pi - x[j]))
            grad_x[j] += d * (-2.0 * (math.pi - x[i]))
        else:  # ry
            grad_theta[qubits[0]] += d
    scale = 0.5 * upstream
    return grad_x * scale, grad_theta * scale
