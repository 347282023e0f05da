"""Independent numerical oracles used to freeze expected values.

These deliberately avoid the package's analytic gradient paths: gradients
come from central finite differences, circuit states from dense matrix
products built with numpy.kron.
"""
from __future__ import annotations

import numpy as np


def finite_difference_grad(f, x: np.ndarray, h_scale: float = 1e-3) -> np.ndarray:
    """Central-difference gradient of scalar f(x), differencing in place.

    Uses the actually-represented step (x+h) - (x-h) as the denominator to
    cancel float32 rounding of the perturbation itself.
    """
    x = np.asarray(x)
    grad = np.zeros(x.shape, dtype=np.float64)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        h = h_scale * max(1.0, abs(float(orig)))
        flat[i] = orig + h
        hi_val = float(flat[i])
        f_hi = f(x)
        flat[i] = orig - h
        lo_val = float(flat[i])
        f_lo = f(x)
        flat[i] = orig
        gflat[i] = (f_hi - f_lo) / (hi_val - lo_val)
    return grad


def finite_difference_grad_at(f, x: np.ndarray, flat_indices, h_scale: float = 1e-3) -> dict[int, float]:
    """Central differences at selected flat indices only (for large tensors)."""
    x = np.asarray(x)
    flat = x.reshape(-1)
    out = {}
    for i in flat_indices:
        orig = flat[i]
        h = h_scale * max(1.0, abs(float(orig)))
        flat[i] = orig + h
        hi_val = float(flat[i])
        f_hi = f(x)
        flat[i] = orig - h
        lo_val = float(flat[i])
        f_lo = f(x)
        flat[i] = orig
        out[int(i)] = (f_hi - f_lo) / (hi_val - lo_val)
    return out


def grads_close(analytic: np.ndarray, numeric: np.ndarray, tol: float) -> bool:
    """Relative agreement |a - b| <= tol * max(1, |a|, |b|), elementwise."""
    a = np.asarray(analytic, dtype=np.float64)
    b = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))
    return bool((np.abs(a - b) <= tol * denom).all())


def separated_values(rng: np.random.Generator, shape: tuple[int, ...], gap: float = 0.05) -> np.ndarray:
    """Random array whose entries are pairwise separated by at least `gap`.

    Keeps finite differences away from max-pool ties and ReLU kinks.
    """
    n = int(np.prod(shape))
    base = (np.arange(n) - n / 2.0 + 0.25) * gap * 2.0  # off-grid: never exactly 0
    return base[rng.permutation(n)].reshape(shape).astype(np.float32)


def dense_gate_matrix(kind: str, n: int, qubits: tuple[int, ...], angle: float | None) -> np.ndarray:
    """Full 2^n x 2^n unitary of one gate, built by explicit basis bookkeeping."""
    dim = 2**n
    mat = np.zeros((dim, dim), dtype=np.complex128)
    h = np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2)
    for col in range(dim):
        bits = [(col >> q) & 1 for q in range(n)]
        if kind == "h":
            (q,) = qubits
            for out_bit in (0, 1):
                row = (col & ~(1 << q)) | (out_bit << q)
                mat[row, col] += h[out_bit, bits[q]]
        elif kind == "p":
            (q,) = qubits
            mat[col, col] = np.exp(1j * angle) if bits[q] else 1.0
        elif kind == "cz":
            q1, q2 = qubits
            mat[col, col] = -1.0 if bits[q1] and bits[q2] else 1.0
        elif kind == "zz":
            q1, q2 = qubits
            mat[col, col] = np.exp(1j * angle) if bits[q1] ^ bits[q2] else 1.0
        elif kind == "ry":
            (q,) = qubits
            c, s = np.cos(angle / 2), np.sin(angle / 2)
            ry = np.array([[c, -s], [s, c]], dtype=np.complex128)
            for out_bit in (0, 1):
                row = (col & ~(1 << q)) | (out_bit << q)
                mat[row, col] += ry[out_bit, bits[q]]
        else:
            raise ValueError(kind)
    return mat


def dense_circuit_state(n: int, ops: list[tuple]) -> np.ndarray:
    """Apply ops (kind, qubits, angle) to |0...0> via dense matrix products."""
    state = np.zeros(2**n, dtype=np.complex128)
    state[0] = 1.0
    for kind, qubits, angle in ops:
        state = dense_gate_matrix(kind, n, qubits, angle) @ state
    return state
