"""Dense complex linear algebra for small multi-qubit states and operators.

Everything works on plain ``numpy`` arrays of dtype complex128.  Qubit index 0
is the leftmost tensor factor, i.e. the most significant bit of a state-vector
index.  Dimensions are capped at 32 (5 qubits): a 4-qubit register plus one
ancilla is the largest object anything downstream needs.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MAX_DIM = 32
DEFAULT_TOL = 1e-10

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
S_GATE = np.diag([1, 1j]).astype(complex)
CZ = np.diag([1, 1, 1, -1]).astype(complex)
SWAP = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
)
PAULIS = {"I": I2, "X": X, "Y": Y, "Z": Z}


def _as_square(m) -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    return m


def num_qubits_of(dim: int) -> int:
    n = int(dim).bit_length() - 1
    if dim != 2**n or not (2 <= dim <= MAX_DIM):
        raise ValueError(f"dimension {dim} is not a power of two in [2, {MAX_DIM}]")
    return n


def tensor(*mats) -> np.ndarray:
    """Kronecker product of one or more operators, left factor most significant."""
    out = np.array([[1.0]], dtype=complex)
    for m in mats:
        m = _as_square(m)
        if out.shape[0] * m.shape[0] > MAX_DIM:
            raise ValueError(f"tensor product exceeds maximum dimension {MAX_DIM}")
        out = np.kron(out, m)
    num_qubits_of(out.shape[0])
    return out


def dagger(m) -> np.ndarray:
    return np.asarray(m, dtype=complex).conj().T


def is_unitary(m, tol: float = 1e-12) -> bool:
    m = _as_square(m)
    return np.abs(m.conj().T @ m - np.eye(m.shape[0])).max() < tol


def equal_up_to_global_phase(a, b, tol: float = DEFAULT_TOL) -> bool:
    """True iff a == c*b entrywise for some unit-modulus scalar c.

    The phase candidate is read off the largest-magnitude entry of b; an
    all-zero b matches only an all-zero a.
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    idx = np.unravel_index(np.argmax(np.abs(b)), b.shape)
    if abs(b[idx]) < tol:
        return bool(np.abs(a).max() <= tol)
    c = a[idx] / b[idx]
    if abs(abs(c) - 1.0) > max(tol, 1e-9):
        return False
    return bool(np.abs(a - c * b).max() <= tol)


_LABEL_KETS = {
    "0": np.array([1, 0], dtype=complex),
    "1": np.array([0, 1], dtype=complex),
    "+": np.array([1, 1], dtype=complex) / np.sqrt(2),
    "-": np.array([1, -1], dtype=complex) / np.sqrt(2),
}


@dataclass(frozen=True)
class PureState:
    """Normalized n-qubit state vector, qubit 0 the most significant factor."""

    num_qubits: int
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size != 2**self.num_qubits:
            raise ValueError(
                f"{amps.size} amplitudes for {self.num_qubits} qubit(s)"
            )
        norm = np.linalg.norm(amps)
        if norm < 1e-12:
            raise ValueError("cannot normalize the zero vector")
        object.__setattr__(self, "amplitudes", amps / norm)

    @classmethod
    def from_vector(cls, vec) -> "PureState":
        vec = np.asarray(vec, dtype=complex).reshape(-1)
        return cls(num_qubits_of(vec.size), vec)

    @classmethod
    def from_label(cls, label: str) -> "PureState":
        """Product state from a string over {0, 1, +, -}, e.g. "0+"."""
        label = label.strip().lstrip("|").rstrip(">⟩")
        if not label or any(ch not in _LABEL_KETS for ch in label):
            raise ValueError(f"unsupported state label {label!r}")
        vec = np.array([1.0], dtype=complex)
        for ch in label:
            vec = np.kron(vec, _LABEL_KETS[ch])
        return cls(len(label), vec)

    def density(self) -> "DensityMatrix":
        return DensityMatrix(self.num_qubits, np.outer(self.amplitudes, self.amplitudes.conj()))

    def fidelity(self, other: "PureState") -> float:
        return float(abs(np.vdot(self.amplitudes, other.amplitudes)) ** 2)


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, unit-trace, positive-semidefinite matrix on n qubits."""

    num_qubits: int
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = _as_square(self.matrix)
        if m.shape[0] != 2**self.num_qubits:
            raise ValueError(f"shape {m.shape} for {self.num_qubits} qubit(s)")
        if np.abs(m - m.conj().T).max() > 1e-12:
            raise ValueError("matrix is not Hermitian")
        if abs(np.trace(m) - 1.0) > 1e-12:
            raise ValueError("trace is not 1")
        if np.linalg.eigvalsh(m).min() < -1e-10:
            raise ValueError("matrix has a negative eigenvalue")
        object.__setattr__(self, "matrix", m.astype(complex))


def partial_trace(rho: DensityMatrix, keep) -> DensityMatrix:
    """Reduced state on the kept qubit indices (0-based, order preserved)."""
    keep = sorted(set(int(q) for q in keep))
    n = rho.num_qubits
    if not keep:
        raise ValueError("keep set must be nonempty")
    if any(q < 0 or q >= n for q in keep):
        raise ValueError(f"keep indices {keep} out of range for {n} qubit(s)")
    traced = [q for q in range(n) if q not in keep]
    m = rho.matrix.reshape([2] * (2 * n))
    for q in sorted(traced, reverse=True):
        m = np.trace(m, axis1=q, axis2=q + m.ndim // 2)
    k = len(keep)
    return DensityMatrix(k, m.reshape(2**k, 2**k))


def trace_distance(a: DensityMatrix, b: DensityMatrix) -> float:
    eig = np.linalg.eigvalsh(a.matrix - b.matrix)
    return float(0.5 * np.abs(eig).sum())


def apply_unitary(state: PureState, u, qubits) -> PureState:
    """Apply a k-qubit unitary to the given qubit indices of the state."""
    u = _as_square(u)
    qubits = [int(q) for q in qubits]
    k = num_qubits_of(u.shape[0])
    if len(qubits) != k or len(set(qubits)) != k:
        raise ValueError(f"operator on {k} qubit(s) applied to targets {qubits}")
    n = state.num_qubits
    psi = state.amplitudes.reshape([2] * n)
    psi = np.tensordot(u.reshape([2] * (2 * k)), psi, axes=(range(k, 2 * k), qubits))
    psi = np.moveaxis(psi, range(k), qubits)
    return PureState(n, psi.reshape(-1))
