"""Three-level electronic system: Hamiltonian, eigenbasis, dipole and Liouville algebra.

Basis ordering is (|0>, |1>, |2>): ground state plus two excited states with
energies epsilon + reorg and electronic coupling omega_el between them.  The
bath couples through O = |1><1| - |2><2|.

Vectorization convention (fixed package-wide): row-major, vec(rho)[3a + b] =
rho[a, b], so vec(A rho B) = (A kron B^T) vec(rho).
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ValidationError
from .linalg import matrix_exp

__all__ = [
    "SystemModel",
    "SuperOperator",
    "DIM",
    "LIOUVILLE_DIM",
    "COUPLING_EIGENVALUES",
    "vectorize",
    "unvectorize",
    "trace_vector",
    "left_super",
    "right_super",
    "liouvillian",
    "half_step_propagator",
    "dipole_operator",
    "dipole_superoperator",
]

DIM = 3
LIOUVILLE_DIM = DIM * DIM

# Eigenvalues of the bath-coupling operator O = |1><1| - |2><2| per basis state.
COUPLING_EIGENVALUES = np.array([0.0, 1.0, -1.0])

_IDENTITY = np.eye(DIM)


@dataclass(frozen=True)
class SystemModel:
    """Three-level system parameters (all in 1/ps)."""

    epsilon: float
    omega_el: float
    reorg: float = 0.0
    dimension: int = field(default=DIM, init=False)

    @property
    def hamiltonian(self) -> np.ndarray:
        h = np.zeros((DIM, DIM))
        h[1, 1] = h[2, 2] = self.epsilon + self.reorg
        h[1, 2] = h[2, 1] = self.omega_el
        return h

    @property
    def coupling_operator(self) -> np.ndarray:
        return np.diag(COUPLING_EIGENVALUES)

    @property
    def eigen_energies(self) -> np.ndarray:
        """(0, E_minus, E_plus) with E_pm = epsilon + reorg +- omega_el."""
        e0 = self.epsilon + self.reorg
        return np.array([0.0, e0 - self.omega_el, e0 + self.omega_el])

    @property
    def eigen_minus(self) -> np.ndarray:
        return np.array([0.0, 1.0, -1.0]) / np.sqrt(2.0)

    @property
    def eigen_plus(self) -> np.ndarray:
        return np.array([0.0, 1.0, 1.0]) / np.sqrt(2.0)

    def ground_state(self) -> np.ndarray:
        rho = np.zeros((DIM, DIM), dtype=complex)
        rho[0, 0] = 1.0
        return rho


@dataclass(frozen=True)
class SuperOperator:
    """A 9x9 matrix acting on row-major vectorized 3x3 density matrices."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (LIOUVILLE_DIM, LIOUVILLE_DIM):
            raise ValidationError(
                f"super-operator must be {LIOUVILLE_DIM}x{LIOUVILLE_DIM}, got {m.shape}"
            )
        object.__setattr__(self, "matrix", m)

    def __matmul__(self, other):
        if isinstance(other, SuperOperator):
            return SuperOperator(self.matrix @ other.matrix)
        return self.matrix @ other

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return unvectorize(self.matrix @ vectorize(rho))


def vectorize(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho, dtype=complex).reshape(LIOUVILLE_DIM)


def unvectorize(vec: np.ndarray) -> np.ndarray:
    return np.asarray(vec, dtype=complex).reshape(DIM, DIM)


def trace_vector() -> np.ndarray:
    """Left trace functional: trace_vector @ vec(rho) = Tr(rho)."""
    return vectorize(_IDENTITY)


def left_super(op: np.ndarray) -> SuperOperator:
    """V^L: rho -> V rho."""
    return SuperOperator(np.kron(op, _IDENTITY))


def right_super(op: np.ndarray) -> SuperOperator:
    """V^R: rho -> rho V."""
    return SuperOperator(np.kron(_IDENTITY, np.asarray(op).T))


def liouvillian(h: np.ndarray) -> SuperOperator:
    """-i [h, .] as a 9x9 matrix; h must be Hermitian."""
    h = np.asarray(h, dtype=complex)
    if h.shape != (DIM, DIM):
        raise ValidationError(f"expected a {DIM}x{DIM} Hamiltonian, got {h.shape}")
    if not np.allclose(h, h.conj().T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(h).max())):
        raise ValidationError("liouvillian requires a Hermitian matrix")
    return SuperOperator(-1j * (np.kron(h, _IDENTITY) - np.kron(_IDENTITY, h.T)))


def half_step_propagator(s: SystemModel, dt: float) -> SuperOperator:
    """exp(L_S dt / 2): one half of the symmetric system/bath splitting."""
    if dt <= 0:
        raise ValidationError(f"dt must be > 0, got {dt}")
    return SuperOperator(matrix_exp(liouvillian(s.hamiltonian).matrix * dt / 2.0))


def dipole_operator(which: str = "V2") -> np.ndarray:
    """Transition dipole; only the |0> <-> |2| transition is driven here."""
    if which != "V2":
        raise ConfigError(f"unknown transition {which!r}; supported: 'V2'")
    v = np.zeros((DIM, DIM))
    v[0, 2] = v[2, 0] = 1.0
    return v


def dipole_superoperator(which: str = "V2", side: str = "L") -> SuperOperator:
    """Dipole as a one-sided super-operator, V rho (side 'L') or rho V ('R')."""
    v = dipole_operator(which)
    if side == "L":
        return left_super(v)
    if side == "R":
        return right_super(v)
    raise ConfigError(f"side must be 'L' or 'R', got {side!r}")
