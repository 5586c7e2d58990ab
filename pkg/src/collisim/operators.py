"""Named single-particle operators and interaction generators.

Qubit basis ordering is (|down>, |up>) for the energy-exchange models and the
usual computational basis for Pauli matrices. Spin-1 operators are in the
basis (|1>, |2>, |3>) = (m=+1, 0, -1).
"""
import numpy as np

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = (SIGMA_X, SIGMA_Y, SIGMA_Z)

_R2 = np.sqrt(2.0)
J_X = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=complex) / _R2
J_Y = np.array([[0, -1j, 0], [1j, 0, -1j], [0, 1j, 0]], dtype=complex) / _R2
J_Z = np.diag([1.0, 0.0, -1.0]).astype(complex)
SPIN1 = (J_X, J_Y, J_Z)

DOWN, UP = 0, 1


def projector(d, j):
    p = np.zeros((d, d), dtype=complex)
    p[j, j] = 1.0
    return p


def energy_exchange_generator():
    """Hermitian ``h`` with ``exp(-i gt h) = exp[gt(|du><ud| - |ud><du|)]``.

    Two qubits, system first, basis (down, up).
    """
    du = np.zeros(4, dtype=complex)
    ud = np.zeros(4, dtype=complex)
    du[DOWN * 2 + UP] = 1.0
    ud[UP * 2 + DOWN] = 1.0
    skew = np.outer(du, ud) - np.outer(ud, du)
    return 1j * skew


def pauli_projector_coupling():
    """``sum_j sigma_j (x) |j><j|`` on qubit (x) qutrit."""
    return sum(np.kron(s, projector(3, j)) for j, s in enumerate(PAULI))


def pauli_spin1_coupling():
    """``(1/2) sum_j sigma_j (x) J_j`` on qubit (x) qutrit."""
    return 0.5 * sum(np.kron(s, jj) for s, jj in zip(PAULI, SPIN1))


GENERATORS = {
    "energy-exchange": energy_exchange_generator,
    "pauli-projector": pauli_projector_coupling,
    "pauli-spin1": pauli_spin1_coupling,
}


def bloch_vector(rho):
    rho = np.asarray(rho)
    return np.array([np.trace(rho @ s).real for s in PAULI])


def from_bloch(r):
    r = np.asarray(r, dtype=float)
    return 0.5 * (np.eye(2) + sum(c * s for c, s in zip(r, PAULI)))
