"""Published closed-form results, transcribed as printed.

This module is an oracle source: it imports nothing from the simulation
engine, so comparisons against it do not share code with what they test.
Where a printed expression is known to be inconsistent, a corrected variant
sits next to it under a distinct name; the literal form is kept unchanged.
"""
import itertools

import numpy as np

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (SX, SY, SZ)

_R2 = np.sqrt(2.0)
JX = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=complex) / _R2
JY = np.array([[0, -1j, 0], [1j, 0, -1j], [0, 1j, 0]], dtype=complex) / _R2
JZ = np.diag([1.0, 0.0, -1.0]).astype(complex)
SPINS = (JX, JY, JZ)


def _expm_pauli(theta, sigma):
    """``exp(-i theta sigma)`` for a Pauli matrix."""
    return np.cos(theta) * np.eye(2) - 1j * np.sin(theta) * sigma


# --- W-like chain (energy exchange, basis down=0, up=1) ---------------------


def wchain_site_matrices(g_tau):
    """``{(site, outcome): matrix}`` for the first, bulk and terminal sites."""
    c, s = np.cos(g_tau), np.sin(g_tau)
    return {
        ("first", 0): np.array([[0, c]]),
        ("first", 1): np.array([[s, 0]]),
        ("bulk", 0): np.array([[1, 0], [0, c]]),
        ("bulk", 1): np.array([[0, 0], [s, 0]]),
        ("last", 0): np.array([[1], [0]]),
        ("last", 1): np.array([[0], [1]]),
    }


def wchain_amplitude(g_tau, n, up_position):
    """Amplitude with ancilla ``up_position`` (1-based) excited and system down.

    ``up_position = None`` gives all ancillas down and the system up.
    """
    if up_position is None:
        return np.cos(g_tau) ** n
    return np.cos(g_tau) ** (up_position - 1) * np.sin(g_tau)


# --- Gibbs ancillas ---------------------------------------------------------


def gibbs_site_matrices(g_tau, delta_over_kt):
    """Printed B-matrices; ``delta_over_kt = (E_up - E_down) / k_B T``."""
    c, s = np.cos(g_tau), np.sin(g_tau)
    w1 = 1 / np.sqrt(1 + np.exp(-delta_over_kt))  # (E_down - E_up)/kT in the exponent
    w2 = 1 / np.sqrt(1 + np.exp(delta_over_kt))
    return {
        ("first", 0, 1): w1 * np.array([[0, c]]),
        ("first", 0, 2): np.array([[0, 0]]),
        ("first", 1, 1): w1 * np.array([[s, 0]]),
        ("first", 1, 2): w2 * np.array([[0, 1]]),
        ("bulk", 0, 1): w1 * np.array([[1, 0], [0, c]]),
        ("bulk", 0, 2): w2 * np.array([[0, -s], [0, 0]]),
        ("bulk", 1, 1): w1 * np.array([[0, 0], [s, 0]]),
        ("bulk", 1, 2): w2 * np.array([[c, 0], [0, 1]]),
        ("last", 0, 1): np.array([[1], [0]]),
        ("last", 1, 1): np.array([[0], [1]]),
    }


# --- GHZ qutrits with (1/2) sum sigma_j J_j ---------------------------------


def ghz_lambda(k, g_tau):
    """Scaling of the x and y Bloch components after ``k`` collisions."""
    ph = 1.5 * g_tau
    num = (
        3**k * (1 + 2 * np.exp(1j * ph)) ** k
        + 3**k * (1 + 2 * np.exp(-1j * ph)) ** k
        + (5 + 4 * np.cos(ph)) ** k
    )
    return (num / 3.0 ** (2 * k + 1)).real


def ghz_lambda_z(k, g_tau):
    ph = 1.5 * g_tau
    return ((1 + 8 * np.cos(ph)) ** k + 2 * (5 + 4 * np.cos(ph)) ** k) / 3.0 ** (2 * k + 1)


def ghz_chi0():
    return np.ones((3, 3), dtype=complex) / 3


# --- GHZ qutrits with controlled Pauli rotations ------------------------------


def ghz_controlled_kernel(rho, g_tau, m, tau=1.0):
    """Printed memory kernel ``K_{km}[rho]`` (independent of ``k``), ``m >= 1``."""
    rho = np.asarray(rho, dtype=complex)
    rot = [_expm_pauli(g_tau, s) for s in PAULIS]
    total = np.zeros((2, 2), dtype=complex)
    # idx[0] is the earliest ancilla, idx[m] the latest
    for idx in itertools.product(range(3), repeat=m + 1):
        weight = np.prod([float(idx[l] == idx[l + 1]) - 1 / 3 for l in range(m)])
        x = rho
        for i in idx:
            x = rot[i] @ x @ rot[i].conj().T
        total += weight * x
    return total / (3 * tau)


# --- AKLT chain -------------------------------------------------------------


def aklt_tensors():
    a, b = 1 / np.sqrt(3), np.sqrt(2 / 3)
    return [
        np.array([[0, b], [0, 0]], dtype=complex),
        np.array([[-a, 0], [0, a]], dtype=complex),
        np.array([[0, 0], [-b, 0]], dtype=complex),
    ]


def aklt_transfer_matrix():
    return np.array([[1, 0, 0, 2], [0, -1, 0, 0], [0, 0, -1, 0], [2, 0, 0, 1]], dtype=complex) / 3


AKLT_TRANSFER_SPECTRUM = (1.0, -1 / 3, -1 / 3, -1 / 3)


def _spin_dot():
    return sum(np.kron(j, j) for j in SPINS)


def aklt_two_site_printed(m):
    """Two-site state exactly as printed: ``I/9 + (-1/3)^m sum J (x) J``."""
    return np.eye(9, dtype=complex) / 9 + (-1 / 3) ** m * _spin_dot()


def aklt_two_site_corrected(m):
    """State of ancillas ``1`` and ``1 + m``: ``I/9 + (1/3)(-1/3)^m sum J (x) J``."""
    return np.eye(9, dtype=complex) / 9 + (1 / 3) * (-1 / 3) ** m * _spin_dot()


def _dissipator(jump, rho):
    return jump @ rho @ jump.conj().T - rho


AKLT_NONLOCAL_JUMP = (SX - SZ) / np.sqrt(2)


def aklt_local(rho, g_tau, tau=1.0):
    """``(g^2 tau / 3) sum_j (sigma_j rho sigma_j - rho)``."""
    g = g_tau / tau
    return (g * g * tau / 3) * sum(_dissipator(s, rho) for s in PAULIS)


def aklt_gksl(rho, g_tau, tau=1.0):
    """Right-hand side of the stroboscopic master equation for the projective coupling."""
    g = g_tau / tau
    rho = np.asarray(rho, dtype=complex)
    return aklt_local(rho, g_tau, tau) - (g * g * tau / 3) * _dissipator(AKLT_NONLOCAL_JUMP, rho)


AKLT_GKSL_RATES = {"local": 1 / 3, "nonlocal": -1 / 3}  # in units of g^2 tau


def aklt_initial_bloch():
    return np.ones(3) / np.sqrt(3)


# --- AKLT chain with the Heisenberg-like coupling ---------------------------


def _xyz(g_tau):
    ph = 1.5 * g_tau
    x = 2 + 7 * np.cos(ph)
    y = 7 + 2 * np.cos(ph)
    z = 2 * np.sqrt(y * y + 27 * np.sin(ph) ** 2)
    return x, y, z


def aklt_depolarization(k, g_tau):
    """Depolarization function ``q(k tau)``."""
    x, y, z = _xyz(g_tau)
    return (0.5 + x / z) * ((y + z) / 27) ** k + (0.5 - x / z) * ((y - z) / 27) ** k


def aklt_depolarization_step(g_tau):
    """Printed ``q(2 tau) - q(tau)``."""
    _, y, _ = _xyz(g_tau)
    return 2**5 * y / 3**6 * np.sin(0.75 * g_tau) ** 2


def aklt_weak_coupling_rate(g, tau):
    """Decay rate of ``q`` for ``g tau << 1``: ``g^4 tau^3 / 8``."""
    return g**4 * tau**3 / 8
