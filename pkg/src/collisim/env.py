"""Correlated ancilla environments and the system-bond Markovian embedding.

An environment is a right-canonical MPDO over the ancillas plus a density
matrix ``chi0`` on its leftmost bond. The joint system (x) bond state is
propagated by one CPTP map per collision, and the system state is its
partial trace over the bond.

Site tensors use the MPDO layout ``(d, kraus, left, right)``. Joint spaces
are always ordered system (x) bond.
"""
from __future__ import annotations

import dataclasses
from typing import Sequence

import numpy as np

from . import _core
from .config import TOL
from .errors import DimensionError, InfiniteCorrelationLengthError, ValidationError
from .mpdo import site_normalization_deviation
from .numkernel import (
    SpectrumResult,
    check_density,
    check_hermitian,
    check_unitary,
    eig_general,
    group_eigenvalues,
    matrix_exp_skew,
    partial_trace,
)


@dataclasses.dataclass(frozen=True)
class EnvironmentMPDO:
    """Ancilla environment: bond state ``chi0`` and site tensors.

    ``tensors`` is either one 4-index array (homogeneous chain) or a sequence
    of them, one per site. ``length=None`` marks an unbounded homogeneous chain.
    """

    chi0: np.ndarray
    tensors: object
    length: int | None = None

    def __post_init__(self):
        chi0 = check_density(self.chi0, what="chi0")
        arr = self.tensors
        if not isinstance(arr, (list, tuple)):
            tensors = np.asarray(arr, dtype=complex)
            if tensors.shape[2] != tensors.shape[3]:
                raise DimensionError("a homogeneous site tensor needs equal left and right bond dims")
            sites = [tensors]
        else:
            tensors = tuple(np.asarray(t, dtype=complex) for t in arr)
            if not tensors:
                raise DimensionError("environment has no sites")
            if self.length is not None and self.length != len(tensors):
                raise DimensionError(f"length {self.length} disagrees with {len(tensors)} site tensors")
            object.__setattr__(self, "length", len(tensors))
            sites = list(tensors)
        for k, t in enumerate(sites):
            if t.ndim != 4:
                raise DimensionError(f"site tensor {k} has shape {t.shape}, expected (d, kraus, left, right)")
            dev = site_normalization_deviation(t)
            if dev > 1e-10:
                raise ValidationError(f"site tensor {k} is not right-normalized (deviation {dev:.3g})")
        for k in range(len(sites) - 1):
            if sites[k].shape[3] != sites[k + 1].shape[2] or sites[k].shape[0] != sites[k + 1].shape[0]:
                raise DimensionError(f"site tensors {k} and {k + 1} are incompatible")
        if sites[0].shape[2] != chi0.shape[0]:
            raise DimensionError(f"chi0 has dimension {chi0.shape[0]}, bond needs {sites[0].shape[2]}")
        if self.length is not None and self.length < 1:
            raise DimensionError("length must be positive")
        object.__setattr__(self, "chi0", chi0)
        object.__setattr__(self, "tensors", tensors)

    @property
    def homogeneous(self) -> bool:
        return isinstance(self.tensors, np.ndarray)

    @property
    def d(self) -> int:
        return self.site(1).shape[0]

    @property
    def bond_dim(self) -> int:
        return self.chi0.shape[0]

    def site(self, k: int) -> np.ndarray:
        """Tensor of site ``k`` (1-based)."""
        if k < 1 or (self.length is not None and k > self.length):
            raise DimensionError(f"site {k} outside the environment (length {self.length})")
        return self.tensors if self.homogeneous else self.tensors[k - 1]

    @classmethod
    def factorized(cls, rho, length: int | None = None) -> "EnvironmentMPDO":
        """Uncorrelated ancillas all in ``rho`` (bond dimension 1)."""
        rho = check_density(rho, what="ancilla state")
        w, v = np.linalg.eigh(rho)
        keep = w > 1e-12
        tensor = (v[:, keep] * np.sqrt(w[keep]))[:, :, None, None]
        return cls(np.ones((1, 1)), tensor, length)

    @classmethod
    def product(cls, rhos: Sequence) -> "EnvironmentMPDO":
        """Uncorrelated ancillas with individual states."""
        tensors = []
        for rho in rhos:
            rho = check_density(rho, what="ancilla state")
            w, v = np.linalg.eigh(rho)
            keep = w > 1e-12
            tensors.append((v[:, keep] * np.sqrt(w[keep]))[:, :, None, None])
        return cls(np.ones((1, 1)), tensors)


def bond_map(tensor, chi, i: int | None = None, i_prime: int | None = None) -> np.ndarray:
    """``sum_b (B_b^i)^T chi conj(B_b^{i'})``; with ``i=None`` sums the diagonal over ``i``."""
    tensor = np.asarray(tensor, dtype=complex)
    if i is None:
        ops = tensor.reshape(-1, tensor.shape[2], tensor.shape[3])
        return _core.kraus_apply(np.ascontiguousarray(ops.transpose(0, 2, 1)), chi)
    return np.einsum("blr,lm,bms->rs", tensor[i], chi, tensor[i_prime].conj(), optimize=True)


def chi_sequence(env: EnvironmentMPDO, k: int) -> list[np.ndarray]:
    """Bond states ``chi_0 ... chi_k`` left of each site."""
    chis = [env.chi0]
    for s in range(1, k + 1):
        chi = bond_map(env.site(s), chis[-1])
        chis.append((chi + chi.conj().T) / 2)
    return chis


def kraus_embedding(env: EnvironmentMPDO, site: int, u) -> np.ndarray:
    """Kraus operators of the collision with ``site`` on system (x) bond.

    Returns an array of shape ``(d*kraus, d_S*right, d_S*left)`` ordered with
    the outgoing ancilla index major.
    """
    tensor = env.site(site)
    d, nk, dl, dr = tensor.shape
    u = check_unitary(u)
    if u.shape[0] % d:
        raise DimensionError(f"unitary dimension {u.shape[0]} is not a multiple of d={d}")
    d_s = u.shape[0] // d
    u4 = u.reshape(d_s, d, d_s, d)
    # K[j, b] = sum_i u4[:, j, :, i] (x) B_b^i^T
    ops = np.einsum("ajci,iblr->jbarcl", u4, tensor)
    return np.ascontiguousarray(ops.reshape(d * nk, d_s * dr, d_s * dl))


def _system_state(joint, d_s, bond):
    return partial_trace(joint, [d_s, bond], [0])


@dataclasses.dataclass(frozen=True)
class CollisionScenario:
    """Full experiment: dimensions, interaction, coupling, initial state, environment."""

    d_s: int
    d: int
    g: float
    tau: float
    rho_s0: np.ndarray
    env: EnvironmentMPDO
    steps: int
    hamiltonian: np.ndarray | None = None
    unitary: np.ndarray | None = None
    name: str = ""

    def __post_init__(self):
        if (self.hamiltonian is None) == (self.unitary is None):
            raise ValidationError("give exactly one of hamiltonian or unitary")
        dim = self.d_s * self.d
        if self.hamiltonian is not None:
            h = check_hermitian(self.hamiltonian, what="hamiltonian")
            if h.shape != (dim, dim):
                raise DimensionError(f"hamiltonian shape {h.shape}, expected {(dim, dim)}")
            norm = float(np.max(np.abs(np.linalg.eigvalsh((h + h.conj().T) / 2))))
            if norm > 1 + 1e-9:
                raise ValidationError(f"hamiltonian operator norm {norm:.6g} exceeds 1")
            object.__setattr__(self, "hamiltonian", h)
        else:
            u = check_unitary(self.unitary)
            if u.shape != (dim, dim):
                raise DimensionError(f"unitary shape {u.shape}, expected {(dim, dim)}")
            object.__setattr__(self, "unitary", u)
        rho = check_density(self.rho_s0, what="initial system state")
        if rho.shape != (self.d_s, self.d_s):
            raise DimensionError(f"initial state shape {rho.shape}, expected {(self.d_s, self.d_s)}")
        object.__setattr__(self, "rho_s0", rho)
        if self.env.d != self.d:
            raise DimensionError(f"environment ancilla dimension {self.env.d} != d={self.d}")
        if self.steps < 0:
            raise ValidationError("steps must be non-negative")
        if self.env.length is not None and self.steps > self.env.length:
            raise ValidationError(f"{self.steps} steps exceed environment length {self.env.length}")
        if self.tau <= 0:
            raise ValidationError("tau must be positive")

    @property
    def g_tau(self) -> float:
        return self.g * self.tau

    @property
    def u(self) -> np.ndarray:
        if self.unitary is not None:
            return self.unitary
        return matrix_exp_skew(self.hamiltonian, self.g * self.tau)

    def replace(self, **changes) -> "CollisionScenario":
        return dataclasses.replace(self, **changes)


@dataclasses.dataclass(frozen=True)
class Trajectory:
    states: tuple
    tau: float = 1.0
    joint_states: tuple | None = None

    def __len__(self):
        return len(self.states)

    @property
    def times(self) -> np.ndarray:
        return self.tau * np.arange(len(self.states))

    def bloch(self) -> np.ndarray:
        """Bloch vectors of a qubit trajectory, shape (len, 3)."""
        from .operators import bloch_vector

        return np.array([bloch_vector(r) for r in self.states])


def evolve(scenario: CollisionScenario, keep_joint: bool = False) -> Trajectory:
    """System trajectory ``rho_S(k tau)`` for ``k = 0 .. steps``.

    The joint system-bond state is propagated; the bond is traced out only
    for reporting.
    """
    env = scenario.env
    u = scenario.u
    joint = np.kron(scenario.rho_s0, env.chi0)
    states = [scenario.rho_s0]
    joints = [joint] if keep_joint else None
    cached = kraus_embedding(env, 1, u) if env.homogeneous else None
    for k in range(1, scenario.steps + 1):
        ops = cached if cached is not None else kraus_embedding(env, k, u)
        joint = _core.kraus_apply(ops, joint)
        bond = joint.shape[0] // scenario.d_s
        states.append(_system_state(joint, scenario.d_s, bond))
        if keep_joint:
            joints.append(joint)
    return Trajectory(tuple(states), scenario.tau, tuple(joints) if keep_joint else None)


def reduced_site_density(env: EnvironmentMPDO, site: int) -> np.ndarray:
    """Initial reduced state of one ancilla."""
    chi = chi_sequence(env, site - 1)[-1]
    tensor = env.site(site)
    d = tensor.shape[0]
    return np.array([[np.trace(bond_map(tensor, chi, i, j)) for j in range(d)] for i in range(d)])


def reduced_two_site_density(env: EnvironmentMPDO, s1: int, s2: int) -> np.ndarray:
    """Initial joint state of ancillas ``s1 < s2``, ordered (s1, s2)."""
    if not 1 <= s1 < s2:
        raise DimensionError(f"need 1 <= s1 < s2, got ({s1}, {s2})")
    env.site(s2)
    chi = chi_sequence(env, s1 - 1)[-1]
    t1, t2 = env.site(s1), env.site(s2)
    d = t1.shape[0]
    out = np.zeros((d, d, d, d), dtype=complex)
    for i in range(d):
        for ip in range(d):
            x = bond_map(t1, chi, i, ip)
            for s in range(s1 + 1, s2):
                x = bond_map(env.site(s), x)
            for j in range(d):
                for jp in range(d):
                    out[i, j, ip, jp] = np.trace(bond_map(t2, x, j, jp))
    return out.reshape(d * d, d * d)


def transfer_matrix(env: EnvironmentMPDO) -> np.ndarray:
    """``T = sum_{i,b} B_b^i (x) conj(B_b^i)`` of a homogeneous environment.

    Its transpose is the matrix of the bond-state recurrence in row-major
    vectorization.
    """
    if not env.homogeneous:
        raise ValidationError("transfer matrix needs a homogeneous environment")
    t = env.tensors
    dim = t.shape[2]
    return np.einsum("iblr,ibms->lmrs", t, t.conj()).reshape(dim * dim, dim * dim)


@dataclasses.dataclass(frozen=True)
class CorrelationSpectrum:
    spectrum: SpectrumResult
    unit: np.ndarray  # boolean flag per eigenvalue
    decaying: tuple  # (eigenvalue, multiplicity) groups of the non-unit part

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.spectrum.eigenvalues

    @property
    def unit_multiplicity(self) -> int:
        return int(np.sum(self.unit))

    @property
    def finite_correlation_length(self) -> bool:
        if self.unit_multiplicity != 1:
            return False
        return all(abs(lam) < 1 - TOL.tol_unit for lam, _ in self.decaying)

    @property
    def correlation_length(self) -> float:
        """``-1/ln|lambda_2|`` in units of sites; ``inf`` for infinite range."""
        if not self.finite_correlation_length:
            return float("inf")
        if not self.decaying:
            return 0.0
        sub = max(abs(lam) for lam, _ in self.decaying)
        return 0.0 if sub < 1e-300 else -1.0 / np.log(sub)


def correlation_spectrum(env: EnvironmentMPDO) -> CorrelationSpectrum:
    """Transfer-matrix spectrum sorted by modulus, unit eigenvalues flagged."""
    t = transfer_matrix(env)
    spec = eig_general(t)
    order = np.lexsort((-spec.eigenvalues.real, -np.round(np.abs(spec.eigenvalues), 12)))
    spec = SpectrumResult(spec.eigenvalues[order], spec.eigenvectors[:, order], spec.is_hermitian_path)
    unit = np.abs(spec.eigenvalues - 1) < TOL.tol_unit
    decaying = tuple(group_eigenvalues(spec.eigenvalues[~unit]))
    return CorrelationSpectrum(spec, unit, decaying)


def stationary_bond_state(env: EnvironmentMPDO) -> np.ndarray:
    """Fixed point of the bond-state recurrence of a homogeneous environment.

    Raises ``InfiniteCorrelationLengthError`` when the fixed point is not unique.
    """
    corr = correlation_spectrum(env)
    if corr.unit_multiplicity != 1:
        raise InfiniteCorrelationLengthError(
            f"unit eigenvalue of the transfer matrix has multiplicity {corr.unit_multiplicity}"
        )
    t = transfer_matrix(env)
    spec = eig_general(t.T)
    idx = int(np.argmin(np.abs(spec.eigenvalues - 1)))
    dim = env.bond_dim
    chi = spec.eigenvectors[:, idx].reshape(dim, dim)
    chi = chi / np.trace(chi)
    return (chi + chi.conj().T) / 2
