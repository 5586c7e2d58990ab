"""Pure-state MPS generated by the standard collision model.

A system in state ``phi`` collides in turn with ancillas ``psi_1 ... psi_n``.
The joint output is an open-boundary MPS over (ancilla 1, ..., ancilla n,
system) whose bond indices label a basis of the system Hilbert space.

Site tensors are stored as arrays of shape ``(d, left, right)`` so that
``site[i]`` is the matrix ``A^{[k],i}``.
"""
from __future__ import annotations

import dataclasses
from typing import Sequence

import numpy as np

from . import _core
from .config import ENTRY_CAP, STATE_CAP
from .errors import CapExceededError, DimensionError, ValidationError
from .numkernel import check_state_vector, check_unitary, von_neumann_entropy


@dataclasses.dataclass(frozen=True)
class MPSChain:
    sites: tuple

    def __post_init__(self):
        sites = tuple(np.asarray(s, dtype=complex) for s in self.sites)
        if not sites:
            raise DimensionError("an MPS needs at least one site")
        for k, s in enumerate(sites):
            if s.ndim != 3:
                raise DimensionError(f"site {k} has shape {s.shape}, expected (d, left, right)")
        if sites[0].shape[1] != 1 or sites[-1].shape[2] != 1:
            raise DimensionError("boundary bond dimensions must be 1")
        for k in range(len(sites) - 1):
            if sites[k].shape[2] != sites[k + 1].shape[1]:
                raise DimensionError(f"bond mismatch between sites {k} and {k + 1}")
        object.__setattr__(self, "sites", sites)

    def __len__(self):
        return len(self.sites)

    @property
    def physical_dims(self) -> list[int]:
        return [s.shape[0] for s in self.sites]

    @property
    def bond_dims(self) -> list[int]:
        return [s.shape[2] for s in self.sites[:-1]]

    def parameter_count(self) -> int:
        return sum(s.size for s in self.sites)


def _unitaries(u, n: int) -> list[np.ndarray]:
    arr = np.asarray(u, dtype=complex)
    if arr.ndim == 2:
        check_unitary(arr)
        return [arr] * n
    ops = [check_unitary(x) for x in u]
    if len(ops) != n:
        raise DimensionError(f"got {len(ops)} unitaries for {n} collisions")
    return ops


def build_standard_mps(u, phi, psis: Sequence) -> MPSChain:
    """MPS of ancillas and system after ``len(psis)`` collisions.

    ``u`` acts on system (x) ancilla (system index major). It may also be a
    sequence with one unitary per collision.
    """
    phi = np.asarray(phi, dtype=complex).reshape(-1)
    d_s = phi.size
    phi = check_state_vector(phi, what="system state")
    psis = [np.asarray(p, dtype=complex).reshape(-1) for p in psis]
    if not psis:
        raise DimensionError("need at least one ancilla")
    d = psis[0].size
    psis = [check_state_vector(p, d, what=f"ancilla state {k + 1}") for k, p in enumerate(psis)]
    ops = _unitaries(u, len(psis))
    if ops[0].shape != (d_s * d, d_s * d):
        raise DimensionError(f"unitary shape {ops[0].shape} does not match d_S*d = {d_s * d}")

    sites = []
    for k, (op, psi) in enumerate(zip(ops, psis)):
        u4 = op.reshape(d_s, d, d_s, d)  # [a_out, i_out, a_in, j_in]
        site = np.einsum("bicj,j->icb", u4, psi)  # [i, a_in, a_out]
        if k == 0:
            site = np.einsum("icb,c->ib", site, phi)[:, None, :]
        sites.append(site)
    sites.append(np.eye(d_s, dtype=complex)[:, :, None])
    return MPSChain(tuple(sites))


def amplitude(chain: MPSChain, indices: Sequence[int]) -> complex:
    """Coefficient ``C_{i_1 ... i_N}`` as an ordered matrix product."""
    if len(indices) != len(chain):
        raise DimensionError(f"need {len(chain)} indices, got {len(indices)}")
    out = np.ones((1, 1), dtype=complex)
    for k, (site, i) in enumerate(zip(chain.sites, indices)):
        if not 0 <= i < site.shape[0]:
            raise IndexError(f"index {i} out of range at site {k}")
        out = out @ site[i]
    return complex(out[0, 0])


def _left_block(sites, cap: int) -> np.ndarray:
    """Amplitudes of the first sites with the right bond left open, shape (P, D)."""
    block = np.ones((1, 1), dtype=complex)
    for site in sites:
        if block.shape[0] * site.shape[0] * site.shape[2] > cap:
            raise CapExceededError(f"left block would exceed {cap} entries")
        block = np.einsum("pl,ilr->pir", block, site).reshape(-1, site.shape[2])
    return block


def contract_statevector(chain: MPSChain, cap: int = STATE_CAP) -> np.ndarray:
    """Dense state with site 1 as the most significant index."""
    total = int(np.prod(chain.physical_dims))
    if total > cap:
        raise CapExceededError(f"state dimension {total} exceeds cap {cap}")
    return _left_block(chain.sites, cap * max(chain.bond_dims + [1])).reshape(-1)


@dataclasses.dataclass(frozen=True)
class NormalizationReport:
    deviations: tuple
    tol: float

    @property
    def passed(self) -> bool:
        return all(d <= self.tol for d in self.deviations)

    @property
    def worst(self) -> float:
        return max(self.deviations)

    @property
    def failing_sites(self) -> list[int]:
        return [k for k, d in enumerate(self.deviations) if d > self.tol]


def site_normalization_deviation(site) -> float:
    site = np.asarray(site, dtype=complex)
    gram = np.einsum("ilr,imr->lm", site, site.conj())
    return float(np.max(np.abs(gram - np.eye(site.shape[1]))))


def check_right_normalization(chain: MPSChain, tol: float = 1e-12) -> NormalizationReport:
    """Per-site max deviation of ``sum_i A^i A^i^dagger`` from the identity."""
    return NormalizationReport(tuple(site_normalization_deviation(s) for s in chain.sites), tol)


def _require_right_normalized(sites, tol=1e-10):
    for k, s in enumerate(sites):
        dev = site_normalization_deviation(s)
        if dev > tol:
            raise ValidationError(f"site {k} is not right-normalized (deviation {dev:.3g})")


def reduced_density_left(chain: MPSChain, k: int, cap: int = ENTRY_CAP) -> np.ndarray:
    """State of the first ``k`` sites, contracting only those sites.

    Right normalization of the remaining sites turns their contribution into a
    single identity on the open bond, so it is never touched beyond a check.
    """
    if not 1 <= k <= len(chain):
        raise DimensionError(f"k={k} outside 1..{len(chain)}")
    dim = int(np.prod(chain.physical_dims[:k]))
    if dim * dim > cap:
        raise CapExceededError(f"reduced state of {k} sites has dimension {dim}")
    _require_right_normalized(chain.sites[k:])
    block = _left_block(chain.sites[:k], cap)
    return block @ block.conj().T


def left_gram(chain: MPSChain, k: int) -> np.ndarray:
    """Bond-space Gram matrix ``sum_I P_I^dagger P_I`` of the first ``k`` sites.

    Its spectrum equals the nonzero spectrum of the ``k``-site reduced state.
    """
    gram = np.ones((1, 1), dtype=complex)
    for site in chain.sites[:k]:
        adj = np.ascontiguousarray(site.conj().transpose(0, 2, 1))
        gram = _core.kraus_apply(adj, gram)
    return gram


def entanglement_entropy_cut(chain: MPSChain, k: int) -> float:
    """Entropy (bits) across the cut after site ``k``, from the bond Gram matrix."""
    if not 0 <= k <= len(chain):
        raise DimensionError(f"cut {k} outside 0..{len(chain)}")
    if k in (0, len(chain)):
        return 0.0
    _require_right_normalized(chain.sites[k:])
    gram = left_gram(chain, k)
    return von_neumann_entropy((gram + gram.conj().T) / 2)
