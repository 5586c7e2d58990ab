"""Right-canonical MPDO generated by the standard collision model with mixed inputs.

Site tensors have shape ``(d, kraus, left, right)``; ``site[i, b]`` is the
matrix ``B_b^{[k],i}``. The chain orders sites as (ancilla 1, ..., ancilla n,
system), like the pure-state MPS.
"""
from __future__ import annotations

import dataclasses
from typing import Sequence

import numpy as np

from .config import ENTRY_CAP
from .errors import CapExceededError, DimensionError, ValidationError
from .mps import NormalizationReport, _unitaries
from .numkernel import check_density

# eigenvalues of input states below this are dropped from the spectral sums
WEIGHT_CUTOFF = 1e-12


@dataclasses.dataclass(frozen=True)
class MPDOChain:
    sites: tuple

    def __post_init__(self):
        sites = tuple(np.asarray(s, dtype=complex) for s in self.sites)
        if not sites:
            raise DimensionError("an MPDO needs at least one site")
        for k, s in enumerate(sites):
            if s.ndim != 4:
                raise DimensionError(f"site {k} has shape {s.shape}, expected (d, kraus, left, right)")
        if sites[0].shape[2] != 1 or sites[-1].shape[3] != 1:
            raise DimensionError("boundary bond dimensions must be 1")
        for k in range(len(sites) - 1):
            if sites[k].shape[3] != sites[k + 1].shape[2]:
                raise DimensionError(f"bond mismatch between sites {k} and {k + 1}")
        object.__setattr__(self, "sites", sites)

    def __len__(self):
        return len(self.sites)

    @property
    def physical_dims(self) -> list[int]:
        return [s.shape[0] for s in self.sites]

    @property
    def kraus_counts(self) -> list[int]:
        return [s.shape[1] for s in self.sites]

    def parameter_count(self) -> int:
        return sum(s.size for s in self.sites)


def spectral_terms(rho, cutoff: float = WEIGHT_CUTOFF) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (descending, above ``cutoff``) and eigenvectors as columns.

    Each eigenvector is rephased so its largest-magnitude entry is real positive.
    """
    rho = check_density(rho)
    w, v = np.linalg.eigh((rho + rho.conj().T) / 2)
    order = np.argsort(-w, kind="stable")
    w, v = w[order], v[:, order]
    keep = w > cutoff
    w, v = w[keep], v[:, keep]
    for c in range(v.shape[1]):
        top = v[np.argmax(np.abs(v[:, c])), c]
        v[:, c] *= abs(top) / top
    return w, v


def build_standard_mpdo(u, rho_s, rhos: Sequence) -> MPDOChain:
    """Right-canonical MPDO of ancillas and system after ``len(rhos)`` collisions.

    ``u`` acts on system (x) ancilla; a sequence gives one unitary per collision.
    The Kraus index at site 1 runs over (system term, ancilla term) pairs with
    the ancilla term fastest.
    """
    rho_s = np.asarray(rho_s, dtype=complex)
    d_s = rho_s.shape[0]
    lam_s, vec_s = spectral_terms(rho_s)
    if not rhos:
        raise DimensionError("need at least one ancilla")
    d = np.asarray(rhos[0]).shape[0]
    ops = _unitaries(u, len(rhos))
    if ops[0].shape != (d_s * d, d_s * d):
        raise DimensionError(f"unitary shape {ops[0].shape} does not match d_S*d = {d_s * d}")

    sites = []
    for k, (op, rho) in enumerate(zip(ops, rhos)):
        rho = np.asarray(rho, dtype=complex)
        if rho.shape != (d, d):
            raise DimensionError(f"ancilla state {k + 1} has shape {rho.shape}, expected {(d, d)}")
        lam, vec = spectral_terms(rho)
        u4 = op.reshape(d_s, d, d_s, d)  # [a_out, i_out, a_in, j_in]
        # [i, m, a_in, a_out]
        site = np.einsum("bicj,jm->imcb", u4, vec) * np.sqrt(lam)[None, :, None, None]
        if k == 0:
            first = np.einsum("imcb,cl->ilmb", site, vec_s) * np.sqrt(lam_s)[None, :, None, None]
            site = first.reshape(d, -1, 1, d_s)
        sites.append(site)
    sites.append(np.eye(d_s, dtype=complex)[:, None, :, None])
    return MPDOChain(tuple(sites))


def m_tensor(site, i: int, i_prime: int) -> np.ndarray:
    """``sum_b B_b^i (x) conj(B_b^{i'})`` as a (left^2, right^2) matrix."""
    site = np.asarray(site, dtype=complex)
    d, nk, dl, dr = site.shape
    if not (0 <= i < d and 0 <= i_prime < d):
        raise IndexError(f"physical indices ({i}, {i_prime}) out of range for d={d}")
    out = np.einsum("blr,bmt->lmrt", site[i], site[i_prime].conj())
    return out.reshape(dl * dl, dr * dr)


def _accumulate(sites, cap: int) -> np.ndarray:
    """Open-bond block ``X[p, p', r, r']`` of the first sites."""
    block = np.ones((1, 1, 1, 1), dtype=complex)
    for site in sites:
        p = block.shape[0] * site.shape[0]
        if p * p * site.shape[3] ** 2 > cap:
            raise CapExceededError(f"dense block of dimension {p} exceeds cap {cap}")
        block = np.einsum("pqlm,iblr,jbms->piqjrs", block, site, site.conj(), optimize=True)
        block = block.reshape(p, p, site.shape[3], site.shape[3])
    return block


def contract_density(chain: MPDOChain, cap: int = ENTRY_CAP) -> np.ndarray:
    """Dense density matrix on (ancilla 1, ..., ancilla n, system)."""
    block = _accumulate(chain.sites, cap)
    return block[:, :, 0, 0]


def site_normalization_deviation(site) -> float:
    site = np.asarray(site, dtype=complex)
    gram = np.einsum("iblr,ibmr->lm", site, site.conj())
    return float(np.max(np.abs(gram - np.eye(site.shape[2]))))


def check_right_normalization_mpdo(chain: MPDOChain, tol: float = 1e-12) -> NormalizationReport:
    """Per-site max deviation of ``sum_{i,b} B_b^i B_b^i^dagger`` from the identity."""
    return NormalizationReport(tuple(site_normalization_deviation(s) for s in chain.sites), tol)


def reduced_density_first_k_mpdo(chain: MPDOChain, k: int, cap: int = ENTRY_CAP) -> np.ndarray:
    """State of the first ``k`` sites, contracting only those sites."""
    if not 1 <= k <= len(chain):
        raise DimensionError(f"k={k} outside 1..{len(chain)}")
    for s, site in enumerate(chain.sites[k:], start=k):
        dev = site_normalization_deviation(site)
        if dev > 1e-10:
            raise ValidationError(f"site {s} is not right-normalized (deviation {dev:.3g})")
    block = _accumulate(chain.sites[:k], cap)
    return np.einsum("pqrr->pq", block)
