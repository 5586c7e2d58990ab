"""Brute-force dense references for small collision models.

Everything here works on the full ``d_S * d^n`` Hilbert space with plain
numpy and deliberately shares no code with the tensor-network engine.
"""
import numpy as np


def _apply_pair(op, tensor, ax_s, ax_a, d_s, d):
    """Apply ``op`` (on system (x) ancilla) to two axes of a state tensor."""
    u4 = op.reshape(d_s, d, d_s, d)
    moved = np.moveaxis(tensor, (ax_s, ax_a), (0, 1))
    out = np.tensordot(u4, moved, axes=([2, 3], [0, 1]))
    return np.moveaxis(out, (0, 1), (ax_s, ax_a))


def _unitary_list(u, n):
    u = np.asarray(u, dtype=complex)
    return [u] * n if u.ndim == 2 else list(u)


def collide_pure(u, phi, psis):
    """Global state vector ordered (ancilla 1, ..., ancilla n, system)."""
    phi = np.asarray(phi, dtype=complex)
    psis = [np.asarray(p, dtype=complex) for p in psis]
    d_s, d, n = phi.size, psis[0].size, len(psis)
    state = phi
    for p in psis:
        state = np.kron(state, p)
    tensor = state.reshape([d_s] + [d] * n)
    for k, op in enumerate(_unitary_list(u, n), start=1):
        tensor = _apply_pair(op, tensor, 0, k, d_s, d)
    return np.moveaxis(tensor, 0, -1).reshape(-1)


def collide_mixed(u, rho_s, rhos):
    """Global density matrix ordered (ancilla 1, ..., ancilla n, system)."""
    rho_s = np.asarray(rho_s, dtype=complex)
    d_s, d, n = rho_s.shape[0], np.asarray(rhos[0]).shape[0], len(rhos)
    state = rho_s
    for r in rhos:
        state = np.kron(state, np.asarray(r, dtype=complex))
    return _evolve_joint(u, state, d_s, d, n, order_system_last=True)


def _evolve_joint(u, state, d_s, d, n, order_system_last=False, record=None):
    dims = [d_s] + [d] * n
    tensor = state.reshape(dims + dims)
    for k, op in enumerate(_unitary_list(u, n), start=1):
        tensor = _apply_pair(op, tensor, 0, k, d_s, d)
        tensor = _apply_pair(op.conj(), tensor, n + 1, n + 1 + k, d_s, d)
        if record is not None:
            record.append(tensor)
    if order_system_last:
        tensor = np.moveaxis(tensor, (0, n + 1), (n, 2 * n + 1))
    total = d_s * d**n
    return tensor.reshape(total, total)


def reduce(rho, dims, keep):
    """Partial trace onto the subsystems in ``keep`` (0-based), by einsum labels."""
    n = len(dims)
    tensor = np.asarray(rho).reshape(list(dims) * 2)
    letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
    ket = list(letters[:n])
    bra = [letters[n + i] if i in keep else ket[i] for i in range(n)]
    out = [ket[i] for i in keep] + [bra[i] for i in keep]
    res = np.einsum("".join(ket + bra) + "->" + "".join(out), tensor)
    size = int(np.prod([dims[i] for i in keep])) if keep else 1
    return res.reshape(size, size)


def environment_state(chi0, tensors, n):
    """Dense state of ``n`` ancillas from an MPDO with left bond state ``chi0``.

    ``tensors`` is one ``(d, kraus, D, D)`` array or a list of them. The right
    end is closed with the identity.
    """
    if not isinstance(tensors, (list, tuple)):
        tensors = [np.asarray(tensors)] * n
    d = tensors[0].shape[0]
    # block[p, q, r, s]: ancilla ket p, bra q, open bond pair (r, s)
    block = np.asarray(chi0, dtype=complex)[None, None]
    for t in tensors[:n]:
        # chi -> sum_b B^i^T chi conj(B^i'), with i on the ket
        block = np.einsum("pqlm,iblr,jbms->piqjrs", block, t, t.conj())
        p = block.shape[0] * d
        block = block.reshape(p, p, t.shape[3], t.shape[3])
    return np.einsum("pqrr->pq", block)


def correlated_trajectory(u, rho_s, env_rho, d, n):
    """System states after ``0..n`` collisions with ancillas in ``env_rho``."""
    rho_s = np.asarray(rho_s, dtype=complex)
    d_s = rho_s.shape[0]
    record = []
    _evolve_joint(u, np.kron(rho_s, env_rho), d_s, d, n, record=record)
    dims = [d_s] + [d] * n
    total = d_s * d**n
    states = [rho_s]
    for tensor in record:
        states.append(reduce(tensor.reshape(total, total), dims, [0]))
    return states


def random_unitary(dim, rng):
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_density(dim, rng, rank=None):
    rank = dim if rank is None else rank
    a = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


def random_state_vector(dim, rng):
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def random_right_canonical(d, kraus, bond, rng):
    """Random ``(d, kraus, bond, bond)`` tensor with ``sum B B^dagger = I``."""
    iso = random_unitary(d * kraus * bond, rng)[:, :bond]
    return iso.reshape(d, kraus, bond, bond).transpose(0, 1, 3, 2).conj()
