"""Pure-Python/numpy implementations of the hot kernels.

Same signatures and semantics as the compiled ``_ext`` module. Selected
automatically when the extension is unavailable.
"""
import cmath
import math

import numpy as np

_EPS = np.finfo(float).eps


def kraus_apply(kraus, rho):
    """Return ``sum_k K_k rho K_k^dagger``.

    ``kraus`` has shape ``(n_ops, n_out, n_in)``, ``rho`` shape ``(n_in, n_in)``.
    """
    kraus = np.asarray(kraus, dtype=complex)
    rho = np.asarray(rho, dtype=complex)
    kr = kraus @ rho
    return np.einsum("kij,klj->il", kr, kraus.conj())


def hessenberg_schur(h, z, max_sweeps=30):
    """Reduce an upper Hessenberg matrix to upper-triangular Schur form.

    Works in place on copies of ``h`` and ``z``; rotations are accumulated
    into ``z`` so that ``A = Z T Z^dagger`` whenever ``A = Z H Z^dagger`` on
    entry. Single-shift complex QR with Wilkinson shifts and exceptional
    shifts every tenth sweep on a stalled block.

    Returns ``(t, z, total_sweeps)``. Raises ``RuntimeError`` when a block
    needs more than ``max_sweeps`` sweeps.
    """
    t = np.array(h, dtype=complex, copy=True)
    z = np.array(z, dtype=complex, copy=True)
    n = t.shape[0]
    hi = n - 1
    sweeps = 0
    total = 0
    anorm = float(np.abs(t).sum()) or 1.0
    cs = np.empty(n, dtype=complex)
    ss = np.empty(n, dtype=complex)
    while hi > 0:
        lo = hi
        while lo > 0:
            s = abs(t[lo - 1, lo - 1]) + abs(t[lo, lo])
            if s == 0.0:
                s = anorm
            if abs(t[lo, lo - 1]) <= _EPS * s:
                t[lo, lo - 1] = 0.0
                break
            lo -= 1
        if lo == hi:
            hi -= 1
            sweeps = 0
            continue
        sweeps += 1
        total += 1
        if sweeps > max_sweeps:
            raise RuntimeError(f"QR iteration did not converge for block ending at {hi}")

        if sweeps % 10 == 0:
            mu = t[hi, hi] + abs(t[hi, hi - 1])
        else:
            a = t[hi - 1, hi - 1]
            b = t[hi - 1, hi]
            c = t[hi, hi - 1]
            d = t[hi, hi]
            half = 0.5 * (a - d)
            disc = cmath.sqrt(half * half + b * c)
            mu1 = d + half + disc
            mu2 = d + half - disc
            mu = mu1 if abs(mu1 - d) < abs(mu2 - d) else mu2

        for k in range(lo, hi + 1):
            t[k, k] -= mu
        for k in range(lo, hi):
            x = t[k, k]
            y = t[k + 1, k]
            r = math.hypot(abs(x), abs(y))
            if r == 0.0:
                c_, s_ = 1.0 + 0j, 0j
            else:
                c_, s_ = x / r, y / r
            cs[k], ss[k] = c_, s_
            rk = t[k, k:].copy()
            rk1 = t[k + 1, k:].copy()
            t[k, k:] = c_.conjugate() * rk + s_.conjugate() * rk1
            t[k + 1, k:] = -s_ * rk + c_ * rk1
        for k in range(lo, hi):
            c_, s_ = cs[k], ss[k]
            top = min(k + 2, hi) + 1
            ck = t[:top, k].copy()
            ck1 = t[:top, k + 1].copy()
            t[:top, k] = ck * c_ + ck1 * s_
            t[:top, k + 1] = -ck * s_.conjugate() + ck1 * c_.conjugate()
            zk = z[:, k].copy()
            zk1 = z[:, k + 1].copy()
            z[:, k] = zk * c_ + zk1 * s_
            z[:, k + 1] = -zk * s_.conjugate() + zk1 * c_.conjugate()
        for k in range(lo, hi + 1):
            t[k, k] += mu
    return t, z, total
