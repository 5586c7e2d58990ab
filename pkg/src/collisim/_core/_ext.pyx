# cython: language_level=3
"""Compiled hot kernels: Kraus-map application and Hessenberg QR sweeps."""
import numpy as np
cimport numpy as cnp

from libc.math cimport hypot, fabs

cdef extern from "complex.h" nogil:
    double complex csqrt(double complex)
    double cabs(double complex)
    double complex conj(double complex)

cnp.import_array()

cdef double _EPS = np.finfo(float).eps


def kraus_apply(kraus, rho):
    """Return ``sum_k K_k rho K_k^dagger``.

    ``kraus`` has shape ``(n_ops, n_out, n_in)``, ``rho`` shape ``(n_in, n_in)``.
    """
    cdef double complex[:, :, ::1] K = np.ascontiguousarray(kraus, dtype=complex)
    cdef double complex[:, ::1] R = np.ascontiguousarray(rho, dtype=complex)
    cdef Py_ssize_t nk = K.shape[0], n_out = K.shape[1], n_in = K.shape[2]
    if R.shape[0] != n_in or R.shape[1] != n_in:
        raise ValueError("rho shape does not match Kraus input dimension")
    out_arr = np.zeros((n_out, n_out), dtype=complex)
    cdef double complex[:, ::1] out = out_arr
    tmp_arr = np.empty((n_out, n_in), dtype=complex)
    cdef double complex[:, ::1] tmp = tmp_arr
    cdef Py_ssize_t k, i, j, l
    cdef double complex acc
    with nogil:
        for k in range(nk):
            for i in range(n_out):
                for j in range(n_in):
                    acc = 0
                    for l in range(n_in):
                        acc = acc + K[k, i, l] * R[l, j]
                    tmp[i, j] = acc
            for i in range(n_out):
                for l in range(n_out):
                    acc = 0
                    for j in range(n_in):
                        acc = acc + tmp[i, j] * conj(K[k, l, j])
                    out[i, l] = out[i, l] + acc
    return out_arr


def hessenberg_schur(h, z, int max_sweeps=30):
    """Compiled twin of ``_fallback.hessenberg_schur``."""
    t_arr = np.array(h, dtype=complex, order="C", copy=True)
    z_arr = np.array(z, dtype=complex, order="C", copy=True)
    cdef double complex[:, ::1] t = t_arr
    cdef double complex[:, ::1] zz = z_arr
    cdef Py_ssize_t n = t.shape[0]
    cdef Py_ssize_t hi = n - 1, lo, k, j, top
    cdef int sweeps = 0, total = 0, failed = 0
    cdef double s, r, anorm = 0.0
    cdef double complex a, b, c, d, half, disc, mu, mu1, mu2, x, y, c_, s_, u, v
    cs_arr = np.empty(max(n, 1), dtype=complex)
    ss_arr = np.empty(max(n, 1), dtype=complex)
    cdef double complex[::1] cs = cs_arr
    cdef double complex[::1] ss = ss_arr
    for k in range(n):
        for j in range(n):
            anorm += cabs(t[k, j])
    if anorm == 0.0:
        anorm = 1.0
    with nogil:
        while hi > 0:
            lo = hi
            while lo > 0:
                s = cabs(t[lo - 1, lo - 1]) + cabs(t[lo, lo])
                if s == 0.0:
                    s = anorm
                if cabs(t[lo, lo - 1]) <= _EPS * s:
                    t[lo, lo - 1] = 0
                    break
                lo -= 1
            if lo == hi:
                hi -= 1
                sweeps = 0
                continue
            sweeps += 1
            total += 1
            if sweeps > max_sweeps:
                failed = 1
                break
            if sweeps % 10 == 0:
                mu = t[hi, hi] + cabs(t[hi, hi - 1])
            else:
                a = t[hi - 1, hi - 1]
                b = t[hi - 1, hi]
                c = t[hi, hi - 1]
                d = t[hi, hi]
                half = 0.5 * (a - d)
                disc = csqrt(half * half + b * c)
                mu1 = d + half + disc
                mu2 = d + half - disc
                if cabs(mu1 - d) < cabs(mu2 - d):
                    mu = mu1
                else:
                    mu = mu2
            for k in range(lo, hi + 1):
                t[k, k] = t[k, k] - mu
            for k in range(lo, hi):
                x = t[k, k]
                y = t[k + 1, k]
                r = hypot(cabs(x), cabs(y))
                if r == 0.0:
                    c_ = 1.0
                    s_ = 0.0
                else:
                    c_ = x / r
                    s_ = y / r
                cs[k] = c_
                ss[k] = s_
                for j in range(k, n):
                    u = t[k, j]
                    v = t[k + 1, j]
                    t[k, j] = conj(c_) * u + conj(s_) * v
                    t[k + 1, j] = -s_ * u + c_ * v
            for k in range(lo, hi):
                c_ = cs[k]
                s_ = ss[k]
                top = k + 2
                if top > hi:
                    top = hi
                for j in range(top + 1):
                    u = t[j, k]
                    v = t[j, k + 1]
                    t[j, k] = u * c_ + v * s_
                    t[j, k + 1] = -u * conj(s_) + v * conj(c_)
                for j in range(n):
                    u = zz[j, k]
                    v = zz[j, k + 1]
                    zz[j, k] = u * c_ + v * s_
                    zz[j, k + 1] = -u * conj(s_) + v * conj(c_)
            for k in range(lo, hi + 1):
                t[k, k] = t[k, k] + mu
    if failed:
        raise RuntimeError(f"QR iteration did not converge for block ending at {hi}")
    return t_arr, z_arr, total
