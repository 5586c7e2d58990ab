"""Dense complex linear algebra at small dimensions.

Matrices are plain ``numpy`` complex arrays. Vectorization is row-major,
``vec(rho)[i*d + j] = rho[i, j]``, so that ``K rho K^dagger`` corresponds to
the superoperator ``kron(K, K.conj())``.
"""
from __future__ import annotations

import dataclasses
from typing import Callable, Iterable, Sequence

import numpy as np

from . import _core
from .config import ENTRY_CAP, TOL
from .errors import CapExceededError, ConvergenceError, DimensionError, ValidationError

# eigenvalues below this are treated as exact zeros in entropies
ENTROPY_CLAMP = 1e-14


def as_matrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2:
        raise DimensionError(f"expected a matrix, got array with shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValidationError("matrix has non-finite entries")
    return a


def is_hermitian(m, tol: float | None = None) -> bool:
    tol = TOL.tol_herm if tol is None else tol
    m = np.asarray(m)
    return m.shape[0] == m.shape[1] and float(np.max(np.abs(m - m.conj().T), initial=0.0)) <= tol


def check_hermitian(m, tol: float | None = None, what: str = "matrix") -> np.ndarray:
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise DimensionError(f"{what} must be square, got {m.shape}")
    if not is_hermitian(m, tol):
        dev = float(np.max(np.abs(m - m.conj().T)))
        raise ValidationError(f"{what} is not Hermitian (deviation {dev:.3g} > tol_herm)")
    return m


def check_unitary(u, tol: float | None = None, what: str = "unitary") -> np.ndarray:
    tol = TOL.tol_unitary if tol is None else tol
    u = as_matrix(u)
    if u.shape[0] != u.shape[1]:
        raise DimensionError(f"{what} must be square, got {u.shape}")
    dev = float(np.max(np.abs(u @ u.conj().T - np.eye(u.shape[0]))))
    if dev > tol:
        raise ValidationError(f"{what} is not unitary (deviation {dev:.3g} > tol_unitary)")
    return u


def check_density(rho, tol: float | None = None, what: str = "density matrix") -> np.ndarray:
    """Validate Hermiticity, unit trace and positivity; return the array."""
    rho = check_hermitian(rho, tol if tol is not None else TOL.tol_herm, what)
    tol_trace = TOL.tol_trace if tol is None else tol
    tol_psd = TOL.tol_psd if tol is None else tol
    tr = np.trace(rho)
    if abs(tr - 1.0) > tol_trace:
        raise ValidationError(f"{what} has trace {tr.real:.12g}, violates tol_trace={tol_trace:g}")
    low = float(np.linalg.eigvalsh((rho + rho.conj().T) / 2)[0])
    if low < -tol_psd:
        raise ValidationError(f"{what} has negative eigenvalue {low:.3g} (tol_psd={tol_psd:g})")
    return rho


def check_state_vector(v, dim: int | None = None, tol: float = 1e-10, what: str = "state") -> np.ndarray:
    v = np.asarray(v, dtype=complex).reshape(-1)
    if dim is not None and v.size != dim:
        raise DimensionError(f"{what} has dimension {v.size}, expected {dim}")
    norm = float(np.linalg.norm(v))
    if abs(norm - 1.0) > tol:
        raise ValidationError(f"{what} is not normalized (norm {norm:.12g})")
    return v


def kron(a, b) -> np.ndarray:
    """Kronecker product with ``a`` as the major index."""
    a = as_matrix(a)
    b = as_matrix(b)
    if a.size * b.size > ENTRY_CAP:
        raise CapExceededError(f"kron of {a.shape} and {b.shape} exceeds {ENTRY_CAP} entries")
    return np.kron(a, b)


def partial_trace(m, dims: Sequence[int], keep: Iterable[int]) -> np.ndarray:
    """Trace out every subsystem not listed in ``keep`` (0-based indices)."""
    m = as_matrix(m)
    dims = [int(d) for d in dims]
    total = int(np.prod(dims)) if dims else 1
    if m.shape != (total, total):
        raise DimensionError(f"matrix shape {m.shape} does not match dims {dims}")
    keep = sorted(set(int(k) for k in keep))
    if any(k < 0 or k >= len(dims) for k in keep):
        raise DimensionError(f"keep={keep} out of range for {len(dims)} subsystems")
    n = len(dims)
    t = m.reshape(dims + dims)
    traced = [k for k in range(n) if k not in keep]
    # contract bra/ket pairs from the highest axis down so indices stay valid
    for count, k in enumerate(sorted(traced, reverse=True)):
        cur = n - count
        t = np.trace(t, axis1=k, axis2=k + cur)
    kd = int(np.prod([dims[k] for k in keep])) if keep else 1
    return t.reshape(kd, kd)


def matrix_exp_skew(h, theta: float, tol: float | None = None) -> np.ndarray:
    """Return ``exp(-i theta h)`` for Hermitian ``h`` via its eigendecomposition."""
    h = check_hermitian(h, tol, "generator")
    w, v = np.linalg.eigh((h + h.conj().T) / 2)
    return (v * np.exp(-1j * theta * w)) @ v.conj().T


@dataclasses.dataclass(frozen=True)
class SpectrumResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns
    is_hermitian_path: bool

    def residuals(self, m) -> np.ndarray:
        m = np.asarray(m, dtype=complex)
        r = m @ self.eigenvectors - self.eigenvectors * self.eigenvalues
        return np.linalg.norm(r, axis=0)


def eig_hermitian(m, tol: float | None = None) -> SpectrumResult:
    """Ascending real spectrum and orthonormal eigenvectors of a Hermitian matrix."""
    m = check_hermitian(m, tol)
    w, v = np.linalg.eigh((m + m.conj().T) / 2)
    return SpectrumResult(w.astype(float), v, True)


def hessenberg(a) -> tuple[np.ndarray, np.ndarray]:
    """Householder reduction ``a = Q H Q^dagger`` with ``H`` upper Hessenberg."""
    h = np.array(a, dtype=complex, copy=True)
    n = h.shape[0]
    q = np.eye(n, dtype=complex)
    for k in range(n - 2):
        x = h[k + 1 :, k].copy()
        alpha = np.linalg.norm(x)
        if alpha == 0.0:
            continue
        phase = x[0] / abs(x[0]) if x[0] != 0 else 1.0
        v = x
        v[0] += phase * alpha
        v /= np.linalg.norm(v)
        h[k + 1 :, :] -= 2.0 * np.outer(v, v.conj() @ h[k + 1 :, :])
        h[:, k + 1 :] -= 2.0 * np.outer(h[:, k + 1 :] @ v, v.conj())
        q[:, k + 1 :] -= 2.0 * np.outer(q[:, k + 1 :] @ v, v.conj())
        h[k + 2 :, k] = 0.0
    return h, q


def _triangular_eigenvectors(t: np.ndarray) -> np.ndarray:
    n = t.shape[0]
    scale = max(float(np.abs(t).max(initial=0.0)), 1.0)
    small = np.finfo(float).eps * scale
    y = np.zeros((n, n), dtype=complex)
    for k in range(n):
        lam = t[k, k]
        y[k, k] = 1.0
        for j in range(k - 1, -1, -1):
            denom = t[j, j] - lam
            if abs(denom) < small:
                denom = small
            y[j, k] = -(t[j, j + 1 : k + 1] @ y[j + 1 : k + 1, k]) / denom
    return y


def eig_general(m, max_sweeps: int = 30, hermitian_shortcut: bool = False) -> SpectrumResult:
    """Full complex spectrum by Hessenberg reduction and shifted QR.

    Eigenvectors come from back-substitution on the Schur form and are
    normalized to unit 2-norm. With ``hermitian_shortcut`` a Hermitian input
    is routed through :func:`eig_hermitian` instead.
    """
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise DimensionError(f"eig_general needs a square matrix, got {m.shape}")
    n = m.shape[0]
    if n == 0:
        return SpectrumResult(np.zeros(0, complex), np.zeros((0, 0), complex), False)
    if hermitian_shortcut and is_hermitian(m):
        res = eig_hermitian(m)
        return SpectrumResult(res.eigenvalues.astype(complex), res.eigenvectors, True)
    h, q = hessenberg(m)
    try:
        t, z, _ = _core.hessenberg_schur(h, q, max_sweeps)
    except RuntimeError as exc:
        raise ConvergenceError(str(exc)) from None
    t = np.triu(t)
    vecs = z @ _triangular_eigenvectors(t)
    vecs /= np.linalg.norm(vecs, axis=0)
    return SpectrumResult(np.diag(t).copy(), vecs, False)


def group_eigenvalues(values: Sequence[complex], tol: float | None = None) -> list[tuple[complex, int]]:
    """Cluster eigenvalues closer than ``tol``; return ``(mean, multiplicity)`` pairs.

    Order of first appearance is kept.
    """
    tol = TOL.tol_degenerate if tol is None else tol
    groups: list[list[complex]] = []
    for v in values:
        for g in groups:
            if abs(g[0] - v) < tol:
                g.append(v)
                break
        else:
            groups.append([v])
    return [(complex(np.mean(g)), len(g)) for g in groups]


def von_neumann_entropy(rho, tol: float | None = None) -> float:
    """Entropy in bits, ``-tr rho log2 rho``."""
    rho = check_density(rho, tol)
    w = np.linalg.eigvalsh((rho + rho.conj().T) / 2)
    w = w[w > ENTROPY_CLAMP]
    return float(max(-np.sum(w * np.log2(w)), 0.0))


def vectorize(m) -> np.ndarray:
    return np.asarray(m, dtype=complex).reshape(-1)


def devectorize(v, dims: int | tuple[int, int] | None = None) -> np.ndarray:
    v = np.asarray(v, dtype=complex).reshape(-1)
    if dims is None:
        d = int(round(np.sqrt(v.size)))
        if d * d != v.size:
            raise DimensionError(f"vector of length {v.size} is not a square matrix")
        dims = (d, d)
    elif isinstance(dims, (int, np.integer)):
        dims = (int(dims), int(dims))
    if dims[0] * dims[1] != v.size:
        raise DimensionError(f"cannot reshape length {v.size} to {dims}")
    return v.reshape(dims)


@dataclasses.dataclass(frozen=True)
class Superoperator:
    """Linear map on operators, acting on row-major vectorized matrices."""

    matrix: np.ndarray
    dim_in: int
    dim_out: int
    label: str = ""

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=complex)
        if mat.shape != (self.dim_out**2, self.dim_in**2):
            raise DimensionError(
                f"superoperator matrix {mat.shape} inconsistent with dims {self.dim_in}->{self.dim_out}"
            )
        object.__setattr__(self, "matrix", mat)

    @classmethod
    def from_function(
        cls, fn: Callable[[np.ndarray], np.ndarray], dim_in: int, dim_out: int | None = None, label: str = ""
    ):
        dim_out = dim_in if dim_out is None else dim_out
        mat = np.zeros((dim_out**2, dim_in**2), dtype=complex)
        for col in range(dim_in**2):
            e = np.zeros(dim_in**2, dtype=complex)
            e[col] = 1.0
            mat[:, col] = vectorize(fn(e.reshape(dim_in, dim_in)))
        return cls(mat, dim_in, dim_out, label)

    @classmethod
    def identity(cls, dim: int, label: str = "Id"):
        return cls(np.eye(dim * dim, dtype=complex), dim, dim, label)

    @classmethod
    def zero(cls, dim: int, label: str = "0"):
        return cls(np.zeros((dim * dim, dim * dim), dtype=complex), dim, dim, label)

    @classmethod
    def sandwich(cls, left, right, label: str = ""):
        """The map ``rho -> left @ rho @ right``."""
        left = np.asarray(left, dtype=complex)
        right = np.asarray(right, dtype=complex)
        return cls(np.kron(left, right.T), left.shape[1], left.shape[0], label)

    def __call__(self, rho) -> np.ndarray:
        rho = np.asarray(rho, dtype=complex)
        if rho.shape != (self.dim_in, self.dim_in):
            raise DimensionError(f"operator shape {rho.shape} does not match dim_in={self.dim_in}")
        return devectorize(self.matrix @ vectorize(rho), self.dim_out)

    def __add__(self, other: "Superoperator") -> "Superoperator":
        self._check_compatible(other)
        return Superoperator(self.matrix + other.matrix, self.dim_in, self.dim_out, self.label)

    def __sub__(self, other: "Superoperator") -> "Superoperator":
        self._check_compatible(other)
        return Superoperator(self.matrix - other.matrix, self.dim_in, self.dim_out, self.label)

    def __neg__(self) -> "Superoperator":
        return Superoperator(-self.matrix, self.dim_in, self.dim_out, self.label)

    def __mul__(self, scalar) -> "Superoperator":
        return Superoperator(self.matrix * scalar, self.dim_in, self.dim_out, self.label)

    __rmul__ = __mul__

    def __matmul__(self, other: "Superoperator") -> "Superoperator":
        """Composition ``self o other``."""
        if other.dim_out != self.dim_in:
            raise DimensionError("composition dimension mismatch")
        return Superoperator(self.matrix @ other.matrix, other.dim_in, self.dim_out, self.label)

    def norm(self) -> float:
        """Frobenius norm of the matrix representation."""
        return float(np.linalg.norm(self.matrix))

    def relabel(self, label: str) -> "Superoperator":
        return dataclasses.replace(self, label=label)

    def _check_compatible(self, other):
        if (self.dim_in, self.dim_out) != (other.dim_in, other.dim_out):
            raise DimensionError("superoperator dimensions differ")


def superop_from_kraus(kraus: Sequence, label: str = "") -> Superoperator:
    ops = [as_matrix(k) for k in kraus]
    if not ops:
        raise DimensionError("empty Kraus family")
    shape = ops[0].shape
    if any(k.shape != shape for k in ops):
        raise DimensionError("Kraus operators have different shapes")
    mat = sum(np.kron(k, k.conj()) for k in ops)
    return Superoperator(mat, shape[1], shape[0], label)
