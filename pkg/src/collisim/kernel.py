"""Memory kernels of the discrete Nakajima-Zwanzig equation and stroboscopic generators.

Conventions:

* ``exact_kernel_term(scenario, k, m)`` is the map ``K_{km}`` in
  ``rho((k+1)tau) = rho(k tau) + tau * sum_m K_{km}[rho((k-m)tau)]``.
* Perturbative maps are dimensionless coefficients: the exact kernel for
  ``m >= 1`` expands as ``g^2 tau * kernel_order2 + g^3 tau^2 * kernel_order3 + ...``.
* Bond-space maps ``Lambda_{ii'}[chi] = sum_b (B_b^i)^T chi conj(B_b^{i'})`` are
  handled as matrices on row-major vectorized bond operators.
"""
from __future__ import annotations

import dataclasses
import math
from typing import Sequence

import numpy as np

from . import _core
from .config import TOL
from .env import (
    CollisionScenario,
    EnvironmentMPDO,
    Trajectory,
    chi_sequence,
    correlation_spectrum,
    kraus_embedding,
    reduced_site_density,
    stationary_bond_state,
)
from .errors import (
    DimensionError,
    HypothesisError,
    InfiniteCorrelationLengthError,
    IntegrationError,
    ValidationError,
)
from .numkernel import Superoperator, partial_trace

# --- projections -----------------------------------------------------------


def _bond_trace(joint, d_s):
    return partial_trace(joint, [d_s, joint.shape[0] // d_s], [0])


def project_P(joint, chi) -> np.ndarray:
    """``tr_bond[R] (x) chi``."""
    joint = np.asarray(joint, dtype=complex)
    chi = np.asarray(chi, dtype=complex)
    if joint.shape[0] % chi.shape[0]:
        raise DimensionError(f"joint dimension {joint.shape[0]} not divisible by bond {chi.shape[0]}")
    return np.kron(_bond_trace(joint, joint.shape[0] // chi.shape[0]), chi)


def project_Q(joint, chi) -> np.ndarray:
    return np.asarray(joint, dtype=complex) - project_P(joint, chi)


# --- exact kernel ----------------------------------------------------------


def _scenario_ops(scenario: CollisionScenario, last_site: int):
    env = scenario.env
    u = scenario.u
    if env.homogeneous:
        ops = kraus_embedding(env, 1, u)
        return lambda s: ops
    cache = {s: kraus_embedding(env, s, u) for s in range(1, last_site + 1)}
    return cache.__getitem__


def _basis(d):
    for a in range(d):
        for b in range(d):
            e = np.zeros((d, d), dtype=complex)
            e[a, b] = 1.0
            yield e


def exact_kernel_term(scenario: CollisionScenario, k: int, m: int) -> Superoperator:
    """``K_{km}`` from embedding maps and bond projections, divided by ``tau``."""
    if not 0 <= m <= k:
        raise ValidationError(f"need 0 <= m <= k, got k={k}, m={m}")
    env = scenario.env
    if env.length is not None and k + 1 > env.length:
        raise ValidationError(f"K_{{{k}{m}}} needs {k + 1} ancillas, environment has {env.length}")
    d_s = scenario.d_s
    chis = chi_sequence(env, k)
    ops = _scenario_ops(scenario, k + 1)

    def term(rho):
        joint = np.kron(rho, chis[k - m])
        for s in range(k - m + 1, k + 1):
            joint = project_Q(_core.kraus_apply(ops(s), joint), chis[s])
        out = _bond_trace(_core.kraus_apply(ops(k + 1), joint), d_s)
        if m == 0:
            out = out - rho
        return out / scenario.tau

    cols = [term(e).reshape(-1) for e in _basis(d_s)]
    return Superoperator(np.array(cols).T, d_s, d_s, f"K_{k},{m}")


def nz_trajectory(scenario: CollisionScenario, k_max: int | None = None) -> Trajectory:
    """States rebuilt from the discrete Nakajima-Zwanzig recursion alone."""
    k_max = scenario.steps if k_max is None else k_max
    states = [scenario.rho_s0]
    for k in range(k_max):
        nxt = states[k].copy()
        for m in range(k + 1):
            nxt = nxt + scenario.tau * exact_kernel_term(scenario, k, m)(states[k - m])
        states.append(nxt)
    return Trajectory(tuple(states), scenario.tau)


def nz_reconstruct(scenario: CollisionScenario, k: int) -> np.ndarray:
    """``rho_S((k+1) tau)`` from the kernel recursion."""
    return nz_trajectory(scenario, k + 1).states[k + 1]


# --- correlations ----------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class CumulantTable:
    """Connected correlations of ancilla matrix elements.

    ``table`` has one ``(i, i')`` index pair per site, in site order, so order-2
    tables have shape ``(d, d, d, d)`` and order-3 tables ``(d,) * 6``.
    """

    order: int
    offsets: tuple
    table: np.ndarray

    def trace_contraction(self, site: int = 0) -> np.ndarray:
        """Contract the pair of one site with a delta; zero for a cumulant."""
        t = np.moveaxis(self.table, (2 * site, 2 * site + 1), (0, 1))
        return np.einsum("ii...->...", t)


def _lambda_maps(tensor) -> np.ndarray:
    """``lam[i, i']`` = matrix of ``chi -> sum_b B_b^i^T chi conj(B_b^{i'})``."""
    tensor = np.asarray(tensor, dtype=complex)
    d, nk, dl, dr = tensor.shape
    # vec(A X C) = kron(A, C^T) vec(X) with A = B^T, C = conj(B')
    lam = np.einsum("iblr,jbms->ijrslm", tensor, tensor.conj())
    return lam.reshape(d, d, dr * dr, dl * dl)


def _bond_trace_vec(dim):
    return np.eye(dim, dtype=complex).reshape(-1)


def _left_bond(env: EnvironmentMPDO, start: int, chi):
    if chi is not None:
        return np.asarray(chi, dtype=complex)
    return chi_sequence(env, start - 1)[-1]


def _require_homogeneous(env):
    if not env.homogeneous:
        raise ValidationError("cumulants and perturbative kernels need a homogeneous environment")


def _single_moments(lam, chi_vec, tr_vec):
    return np.einsum("s,ijsl,l->ij", tr_vec, lam, chi_vec, optimize=True)


def two_point_cumulant(env: EnvironmentMPDO, m: int, start: int = 1, chi=None) -> CumulantTable:
    """Connected correlations of ancillas ``start`` and ``start + m``.

    ``chi`` overrides the bond state left of ``start`` (e.g. the stationary one).
    """
    _require_homogeneous(env)
    if m < 1:
        raise ValidationError("offset m must be >= 1")
    lam = _lambda_maps(env.tensors)
    t_bond = np.einsum("iirs->rs", lam)
    chi_vec = _left_bond(env, start, chi).reshape(-1)
    tr_vec = _bond_trace_vec(env.bond_dim)
    gap = np.linalg.matrix_power(t_bond, m - 1)
    joint = np.einsum("s,jksr,rq,ilqp,p->iljk", tr_vec, lam, gap, lam, chi_vec, optimize=True)
    first = _single_moments(lam, chi_vec, tr_vec)
    later = _single_moments(lam, np.linalg.matrix_power(t_bond, m) @ chi_vec, tr_vec)
    return CumulantTable(2, (m,), joint - np.einsum("il,jk->iljk", first, later))


def three_point_cumulant(env: EnvironmentMPDO, l: int, m: int, start: int = 1, chi=None) -> CumulantTable:
    """Waldenfels cumulant of ancillas ``start``, ``start + l``, ``start + m``.

    ``<abc> - <ab><c> - <a><bc> + <a><b><c>`` for sites in increasing order.
    """
    _require_homogeneous(env)
    if not 0 < l < m:
        raise ValidationError(f"need 0 < l < m, got l={l}, m={m}")
    lam = _lambda_maps(env.tensors)
    t_bond = np.einsum("iirs->rs", lam)
    chis = [_left_bond(env, start, chi).reshape(-1)]
    for _ in range(m):
        chis.append(t_bond @ chis[-1])
    tr_vec = _bond_trace_vec(env.bond_dim)
    p1 = np.linalg.matrix_power(t_bond, l - 1)
    p2 = np.linalg.matrix_power(t_bond, m - l - 1)
    a = _single_moments(lam, chis[0], tr_vec)
    b = _single_moments(lam, chis[l], tr_vec)
    c = _single_moments(lam, chis[m], tr_vec)

    def pair(gap, vec):
        return np.einsum("s,jksr,rq,ilqp,p->iljk", tr_vec, lam, gap, lam, vec, optimize=True)

    ab = pair(p1, chis[0])
    bc = pair(p2, chis[l])
    abc = np.einsum("s,klsr,rq,ijqp,pn,abnc,c->abijkl", tr_vec, lam, p2, lam, p1, lam, chis[0], optimize=True)
    table = (
        abc
        - np.einsum("abij,kl->abijkl", ab, c)
        - np.einsum("ab,ijkl->abijkl", a, bc)
        + np.einsum("ab,ij,kl->abijkl", a, b, c, optimize=True)
    )
    return CumulantTable(3, (l, m), table)


# --- perturbative maps -----------------------------------------------------


def _require_hamiltonian(scenario):
    if scenario.hamiltonian is None:
        raise ValidationError("this operation needs a scenario given by a Hamiltonian, not a bare unitary")
    return scenario.hamiltonian


def _blocks(op, d_s, d):
    """``blk[a, b] = <a|op|b>`` on the ancilla, an operator on the system."""
    return op.reshape(d_s, d, d_s, d).transpose(1, 3, 0, 2)


def phi_term(h, d_s: int, d: int, order: int) -> np.ndarray:
    """Superoperator matrices of the order-``n`` coefficient of ``tr_anc[U (rho (x) |i><i'|) U^dagger]``.

    Returns shape ``(d, d, d_s^2, d_s^2)`` indexed by ``(i, i')``.
    """
    h = np.asarray(h, dtype=complex)
    out = np.zeros((d, d, d_s * d_s, d_s * d_s), dtype=complex)
    for a in range(order + 1):
        b = order - a
        coef = (-1j) ** a * (1j) ** b / (math.factorial(a) * math.factorial(b))
        left = _blocks(np.linalg.matrix_power(h, a), d_s, d)
        right = _blocks(np.linalg.matrix_power(h, b), d_s, d)
        # sum_j <j|H^a|i> rho <i'|H^b|j>
        out += coef * np.einsum("jixy,kjzw->ikxwyz", left, right).reshape(d, d, d_s * d_s, d_s * d_s)
    return out


def _weighted(table, maps):
    return np.einsum("ij,ijrs->rs", table, maps)


def _order2_from_table(c2, phi1):
    return np.einsum("abij,ijrs,abst->rt", c2, phi1, phi1, optimize=True)


def _order2_cross(c2, phi1, phi2):
    spec = "abij,ijrs,abst->rt"
    return np.einsum(spec, c2, phi1, phi2, optimize=True) + np.einsum(spec, c2, phi2, phi1, optimize=True)


def kernel_order2(scenario: CollisionScenario, m: int, k: int | None = None, chi=None) -> Superoperator:
    """Coefficient of ``g^2 tau`` in ``K_{km}`` for ``m >= 1``.

    Equals ``-sum C2[i,i',j,j'] [H_{j'j}, [H_{i'i}, rho]]`` with ``H_{ab} = <a|H|b>``.
    ``k`` defaults to ``m`` (the correlation starts at ancilla 1).
    """
    h = _require_hamiltonian(scenario)
    k = m if k is None else k
    c2 = two_point_cumulant(scenario.env, m, k - m + 1, chi).table
    phi1 = phi_term(h, scenario.d_s, scenario.d, 1)
    return Superoperator(_order2_from_table(c2, phi1), scenario.d_s, scenario.d_s, f"K2_{m}")


def kernel_order3(scenario: CollisionScenario, m: int, k: int | None = None, chi=None) -> Superoperator:
    """Coefficient of ``g^3 tau^2`` in ``K_{km}`` for ``m >= 1``."""
    h = _require_hamiltonian(scenario)
    k = m if k is None else k
    start = k - m + 1
    d_s, d = scenario.d_s, scenario.d
    phi1 = phi_term(h, d_s, d, 1)
    phi2 = phi_term(h, d_s, d, 2)
    c2 = two_point_cumulant(scenario.env, m, start, chi).table
    mat = _order2_cross(c2, phi1, phi2)
    for l in range(1, m):
        c3 = three_point_cumulant(scenario.env, l, m, start, chi).table
        mat = mat + np.einsum("abijkl,klrs,ijst,abtu->ru", c3, phi1, phi1, phi1, optimize=True)
    return Superoperator(mat, d_s, d_s, f"K3_{m}")


@dataclasses.dataclass(frozen=True)
class OrderReport:
    m: int
    g_taus: tuple
    norms: tuple
    exponent: float | None  # None when every norm vanishes
    zeroth_order_norm: float
    order2_relative_error: float | None

    @property
    def identically_zero(self) -> bool:
        return self.exponent is None

    @property
    def passed(self) -> bool:
        if self.zeroth_order_norm >= 1e-12:
            return False
        if self.identically_zero:
            return True
        return 1.9 <= self.exponent <= 2.1


def perturbative_order_check(
    scenario: CollisionScenario, k: int, m: int, g_taus: Sequence[float] = (1e-2, 5e-3, 2.5e-3)
) -> OrderReport:
    """Fit the power of ``g`` in ``||K_{km}||`` and compare with ``kernel_order2``.

    ``tau`` is held fixed; ``g`` is varied. The zeroth-order term is the exact
    kernel of the identity collision. The order-2 comparison uses the middle
    ``g tau`` value.
    """
    if m < 1:
        raise ValidationError("order audit is for m >= 1")
    _require_hamiltonian(scenario)
    tau = scenario.tau
    steps = max(scenario.steps, k + 1)
    if scenario.env.length is not None:
        steps = min(steps, scenario.env.length)
    zero = exact_kernel_term(scenario.replace(g=0.0, steps=steps), k, m).norm()
    norms, exact = [], []
    for gt in g_taus:
        term = exact_kernel_term(scenario.replace(g=gt / tau, steps=steps), k, m)
        exact.append(term)
        norms.append(term.norm())
    scale = max(norms)
    if scale < 1e-13:
        return OrderReport(m, tuple(g_taus), tuple(norms), None, zero, None)
    slope = float(np.polyfit(np.log(g_taus), np.log(norms), 1)[0])
    mid = len(g_taus) // 2
    g = g_taus[mid] / tau
    predicted = kernel_order2(scenario, m, k).matrix
    rel = float(np.linalg.norm(exact[mid].matrix / (g * g * tau) - predicted) / np.linalg.norm(predicted))
    return OrderReport(m, tuple(g_taus), tuple(norms), slope, zero, rel)


# --- stroboscopic generators ------------------------------------------------


def _generator_bond_state(env: EnvironmentMPDO):
    try:
        return stationary_bond_state(env)
    except InfiniteCorrelationLengthError:
        return env.chi0


def mean_coupling(h, rho1, d_s, d):
    """``tr_anc[H (I (x) rho_1)]``."""
    return partial_trace(h @ np.kron(np.eye(d_s), rho1), [d_s, d], [0])


def _site_state(env, chi):
    probe = EnvironmentMPDO(chi, env.tensors)
    return reduced_site_density(probe, 1)


def local_generator(scenario: CollisionScenario, drop_hamiltonian: bool = False, chi=None) -> Superoperator:
    """Second-order local generator ``g^2 tau (tr_anc[H (rho (x) rho_1) H] - {<H^2>, rho}/2)``.

    The first-order part ``-i g [<H>_anc, rho]`` is not part of the result.
    Unless ``drop_hamiltonian`` is set it must vanish on the initial state,
    otherwise ``HypothesisError`` is raised. The ancilla state ``rho_1`` comes
    from the stationary bond state (or ``chi0`` when that is not unique).
    """
    h = _require_hamiltonian(scenario)
    _require_homogeneous(scenario.env)
    d_s, d = scenario.d_s, scenario.d
    chi = _generator_bond_state(scenario.env) if chi is None else chi
    rho1 = _site_state(scenario.env, chi)
    if not drop_hamiltonian:
        mean = mean_coupling(h, rho1, d_s, d)
        comm = mean @ scenario.rho_s0 - scenario.rho_s0 @ mean
        if np.max(np.abs(comm)) > 1e-10:
            raise HypothesisError(
                f"[<H>_anc, rho_S(0)] does not vanish (max entry {np.max(np.abs(comm)):.3g})"
            )
    phi2 = phi_term(h, d_s, d, 2)
    # second-order coefficient of tr_anc[U (rho (x) rho1) U^dagger]
    mat = np.einsum("ij,ijrs->rs", rho1, phi2)
    rate = scenario.g**2 * scenario.tau
    return Superoperator(rate * mat, d_s, d_s, "L_local")


def _resolvent(t_bond, chi_vec, tr_vec):
    """``G Q`` with ``G = (I - T + P)^-1`` and ``P[F] = tr(F) chi``."""
    p = np.outer(chi_vec, tr_vec)
    n = t_bond.shape[0]
    g = np.linalg.inv(np.eye(n) - t_bond + p)
    return g @ (np.eye(n) - p)


def summed_cumulants(env: EnvironmentMPDO, chi) -> tuple[np.ndarray, np.ndarray]:
    """``sum_m C2_m`` and ``sum_{m, 0<l<m} C3_{l,m}`` for a stationary bond state."""
    lam = _lambda_maps(env.tensors)
    t_bond = np.einsum("iirs->rs", lam)
    chi_vec = np.asarray(chi, dtype=complex).reshape(-1)
    tr_vec = _bond_trace_vec(env.bond_dim)
    gq = _resolvent(t_bond, chi_vec, tr_vec)
    s2 = np.einsum("s,jksr,rq,ilqp,p->iljk", tr_vec, lam, gq, lam, chi_vec, optimize=True)
    s3 = np.einsum("s,klsr,rq,ijqp,pn,abnc,c->abijkl", tr_vec, lam, gq, lam, gq, lam, chi_vec, optimize=True)
    return s2, s3


@dataclasses.dataclass(frozen=True)
class NonlocalTerm:
    """One exponentially decaying kernel component ``K_m ~ lam^(m-1) * first``.

    ``first`` is its contribution to ``K_1`` (dimensionless). In the generator
    it enters as ``first / (1 - lam)``, i.e. ``lam/(1-lam) * first/lam``.
    """

    eigenvalue: complex
    multiplicity: int
    first: Superoperator

    @property
    def map(self) -> Superoperator | None:
        """``first / lam``, undefined for a zero eigenvalue."""
        if abs(self.eigenvalue) < 1e-14:
            return None
        return self.first * (1 / self.eigenvalue)

    @property
    def weight(self) -> complex:
        return 1 / (1 - self.eigenvalue)


@dataclasses.dataclass(frozen=True)
class KossakowskiReport:
    matrix: np.ndarray  # in the orthonormal traceless Hermitian basis
    rates: np.ndarray
    jumps: tuple  # normalized to tr(J^dagger J) = d
    hamiltonian: np.ndarray
    trace_annihilating: bool
    hermiticity_preserving: bool

    @property
    def psd(self) -> bool:
        return bool(self.rates.min(initial=0.0) >= -1e-10)


@dataclasses.dataclass(frozen=True)
class StroboscopicGenerator:
    order: int
    rate: float  # g^2 tau
    local: Superoperator
    nonlocal_terms: tuple
    effective: Superoperator
    fit_residual: float
    resummation_residual: float
    third_order: Superoperator | None = None

    @property
    def nonlocal_part(self) -> Superoperator:
        rest = self.effective - self.local
        return rest - self.third_order if self.third_order is not None else rest

    def kossakowski(self) -> KossakowskiReport:
        return kossakowski(self.effective)


def hermitian_basis(d: int) -> list[np.ndarray]:
    """``I/sqrt(d)`` followed by an orthonormal traceless Hermitian basis."""
    basis = [np.eye(d, dtype=complex) / np.sqrt(d)]
    for a in range(d):
        for b in range(a + 1, d):
            x = np.zeros((d, d), dtype=complex)
            x[a, b] = x[b, a] = 1 / np.sqrt(2)
            y = np.zeros((d, d), dtype=complex)
            y[a, b], y[b, a] = -1j / np.sqrt(2), 1j / np.sqrt(2)
            basis += [x, y]
    for l in range(1, d):
        z = np.zeros((d, d), dtype=complex)
        z[np.arange(l), np.arange(l)] = 1.0
        z[l, l] = -l
        basis.append(z / np.sqrt(l * (l + 1)))
    return basis


def _canonical_eigh(c: np.ndarray, tol: float = 1e-9):
    """Descending eigenpairs with a reproducible basis inside degenerate clusters."""
    w, v = np.linalg.eigh(c)
    order = np.argsort(-w, kind="stable")
    w, v = w[order], v[:, order]
    scale = max(float(np.max(np.abs(w), initial=0.0)), 1e-300)
    out = np.zeros_like(v)
    start = 0
    while start < len(w):
        stop = start + 1
        while stop < len(w) and abs(w[stop] - w[start]) <= tol * scale:
            stop += 1
        proj = v[:, start:stop] @ v[:, start:stop].conj().T
        picked = []
        # project unit vectors into the cluster and orthonormalize
        for e in np.eye(len(w)):
            x = proj @ e
            for y in picked:
                x = x - (y.conj() @ x) * y
            if np.linalg.norm(x) > 1e-6:
                picked.append(x / np.linalg.norm(x))
            if len(picked) == stop - start:
                break
        for j, x in enumerate(picked):
            lead = x[np.argmax(np.abs(x) > 1e-9)]
            out[:, start + j] = x * (abs(lead) / lead)
        start = stop
    return w, out


def kossakowski(gen: Superoperator) -> KossakowskiReport:
    """Decompose a generator into Hamiltonian and Kossakowski parts."""
    d = gen.dim_in
    basis = hermitian_basis(d)
    n = len(basis)
    sandwiches = np.array([np.kron(f, g.T).reshape(-1) for f in basis for g in basis]).T
    coeffs = np.linalg.lstsq(sandwiches, gen.matrix.reshape(-1), rcond=None)[0].reshape(n, n)
    c = coeffs[1:, 1:]
    c = (c + c.conj().T) / 2
    w, v = _canonical_eigh(c)
    jumps = tuple(np.sqrt(d) * sum(v[i, j] * basis[i + 1] for i in range(n - 1)) for j in range(n - 1))
    a = coeffs[0, 0] / (2 * d) * np.eye(d) + sum(coeffs[i, 0] * basis[i] for i in range(1, n)) / np.sqrt(d)
    ham = 0.5j * (a - a.conj().T)
    probes = [np.eye(d)] + basis[1:]
    vec_id = np.eye(d).reshape(-1)
    trace_ok = float(np.max(np.abs(vec_id @ gen.matrix))) < 1e-10
    herm_ok = all(np.max(np.abs((lambda x: x - x.conj().T)(gen(p)))) < 1e-10 for p in probes)
    return KossakowskiReport(c, w / d, jumps, ham, trace_ok, herm_ok)


def _vandermonde_fit(kernels: list[np.ndarray], eigenvalues: list[complex]):
    """Solve ``K_m = sum_j lam_j^(m-1) X_j`` for ``m = 1..J``."""
    size = len(eigenvalues)
    vander = np.array([[lam ** (m - 1) for lam in eigenvalues] for m in range(1, size + 1)], dtype=complex)
    stack = np.array([k.reshape(-1) for k in kernels])
    sol = np.linalg.solve(vander, stack)
    return [x.reshape(kernels[0].shape) for x in sol]


def stroboscopic_generator(scenario: CollisionScenario, order: int = 1) -> StroboscopicGenerator:
    """Generator of the first- (``order=1``) or second-order stroboscopic limit.

    The kernel series is resummed against the transfer spectrum using the
    stationary bond state. Order 2 adds the ``g^3 tau^2`` terms of the local
    map and of the resummed third-order kernel.
    """
    if order not in (1, 2):
        raise ValidationError("order must be 1 or 2")
    h = _require_hamiltonian(scenario)
    env = scenario.env
    _require_homogeneous(env)
    corr = correlation_spectrum(env)
    if corr.unit_multiplicity != 1:
        raise InfiniteCorrelationLengthError(
            f"unit eigenvalue of the transfer matrix has multiplicity {corr.unit_multiplicity}"
        )
    if not corr.finite_correlation_length:
        raise InfiniteCorrelationLengthError("a non-unit transfer eigenvalue has modulus 1")
    chi = stationary_bond_state(env)
    d_s, d = scenario.d_s, scenario.d
    rate = scenario.g**2 * scenario.tau
    local = local_generator(scenario, chi=chi)

    groups = list(corr.decaying)
    lams = [lam for lam, _ in groups]
    terms, fit_residual = [], 0.0
    if groups:
        kernels = [kernel_order2(scenario, m, chi=chi).matrix for m in range(1, len(groups) + 3)]
        xs = _vandermonde_fit(kernels[: len(groups)], lams)
        for m, km in enumerate(kernels, start=1):
            pred = sum(lam ** (m - 1) * x for lam, x in zip(lams, xs))
            fit_residual = max(fit_residual, float(np.max(np.abs(pred - km), initial=0.0)))
        terms = [
            NonlocalTerm(lam, mult, Superoperator(x, d_s, d_s, f"K2 component lambda={lam:.6g}"))
            for (lam, mult), x in zip(groups, xs)
        ]
    summed = sum((t.first.matrix * t.weight for t in terms), np.zeros((d_s * d_s,) * 2, dtype=complex))

    s2, s3 = summed_cumulants(env, chi)
    phi1 = phi_term(h, d_s, d, 1)
    direct = _order2_from_table(s2, phi1)
    resum_residual = float(np.max(np.abs(direct - summed), initial=0.0))
    effective = local + Superoperator(rate * summed, d_s, d_s)

    third = None
    if order == 2:
        phi2 = phi_term(h, d_s, d, 2)
        phi3 = phi_term(h, d_s, d, 3)
        rho1 = _site_state(env, chi)
        mat = np.einsum("ij,ijrs->rs", rho1, phi3)
        mat = mat + _order2_cross(s2, phi1, phi2)
        mat = mat + np.einsum("abijkl,klrs,ijst,abtu->ru", s3, phi1, phi1, phi1, optimize=True)
        third = Superoperator(scenario.g**3 * scenario.tau**2 * mat, d_s, d_s, "third order")
        effective = effective + third
    return StroboscopicGenerator(
        order, rate, local, tuple(terms), effective.relabel("L_eff"), fit_residual, resum_residual, third
    )


def integrate_generator(gen, rho0, t_grid: Sequence[float], max_step_norm: float = 0.02) -> Trajectory:
    """Classical RK4 for ``d rho/dt = L[rho]`` reported on ``t_grid``.

    ``gen`` is a ``StroboscopicGenerator`` or a ``Superoperator``. Each grid
    interval is split so that ``h * ||L||`` stays below ``max_step_norm``.
    """
    sup = gen.effective if isinstance(gen, StroboscopicGenerator) else gen
    mat = sup.matrix
    rho0 = np.asarray(rho0, dtype=complex)
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size == 0:
        raise ValidationError("t_grid must be a non-empty 1-d sequence")
    if np.any(np.diff(t_grid) < 0):
        raise ValidationError("t_grid must be non-decreasing")
    norm = float(np.linalg.norm(mat, 2)) if mat.size else 0.0
    vec = rho0.reshape(-1)
    states = [rho0]
    limit = 1e6 * max(1.0, float(np.abs(vec).max()))
    for t0, t1 in zip(t_grid[:-1], t_grid[1:]):
        span = t1 - t0
        n = max(1, int(np.ceil(span * norm / max_step_norm))) if span > 0 else 0
        h = span / n if n else 0.0
        for _ in range(n):
            k1 = mat @ vec
            k2 = mat @ (vec + 0.5 * h * k1)
            k3 = mat @ (vec + 0.5 * h * k2)
            k4 = mat @ (vec + h * k3)
            vec = vec + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(vec)) or np.abs(vec).max() > limit:
            raise IntegrationError(f"integration blew up before t={t1:g}")
        states.append(vec.reshape(rho0.shape).copy())
    tau = float(t_grid[1] - t_grid[0]) if t_grid.size > 1 else 1.0
    return Trajectory(tuple(states), tau)
