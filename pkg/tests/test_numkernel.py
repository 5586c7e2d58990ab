import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from collisim import _core
from collisim.closed_forms import aklt_transfer_matrix
from collisim.errors import DimensionError, ValidationError
from collisim.numkernel import (
    Superoperator,
    check_density,
    check_unitary,
    devectorize,
    eig_general,
    eig_hermitian,
    group_eigenvalues,
    hessenberg,
    kron,
    matrix_exp_skew,
    partial_trace,
    superop_from_kraus,
    vectorize,
    von_neumann_entropy,
)
from collisim.operators import SIGMA_X, SIGMA_Z, energy_exchange_generator
from collisim.oracles import random_density, random_unitary


def _rand(rng, *shape):
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


def _hermitian(rng, n):
    a = _rand(rng, n, n)
    return a + a.conj().T


# kron


def test_kron_identities():
    assert np.array_equal(kron(np.eye(2), np.eye(2)), np.eye(4))
    assert np.array_equal(kron(SIGMA_X, SIGMA_X), np.fliplr(np.eye(4)))


def test_kron_index_formula(rng):
    a, b = _rand(rng, 2, 3), _rand(rng, 3, 2)
    out = kron(a, b)
    for i in range(2):
        for j in range(3):
            for k in range(3):
                for l in range(2):
                    assert abs(out[i * 3 + k, j * 2 + l] - a[i, j] * b[k, l]) < 1e-14


# partial trace


def test_partial_trace_product_state(rng):
    rho, sigma = random_density(2, rng), _rand(rng, 3, 3)
    assert np.allclose(partial_trace(np.kron(rho, sigma), [2, 3], [0]), rho * np.trace(sigma), atol=1e-14)


def test_partial_trace_bell_state():
    bell = np.array([1, 0, 0, 1]) / np.sqrt(2)
    assert np.allclose(partial_trace(np.outer(bell, bell), [2, 2], [1]), np.eye(2) / 2)


def test_partial_trace_composition(rng):
    m = _hermitian(rng, 8)
    direct = partial_trace(m, [2, 2, 2], [1])
    stepwise = partial_trace(partial_trace(m, [2, 2, 2], [0, 1]), [2, 2], [1])
    assert np.allclose(direct, stepwise, atol=1e-13)


def test_partial_trace_rejects_bad_dims():
    with pytest.raises(DimensionError):
        partial_trace(np.eye(4), [2, 3], [0])
    with pytest.raises(DimensionError):
        partial_trace(np.eye(4), [2, 2], [2])


# unitary exponential


def test_matrix_exp_skew_cases():
    assert np.allclose(matrix_exp_skew(SIGMA_X, 0.0), np.eye(2))
    theta = 0.37
    assert np.allclose(matrix_exp_skew(SIGMA_X, theta), np.cos(theta) * np.eye(2) - 1j * np.sin(theta) * SIGMA_X)


def test_energy_exchange_unitary_entries():
    gt = 0.3
    u = matrix_exp_skew(energy_exchange_generator(), gt)
    # basis |system, ancilla> with down=0, up=1: |up,down> -> cos|up,down> - i sin|down,up>
    assert np.isclose(u[0, 0], 1) and np.isclose(u[3, 3], 1)
    assert np.isclose(abs(u[2, 2]), np.cos(gt)) and np.isclose(abs(u[1, 2]), np.sin(gt))
    assert np.isclose(abs(u[1, 1]), np.cos(gt)) and np.isclose(abs(u[2, 1]), np.sin(gt))


def test_matrix_exp_skew_rejects_non_hermitian():
    with pytest.raises(ValidationError):
        matrix_exp_skew(np.array([[0, 1], [0, 0]]), 1.0)


# spectra


def test_eig_hermitian_cases(rng):
    assert np.allclose(eig_hermitian(np.diag([3.0, 1.0, 2.0])).eigenvalues, [1, 2, 3])
    assert np.allclose(eig_hermitian(SIGMA_Z).eigenvalues, [-1, 1])
    m = _hermitian(rng, 6)
    res = eig_hermitian(m)
    v = res.eigenvectors
    assert np.allclose(v @ np.diag(res.eigenvalues) @ v.conj().T, m, atol=1e-12)


def test_eig_general_triangular(rng):
    t = np.triu(_rand(rng, 5, 5))
    got = np.sort_complex(eig_general(t).eigenvalues)
    assert np.allclose(got, np.sort_complex(np.diag(t)), atol=1e-12)


def test_eig_general_aklt_transfer():
    vals = np.sort_complex(eig_general(aklt_transfer_matrix()).eigenvalues)
    assert np.allclose(vals, np.sort_complex(np.array([1, -1 / 3, -1 / 3, -1 / 3], complex)), atol=1e-10)


def test_eig_general_determinant_residual(rng):
    a = _rand(rng, 4, 4)
    res = eig_general(a)
    for lam in res.eigenvalues:
        assert abs(np.linalg.det(a - lam * np.eye(4))) < 1e-8
    assert np.max(res.residuals(a)) < 1e-10


def test_group_eigenvalues():
    groups = group_eigenvalues([1.0, -1 / 3, -1 / 3 + 1e-12, 1 / 3])
    assert sorted(m for _, m in groups) == [1, 1, 2]


# entropy


def test_entropy_cases():
    assert von_neumann_entropy(np.diag([1.0, 0.0])) == pytest.approx(0.0, abs=1e-12)
    assert von_neumann_entropy(np.eye(4) / 4) == pytest.approx(2.0)
    assert von_neumann_entropy(np.diag([0.75, 0.25])) == pytest.approx(2 - 0.75 * np.log2(3), abs=1e-12)
    assert von_neumann_entropy(np.diag([0.75, 0.25])) == pytest.approx(0.811278, abs=1e-6)


# validation helpers


def test_check_density_messages():
    with pytest.raises(ValidationError, match="tol_trace"):
        check_density(np.diag([0.5, 0.4]))
    with pytest.raises(ValidationError, match="negative"):
        check_density(np.diag([1.5, -0.5]))
    with pytest.raises(ValidationError, match="unitary"):
        check_unitary(np.diag([1.0, 2.0]))


# vectorization and superoperators


def test_vectorization_row_major(rng):
    m = _rand(rng, 3, 3)
    assert np.array_equal(vectorize(m), m.reshape(-1))
    assert np.array_equal(devectorize(vectorize(m)), m)


def test_superop_from_kraus_cases(rng):
    assert np.allclose(superop_from_kraus([np.eye(2)]).matrix, np.eye(4))
    flip = superop_from_kraus([SIGMA_X])
    assert np.allclose(flip(np.diag([1.0, 0.0])), np.diag([0.0, 1.0]))
    kraus = [_rand(rng, 2, 2), _rand(rng, 2, 2)]
    sup = superop_from_kraus(kraus)
    for _ in range(10):
        rho = random_density(2, rng)
        direct = sum(k @ rho @ k.conj().T for k in kraus)
        assert np.allclose(sup(rho), direct, atol=1e-12)


def test_superoperator_algebra(rng):
    a, b = _rand(rng, 2, 2), _rand(rng, 2, 2)
    sa = Superoperator.sandwich(a, a.conj().T)
    sb = Superoperator.from_function(lambda r: b @ r, 2)
    rho = random_density(2, rng)
    assert np.allclose((sa @ sb)(rho), a @ (b @ rho) @ a.conj().T)
    assert np.allclose((sa + sb)(rho) - (sa - sb)(rho), 2 * b @ rho)
    assert np.allclose((sa * 2.0)(rho), 2 * a @ rho @ a.conj().T)
    assert Superoperator.zero(2).norm() == 0.0
    assert np.allclose(Superoperator.identity(3).matrix, np.eye(9))


# compiled core against the fallback


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_kraus_apply_backends_agree(n_ops, dim, seed):
    rng = np.random.default_rng(seed)
    kraus, rho = _rand(rng, n_ops, dim, dim), random_density(dim, rng)
    ref = sum(k @ rho @ k.conj().T for k in kraus)
    assert np.allclose(_core.fallback.kraus_apply(kraus, rho), ref, atol=1e-12)
    if _core.compiled is not None:
        assert np.allclose(_core.compiled.kraus_apply(kraus, rho), ref, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 12), st.integers(0, 2**32 - 1))
def test_hessenberg_schur_backends_agree(n, seed):
    rng = np.random.default_rng(seed)
    a = _rand(rng, n, n)
    h, q = hessenberg(a)
    assert np.allclose(q @ h @ q.conj().T, a, atol=1e-12)
    ref = np.linalg.eigvals(a)
    impls = [_core.fallback] + ([_core.compiled] if _core.compiled is not None else [])
    for impl in impls:
        t, z, _ = impl.hessenberg_schur(h, q)
        assert np.allclose(z @ np.triu(t) @ z.conj().T, a, atol=1e-10)
        got = np.diag(t)
        assert np.max(np.min(np.abs(got[:, None] - ref[None, :]), axis=1)) < 1e-9
        assert np.max(np.min(np.abs(ref[:, None] - got[None, :]), axis=1)) < 1e-9


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 5), st.integers(0, 2**32 - 1))
def test_unitary_channel_preserves_trace(dim, seed):
    rng = np.random.default_rng(seed)
    u = random_unitary(dim, rng)
    rho = random_density(dim, rng)
    out = superop_from_kraus([u])(rho)
    assert abs(np.trace(out) - 1) < 1e-12
    check_density(out)
