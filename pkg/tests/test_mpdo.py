import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from collisim import closed_forms as cf
from collisim import oracles
from collisim.mpdo import (
    MPDOChain,
    build_standard_mpdo,
    check_right_normalization_mpdo,
    contract_density,
    m_tensor,
    reduced_density_first_k_mpdo,
    spectral_terms,
)
from collisim.mps import build_standard_mps, contract_statevector
from collisim.numkernel import matrix_exp_skew, partial_trace
from collisim.operators import UP, energy_exchange_generator, projector
from collisim.presets import gibbs_state

GT, DELTA = 0.3, 1.0


def gibbs_chain(n, g_tau=GT, delta=DELTA):
    u = matrix_exp_skew(energy_exchange_generator(), g_tau)
    rho_s = projector(2, UP)
    rhos = [gibbs_state(delta)] * n
    return u, rho_s, rhos, build_standard_mpdo(u, rho_s, rhos)


def _printed_site(where, kraus):
    printed = cf.gibbs_site_matrices(GT, DELTA)
    return {(i, b): printed[(where, i, b)] for i in (0, 1) for b in range(1, kraus + 1)}


def test_gibbs_tensors_as_printed():
    _, _, _, chain = gibbs_chain(3)
    for where, site, kraus in (("first", chain.sites[0], 2), ("bulk", chain.sites[1], 2), ("last", chain.sites[-1], 1)):
        for (i, b), mat in _printed_site(where, kraus).items():
            assert np.allclose(site[i, b - 1], mat, atol=1e-14), (where, i, b)


def test_gibbs_m_tensor_matches_printed_assembly():
    _, _, _, chain = gibbs_chain(3)
    printed = _printed_site("bulk", 2)
    for i in (0, 1):
        for ip in (0, 1):
            expected = sum(np.kron(printed[(i, b)], printed[(ip, b)].conj()) for b in (1, 2))
            assert np.allclose(m_tensor(chain.sites[1], i, ip), expected, atol=1e-14)


def test_m_tensor_trace_identity():
    _, _, _, chain = gibbs_chain(3)
    site = chain.sites[1]
    dr = site.shape[3]
    total = sum(m_tensor(site, i, i) for i in range(site.shape[0]))
    # right-normalization: sum_i M^{ii} maps vec(I) on the right to vec(I) on the left
    assert np.allclose(total @ np.eye(dr).reshape(-1), np.eye(site.shape[2]).reshape(-1), atol=1e-14)


def test_m_tensor_pure_chain(rng):
    u = oracles.random_unitary(4, rng)
    phi = oracles.random_state_vector(2, rng)
    psis = [oracles.random_state_vector(2, rng) for _ in range(3)]
    pure = build_standard_mps(u, phi, psis)
    mixed = build_standard_mpdo(u, np.outer(phi, phi.conj()), [np.outer(p, p.conj()) for p in psis])
    assert mixed.kraus_counts == [1] * len(mixed)
    for a, b in zip(pure.sites, mixed.sites):
        for i in range(a.shape[0]):
            for ip in range(a.shape[0]):
                assert np.allclose(m_tensor(b, i, ip), np.kron(a[i], a[ip].conj()), atol=1e-13)
    psi = contract_statevector(pure)
    assert np.allclose(contract_density(mixed), np.outer(psi, psi.conj()), atol=1e-13)


def test_random_mixed_matches_dense(rng):
    u = oracles.random_unitary(4, rng)
    rho_s = oracles.random_density(2, rng)
    rhos = [oracles.random_density(2, rng) for _ in range(3)]
    chain = build_standard_mpdo(u, rho_s, rhos)
    assert np.max(np.abs(contract_density(chain) - oracles.collide_mixed(u, rho_s, rhos))) < 1e-12


def test_trace_audit(rng):
    for _ in range(50):
        d = int(rng.choice([2, 3]))
        n = int(rng.integers(1, 4))
        chain = build_standard_mpdo(
            oracles.random_unitary(2 * d, rng),
            oracles.random_density(2, rng),
            [oracles.random_density(d, rng, int(rng.integers(1, d + 1))) for _ in range(n)],
        )
        assert abs(np.trace(contract_density(chain)) - 1) < 1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 3), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_constructed_chains_are_right_normalized(d, n, seed):
    rng = np.random.default_rng(seed)
    chain = build_standard_mpdo(
        oracles.random_unitary(2 * d, rng),
        oracles.random_density(2, rng),
        [oracles.random_density(d, rng, int(rng.integers(1, d + 1))) for _ in range(n)],
    )
    assert check_right_normalization_mpdo(chain, tol=1e-12).passed


def test_normalization_failures_and_exact_terminal():
    _, _, _, chain = gibbs_chain(3)
    assert check_right_normalization_mpdo(chain).deviations[-1] == 0.0
    sites = list(chain.sites)
    broken = sites[1].copy()
    broken[:, 0] = 0.0
    sites[1] = broken
    report = check_right_normalization_mpdo(MPDOChain(tuple(sites)))
    assert not report.passed and report.failing_sites == [1]


def test_reduced_first_k(rng):
    n = 4
    u, rho_s, rhos, chain = gibbs_chain(n)
    assert np.allclose(reduced_density_first_k_mpdo(chain, n + 1), contract_density(chain), atol=1e-14)
    dense = oracles.collide_mixed(u, rho_s, rhos)
    expected = partial_trace(dense, [2] * (n + 1), [0, 1])
    assert np.max(np.abs(reduced_density_first_k_mpdo(chain, 2) - expected)) < 1e-12

    rhos = [oracles.random_density(3, rng) for _ in range(3)]
    free = build_standard_mpdo(np.eye(6), oracles.random_density(2, rng), rhos)
    assert np.allclose(reduced_density_first_k_mpdo(free, 2), np.kron(rhos[0], rhos[1]), atol=1e-14)


def test_spectral_terms_drop_zero_weights():
    lam, vec = spectral_terms(np.diag([0.25, 0.0, 0.75]))
    assert np.allclose(lam, [0.75, 0.25])
    assert vec.shape == (3, 2)
    with pytest.raises(ValueError):
        spectral_terms(np.diag([0.5, 0.4]))
