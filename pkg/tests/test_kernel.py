import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from collisim import closed_forms as cf
from collisim import oracles
from collisim.env import CollisionScenario, EnvironmentMPDO, evolve, reduced_two_site_density
from collisim.errors import HypothesisError, InfiniteCorrelationLengthError, ValidationError
from collisim.kernel import (
    exact_kernel_term,
    integrate_generator,
    kernel_order2,
    kernel_order3,
    kossakowski,
    local_generator,
    nz_reconstruct,
    nz_trajectory,
    perturbative_order_check,
    project_P,
    project_Q,
    stroboscopic_generator,
    three_point_cumulant,
    two_point_cumulant,
)
from collisim.numkernel import Superoperator
from collisim.operators import PAULI, SIGMA_X, SIGMA_Z, bloch_vector, from_bloch
from collisim.presets import PRESETS, aklt_environment, get_preset, ghz_environment


def dissipator(jump):
    eye = np.eye(jump.shape[0])
    jd = jump.conj().T @ jump
    return Superoperator(np.kron(jump, jump.conj()) - 0.5 * np.kron(jd, eye) - 0.5 * np.kron(eye, jd.T), 2, 2)


def factorized_scenario(rng, steps=6):
    env = EnvironmentMPDO.factorized(oracles.random_density(3, rng))
    base = get_preset("aklt-heisenberg").scenario(steps=steps)
    return base.replace(env=env)


# projections


def test_projections(rng):
    chi = oracles.random_density(2, rng)
    rho = oracles.random_density(2, rng)
    prod = np.kron(rho, chi)
    assert np.allclose(project_P(prod, chi), prod, atol=1e-15)
    assert np.allclose(project_Q(prod, chi), 0, atol=1e-15)
    joint = oracles.random_density(4, rng)
    once = project_P(joint, chi)
    assert np.allclose(project_P(once, chi), once, atol=1e-12)
    q = project_Q(joint, chi)
    assert np.allclose(np.einsum("aibi->ab", q.reshape(2, 2, 2, 2)), 0, atol=1e-15)


# exact kernel


def test_factorized_kernel_vanishes(rng):
    sc = factorized_scenario(rng)
    for k in range(1, 5):
        for m in range(1, k + 1):
            assert exact_kernel_term(sc, k, m).norm() < 1e-13


def test_identity_collision_local_term_vanishes():
    sc = get_preset("aklt-projective").scenario().replace(g=0.0)
    assert exact_kernel_term(sc, 3, 0).norm() < 1e-15


def test_ghz_controlled_kernel_matches_printed_sum(rng):
    gt = 0.7
    sc = get_preset("ghz-controlled").scenario(g_tau=gt)
    for _ in range(3):
        rho = oracles.random_density(2, rng)
        for k in range(1, 4):
            for m in range(1, k + 1):
                assert np.max(np.abs(exact_kernel_term(sc, k, m)(rho) - cf.ghz_controlled_kernel(rho, gt, m))) < 1e-11


def test_nz_first_step_is_local_term():
    sc = get_preset("aklt-projective").scenario(steps=3)
    rho0 = sc.rho_s0
    expected = rho0 + sc.tau * exact_kernel_term(sc, 0, 0)(rho0)
    assert np.allclose(nz_reconstruct(sc, 0), expected, atol=1e-15)


@pytest.mark.parametrize("name", ["ghz-qutrit", "aklt-projective", "aklt-heisenberg"])
def test_nz_reconstruct_matches_evolve(name):
    sc = get_preset(name).scenario(steps=6)
    exact = evolve(sc).states
    for k in range(5):
        assert np.max(np.abs(nz_reconstruct(sc, k) - exact[k + 1])) < 1e-10


def test_nz_trajectory_random_env(rng):
    tensor = oracles.random_right_canonical(2, 2, 2, rng)
    env = EnvironmentMPDO(oracles.random_density(2, rng), tensor)
    u = oracles.random_unitary(4, rng)
    sc = CollisionScenario(2, 2, 1.0, 1.0, oracles.random_density(2, rng), env, 6, unitary=u)
    for a, b in zip(nz_trajectory(sc).states, evolve(sc).states):
        assert np.max(np.abs(a - b)) < 1e-10


# cumulants


def test_factorized_cumulants_vanish(rng):
    env = EnvironmentMPDO.factorized(oracles.random_density(3, rng))
    assert np.max(np.abs(two_point_cumulant(env, 2).table)) < 1e-15
    assert np.max(np.abs(three_point_cumulant(env, 1, 3).table)) < 1e-15


def _pair_table(rho12, rho_a, rho_b, d):
    joint = rho12.reshape(d, d, d, d).transpose(0, 2, 1, 3)
    return joint - np.einsum("ab,cd->abcd", rho_a, rho_b)


def test_aklt_two_point_cumulant():
    env = aklt_environment()
    spin = sum(np.kron(j, j) for j in cf.SPINS)
    for m in range(1, 6):
        expected = _pair_table((1 / 3) * (-1 / 3) ** m * spin, np.zeros((3, 3)), np.zeros((3, 3)), 3)
        assert np.allclose(two_point_cumulant(env, m).table, expected, atol=1e-14)


def test_ghz_two_point_cumulant_constant():
    env = ghz_environment()
    eye = np.eye(3)
    expected = (1 / 3) * np.einsum("ab,cd,ac->abcd", eye, eye, eye) - np.einsum("ab,cd->abcd", eye, eye) / 9
    for m in (1, 2, 5, 11):
        assert np.allclose(two_point_cumulant(env, m).table, expected, atol=1e-15)


def test_cumulant_tables_match_dense_states(rng):
    tensor = oracles.random_right_canonical(2, 2, 2, rng)
    env = EnvironmentMPDO(oracles.random_density(2, rng), tensor)
    n = 5
    dense = oracles.environment_state(env.chi0, tensor, n)
    one = [oracles.reduce(dense, [2] * n, [k]) for k in range(n)]

    pair = oracles.reduce(dense, [2] * n, [1, 3])
    assert np.allclose(two_point_cumulant(env, 2, start=2).table, _pair_table(pair, one[1], one[3], 2), atol=1e-13)

    # sites 1, 2, 4 (start=1, l=1, m=3)
    trip = oracles.reduce(dense, [2] * n, [0, 1, 3]).reshape([2] * 6).transpose(0, 3, 1, 4, 2, 5)
    p12 = oracles.reduce(dense, [2] * n, [0, 1]).reshape(2, 2, 2, 2).transpose(0, 2, 1, 3)
    p24 = oracles.reduce(dense, [2] * n, [1, 3]).reshape(2, 2, 2, 2).transpose(0, 2, 1, 3)
    expected = (
        trip
        - np.einsum("abcd,ef->abcdef", p12, one[3])
        - np.einsum("ab,cdef->abcdef", one[0], p24)
        + np.einsum("ab,cd,ef->abcdef", one[0], one[1], one[3])
    )
    got = three_point_cumulant(env, 1, 3).table
    assert np.allclose(got, expected, atol=1e-13)


def test_aklt_cumulant_decay_rate():
    env = aklt_environment()
    c1 = np.max(np.abs(two_point_cumulant(env, 1).table))
    for m in range(1, 12):
        assert np.max(np.abs(two_point_cumulant(env, m).table)) <= 3 * c1 * (1 / 3) ** (m - 1) + 1e-15


def test_cumulant_argument_checks():
    with pytest.raises(ValidationError):
        two_point_cumulant(aklt_environment(), 0)
    with pytest.raises(ValidationError):
        three_point_cumulant(aklt_environment(), 2, 2)


# perturbative kernels


def test_factorized_perturbative_kernels_vanish(rng):
    sc = factorized_scenario(rng)
    assert kernel_order2(sc, 2).norm() < 1e-15
    assert kernel_order3(sc, 2).norm() < 1e-15
    report = perturbative_order_check(sc, 3, 2)
    assert report.identically_zero and report.passed


@pytest.mark.parametrize("name,ms", [("aklt-projective", (1, 2, 3, 4)), ("ghz-qutrit", (1,))])
def test_order_exponent_is_two(name, ms):
    sc = get_preset(name).scenario(steps=6)
    for m in ms:
        report = perturbative_order_check(sc, m, m)
        assert report.zeroth_order_norm < 1e-12
        assert report.exponent == pytest.approx(2.0, abs=0.05)
        assert report.passed


@pytest.mark.parametrize("name", ["aklt-projective", "ghz-qutrit", "aklt-heisenberg", "ghz-controlled"])
def test_order2_finite_difference_convergence(name):
    errs = []
    for gt in (1e-2, 5e-3, 2.5e-3):
        sc = get_preset(name).scenario(g_tau=gt, steps=4)
        exact = exact_kernel_term(sc, 2, 2).matrix / (sc.g**2 * sc.tau)
        errs.append(np.linalg.norm(exact - kernel_order2(sc, 2).matrix))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 0.99)


@pytest.mark.parametrize("name", ["aklt-projective", "ghz-controlled", "aklt-heisenberg"])
def test_order3_finite_difference_convergence(name):
    errs = []
    for gt in (1e-2, 5e-3):
        sc = get_preset(name).scenario(g_tau=gt, steps=4)
        g2, g3 = sc.g**2 * sc.tau, sc.g**3 * sc.tau**2
        rest = (exact_kernel_term(sc, 2, 2).matrix - g2 * kernel_order2(sc, 2).matrix) / g3
        errs.append(np.linalg.norm(rest - kernel_order3(sc, 2).matrix))
    assert errs[0] / errs[1] > 1.9


def test_aklt_summed_order2_kernel_is_nonlocal_dissipator():
    sc = get_preset("aklt-projective").scenario(steps=3)
    rate = sc.g**2 * sc.tau
    total = sum((kernel_order2(sc, m) for m in range(2, 60)), kernel_order2(sc, 1)) * rate
    expected = dissipator(cf.AKLT_NONLOCAL_JUMP) * (-rate / 3)
    assert np.allclose(total.matrix, expected.matrix, atol=1e-12)


# generators


def test_aklt_local_generator():
    sc = get_preset("aklt-projective").scenario()
    rate = sc.g**2 * sc.tau
    expected = sum((dissipator(s) for s in PAULI), Superoperator.zero(2)) * (rate / 3)
    got = local_generator(sc, drop_hamiltonian=True)
    assert np.allclose(got.matrix, expected.matrix, atol=1e-15)
    rho = from_bloch([0.3, -0.2, 0.5])
    assert np.allclose(got(rho), cf.aklt_local(rho, sc.g_tau), atol=1e-15)


def test_zero_mean_coupling_local_generator_is_dissipative():
    sc = get_preset("aklt-heisenberg").scenario()
    rep = kossakowski(local_generator(sc))
    assert np.max(np.abs(rep.hamiltonian)) < 1e-14
    assert rep.psd


def test_local_generator_zero_coupling():
    sc = get_preset("aklt-heisenberg").scenario().replace(g=0.0)
    assert local_generator(sc).norm() == 0.0


def test_local_generator_requires_commuting_mean():
    h = np.kron(SIGMA_Z, np.diag([1.0, 0.0]))
    env = EnvironmentMPDO.factorized(np.diag([1.0, 0.0]))
    sc = CollisionScenario(2, 2, 0.1, 1.0, from_bloch([1, 0, 0]), env, 3, hamiltonian=h)
    with pytest.raises(HypothesisError):
        local_generator(sc)
    assert local_generator(sc, drop_hamiltonian=True).norm() >= 0.0


def test_aklt_stroboscopic_generator():
    sc = get_preset("aklt-projective").scenario()
    gen = stroboscopic_generator(sc)
    rho = from_bloch([0.1, 0.4, -0.3])
    assert np.allclose(gen.effective(rho), cf.aklt_gksl(rho, sc.g_tau), atol=1e-15)
    rep = gen.kossakowski()
    assert rep.psd and rep.trace_annihilating and rep.hermiticity_preserving
    rate = sc.g**2 * sc.tau
    assert np.allclose(rep.rates, np.array([1 / 3, 1 / 3, 0]) * rate, atol=1e-14)
    nonlocal_rep = kossakowski(gen.nonlocal_part)
    big = np.abs(nonlocal_rep.rates) > 1e-12
    assert np.allclose(nonlocal_rep.rates[big], [-rate / 3])
    jump = nonlocal_rep.jumps[int(np.argmax(big))]
    assert np.allclose(dissipator(jump).matrix, dissipator(cf.AKLT_NONLOCAL_JUMP).matrix, atol=1e-12)
    assert gen.fit_residual < 1e-12 and gen.resummation_residual < 1e-12


def test_heisenberg_first_order_generator_vanishes():
    gen = stroboscopic_generator(get_preset("aklt-heisenberg").scenario())
    assert gen.effective.norm() < 1e-10
    assert gen.local.norm() > 1e-3


def test_factorized_generator_is_local():
    # maximally mixed ancillas keep <H>_anc = 0
    sc = get_preset("aklt-heisenberg").scenario().replace(env=EnvironmentMPDO.factorized(np.eye(3) / 3))
    gen = stroboscopic_generator(sc)
    assert np.allclose(gen.effective.matrix, gen.local.matrix, atol=1e-15)
    assert not gen.nonlocal_terms or all(abs(t.weight) < 1e-15 for t in gen.nonlocal_terms)


def test_ghz_generator_refused():
    with pytest.raises(InfiniteCorrelationLengthError):
        stroboscopic_generator(get_preset("ghz-qutrit").scenario())


def test_order_two_generator_runs():
    gen = stroboscopic_generator(get_preset("aklt-projective").scenario(), order=2)
    assert gen.third_order is not None
    assert gen.kossakowski().trace_annihilating


# integration


def test_zero_generator_constant(rng):
    rho = oracles.random_density(2, rng)
    traj = integrate_generator(Superoperator.zero(2), rho, np.linspace(0, 5, 6))
    assert all(np.allclose(s, rho) for s in traj.states)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.01, 2.0), st.floats(0.1, 3.0))
def test_integrated_decay_rates(gamma, t_end):
    rho = from_bloch([0.5, 0.3, 0.6])
    grid = np.linspace(0, t_end, 5)
    r0 = bloch_vector(rho)
    dephase = integrate_generator(dissipator(SIGMA_Z) * gamma, rho, grid).bloch()
    expected = np.outer(np.exp(-2 * gamma * grid), [1, 1, 0]) * r0 + np.outer(np.ones_like(grid), [0, 0, 1]) * r0
    assert np.max(np.abs(dephase - expected)) < 1e-8
    depol = sum((dissipator(s) for s in PAULI), Superoperator.zero(2)) * gamma
    got = integrate_generator(depol, rho, grid).bloch()
    assert np.max(np.abs(got - np.outer(np.exp(-4 * gamma * grid), r0))) < 1e-8


def test_fig10_separation():
    sc = get_preset("aklt-projective").scenario(g_tau=0.1, steps=200)
    gen = stroboscopic_generator(sc)
    exact = evolve(sc).bloch()
    grid = sc.tau * np.arange(sc.steps + 1)
    assert np.max(np.abs(integrate_generator(gen, sc.rho_s0, grid).bloch() - exact)) < 2e-2
    assert np.max(np.abs(integrate_generator(gen.local, sc.rho_s0, grid).bloch() - exact)) > 5e-2


def test_all_presets_have_second_order_kernels():
    for name, preset in PRESETS.items():
        sc = preset.scenario(steps=3)
        assert np.isfinite(kernel_order2(sc, 1).norm()), name
