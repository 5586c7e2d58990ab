"""Validation harness: engine results against closed forms and dense references."""
from __future__ import annotations

import dataclasses
import json
import time
from typing import Callable

import numpy as np

from . import closed_forms as cf
from . import oracles
from .env import (
    CollisionScenario,
    EnvironmentMPDO,
    correlation_spectrum,
    evolve,
    reduced_site_density,
    reduced_two_site_density,
    transfer_matrix,
)
from .kernel import (
    exact_kernel_term,
    integrate_generator,
    kernel_order2,
    nz_trajectory,
    perturbative_order_check,
    two_point_cumulant,
    stroboscopic_generator,
)
from .mpdo import build_standard_mpdo, check_right_normalization_mpdo, contract_density
from .mps import amplitude, build_standard_mps, check_right_normalization, contract_statevector
from .numkernel import matrix_exp_skew
from .operators import DOWN, UP, bloch_vector, energy_exchange_generator
from .presets import PRESETS, gibbs_state, get_preset


@dataclasses.dataclass
class Check:
    name: str
    passed: bool
    value: float
    tol: float
    detail: str = ""
    # a published expression known to be wrong; reported, not counted
    known_defect: bool = False

    @property
    def ok(self) -> bool:
        return self.passed or self.known_defect

    def as_dict(self):
        out = dataclasses.asdict(self)
        if not np.isfinite(out["value"]):
            out["value"] = None
        return out


def _le(name, value, tol, detail=""):
    value = float(value)
    return Check(name, bool(value <= tol), value, tol, detail)


def _err(a, b):
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b)), initial=0.0))


# --- individual selectors ---------------------------------------------------


def check_example1():
    out = []
    u_gen = energy_exchange_generator()
    for gt in (0.3, np.pi / 4):
        n = 6
        chain = build_standard_mps(matrix_exp_skew(u_gen, gt), np.eye(2)[UP], [np.eye(2)[DOWN]] * n)
        worst = 0.0
        for j in range(1, n + 1):
            idx = [DOWN] * n + [DOWN]
            idx[j - 1] = UP
            worst = max(worst, abs(amplitude(chain, idx) - cf.wchain_amplitude(gt, n, j)))
        worst = max(worst, abs(amplitude(chain, [DOWN] * n + [UP]) - cf.wchain_amplitude(gt, n, None)))
        two_up = abs(amplitude(chain, [UP, DOWN, UP] + [DOWN] * (n - 2)))
        out.append(_le(f"example1 amplitudes gtau={gt:.4g}", max(worst, two_up), 1e-12))
        printed = cf.wchain_site_matrices(gt)
        site_err = max(
            _err(chain.sites[0][i], printed[("first", i)])
            + _err(chain.sites[2][i], printed[("bulk", i)])
            + _err(chain.sites[-1][i], printed[("last", i)])
            for i in (0, 1)
        )
        out.append(_le(f"example1 site tensors gtau={gt:.4g}", site_err, 1e-12))
    return out


def check_example2():
    gt, delta = 0.3, 1.0
    u = matrix_exp_skew(energy_exchange_generator(), gt)
    chain = build_standard_mpdo(u, np.diag([0.0, 1.0]), [gibbs_state(delta)] * 3)
    printed = cf.gibbs_site_matrices(gt, delta)
    worst = 0.0
    for (where, i, b), mat in printed.items():
        site = {"first": chain.sites[0], "bulk": chain.sites[1], "last": chain.sites[-1]}[where]
        got = site[i, b - 1] if b - 1 < site.shape[1] else np.zeros_like(mat)
        worst = max(worst, _err(got, mat))
    dense = oracles.collide_mixed(u, np.diag([0.0, 1.0]), [gibbs_state(delta)] * 3)
    return [
        _le("example2 printed B-tensors", worst, 1e-12),
        _le("example2 dense contraction", _err(contract_density(chain), dense), 1e-12),
    ]


def check_example3():
    out = []
    for gt in (0.2, 1.0):
        sc = get_preset("ghz-qutrit").scenario(g_tau=gt, steps=50)
        r0 = bloch_vector(sc.rho_s0)
        b = evolve(sc).bloch()
        lam = np.array([cf.ghz_lambda(k, gt) for k in range(51)])
        lamz = np.array([cf.ghz_lambda_z(k, gt) for k in range(51)])
        expected = np.stack([lam * r0[0], lam * r0[1], lamz * r0[2]], axis=1)
        out.append(_le(f"example3 lambda(k), lambda_z(k) gtau={gt}", _err(b, expected), 1e-10))
        if gt == 0.2:
            mags = np.abs(b[:, 0] / r0[0])
            increases = int(np.sum(np.diff(mags) > 1e-12))
            out.append(Check("example3 |lambda(k)| has increase events", increases > 0, increases, 1, ""))
    corr = correlation_spectrum(get_preset("ghz-qutrit").build_env())
    out.append(
        Check("example3 GHZ unit eigenvalue degenerate", corr.unit_multiplicity > 1, corr.unit_multiplicity, 2)
    )
    return out


def check_example4():
    gt = 0.7
    sc = get_preset("ghz-controlled").scenario(g_tau=gt)
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(3):
        rho = oracles.random_density(2, rng)
        for k in range(1, 4):
            for m in range(1, k + 1):
                worst = max(worst, _err(exact_kernel_term(sc, k, m)(rho), cf.ghz_controlled_kernel(rho, gt, m)))
    norms = [exact_kernel_term(sc, m, m).norm() for m in range(1, 7)]
    weights = [np.abs(two_point_cumulant(sc.env, m).table).max() for m in range(1, 21)]
    return [
        _le("example4 kernel vs printed sum", worst, 1e-11),
        _le("example4 memory weights constant in m (m <= 20)", max(weights) - min(weights), 1e-12),
        Check(
            "example4 kernel norm not monotonically decreasing (m <= 6)",
            bool(np.any(np.diff(norms) > 0)),
            float(np.max(np.diff(norms))),
            0.0,
            "norms " + ", ".join(f"{x:.4g}" for x in norms),
        ),
    ]


def _dissipator_matrix(jump):
    eye = np.eye(jump.shape[0])
    jd = jump.conj().T @ jump
    return np.kron(jump, jump.conj()) - 0.5 * np.kron(jd, eye) - 0.5 * np.kron(eye, jd.T)


def check_example5(literal_two_site: bool = True):
    out = []
    env = get_preset("aklt-projective").build_env()
    spec = correlation_spectrum(env)
    out.append(_le("example5 transfer matrix", _err(transfer_matrix(env), cf.aklt_transfer_matrix()), 1e-10))
    out.append(
        _le(
            "example5 transfer spectrum",
            _err(np.sort_complex(spec.eigenvalues), np.sort_complex(np.array(cf.AKLT_TRANSFER_SPECTRUM, complex))),
            1e-10,
        )
    )
    out.append(_le("example5 single-site state", _err(reduced_site_density(env, 1), np.eye(3) / 3), 1e-12))
    corrected = max(_err(reduced_two_site_density(env, 1, 1 + m), cf.aklt_two_site_corrected(m)) for m in range(1, 7))
    out.append(_le("example5 two-site state (sign/normalization corrected form)", corrected, 1e-10))
    if literal_two_site:
        printed = max(_err(reduced_two_site_density(env, 1, 1 + m), cf.aklt_two_site_printed(m)) for m in range(1, 7))
        check = _le("example5 two-site state (literal printed form)", printed, 1e-10, "printed form is not PSD")
        out.append(dataclasses.replace(check, known_defect=True))
    sc = get_preset("aklt-projective").scenario(g_tau=0.1, steps=200)
    gen = stroboscopic_generator(sc)
    rate = sc.g**2 * sc.tau
    ref = rate / 3 * sum(_dissipator_matrix(s) for s in cf.PAULIS)
    ref = ref - rate / 3 * _dissipator_matrix(cf.AKLT_NONLOCAL_JUMP)
    out.append(_le("example5 stroboscopic generator", _err(gen.effective.matrix, ref), 1e-10))
    out.append(Check("example5 Kossakowski matrix PSD", gen.kossakowski().psd, float(gen.kossakowski().rates.min()), 0))
    exact = evolve(sc).bloch()
    grid = sc.tau * np.arange(sc.steps + 1)
    strobo = integrate_generator(gen, sc.rho_s0, grid).bloch()
    local = integrate_generator(gen.local, sc.rho_s0, grid).bloch()
    out.append(_le("example5 stroboscopic vs exact (200 collisions)", _err(strobo, exact), 2e-2))
    sep = _err(local, exact)
    out.append(Check("example5 local-only trajectory departs from exact", sep > 5e-2, sep, 5e-2))
    return out


def q_decay_rate(g_tau: float, steps: int = 400, skip: int = 20) -> float:
    """Fitted exponential decay rate (per unit time) of the depolarization factor."""
    sc = get_preset("aklt-heisenberg").scenario(g_tau=g_tau, steps=steps)
    b = evolve(sc).bloch()
    q = b[:, 2] / bloch_vector(sc.rho_s0)[2]
    k = np.arange(skip, steps + 1)
    slope = np.polyfit(k * sc.tau, np.log(q[skip:]), 1)[0]
    return float(-slope)


def check_example6():
    out = []
    for gt in (0.4, 2 * np.pi / 3, 4 * np.pi / 3):
        sc = get_preset("aklt-heisenberg").scenario(g_tau=gt, steps=50)
        b = evolve(sc).bloch()
        r0 = bloch_vector(sc.rho_s0)
        q = np.array([cf.aklt_depolarization(k, gt) for k in range(51)])
        out.append(_le(f"example6 q(t) gtau={gt:.4g}", _err(b, q[:, None] * r0[None, :]), 1e-10))
        step = (b[2] - b[1])[2] / r0[2]
        out.append(_le(f"example6 q(2tau)-q(tau) gtau={gt:.4g}", abs(step - cf.aklt_depolarization_step(gt)), 1e-10))
    gen = stroboscopic_generator(get_preset("aklt-heisenberg").scenario(g_tau=0.1))
    out.append(_le("example6 first-order generator vanishes", gen.effective.norm(), 1e-10))
    gt = 0.02
    fitted = q_decay_rate(gt)
    expected = cf.aklt_weak_coupling_rate(gt, 1.0)
    out.append(_le("example6 weak-coupling decay rate", abs(fitted - expected) / expected, 0.05))
    return out


def _random_scenario(rng, d, n, pure):
    u = oracles.random_unitary(2 * d, rng)
    if pure:
        rho_s = oracles.random_state_vector(2, rng)
        ancillas = [oracles.random_state_vector(d, rng) for _ in range(n)]
    else:
        rho_s = oracles.random_density(2, rng)
        ancillas = [oracles.random_density(d, rng) for _ in range(n)]
    return u, rho_s, ancillas


def check_dense(trials: int = 100, seed: int = 2024):
    rng = np.random.default_rng(seed)
    worst_mps = worst_mpdo = worst_env = 0.0
    for t in range(trials):
        d = int(rng.choice([2, 3]))
        n = int(rng.integers(1, 6))
        pure = bool(t % 2)
        u, s, anc = _random_scenario(rng, d, n, pure)
        if pure:
            built = contract_statevector(build_standard_mps(u, s, anc))
            worst_mps = max(worst_mps, _err(built, oracles.collide_pure(u, s, anc)))
            rho_s = np.outer(s, s.conj())
            rhos = [np.outer(a, a.conj()) for a in anc]
        else:
            rho_s, rhos = s, anc
        built = contract_density(build_standard_mpdo(u, rho_s, rhos))
        worst_mpdo = max(worst_mpdo, _err(built, oracles.collide_mixed(u, rho_s, rhos)))
        bond = int(rng.integers(1, 3))
        tensor = oracles.random_right_canonical(d, int(rng.integers(1, 3)), bond, rng)
        chi0 = oracles.random_density(bond, rng)
        env = EnvironmentMPDO(chi0, tensor)
        sc = CollisionScenario(2, d, 1.0, 1.0, rho_s, env, n, unitary=u)
        ref = oracles.correlated_trajectory(u, rho_s, oracles.environment_state(chi0, tensor, n), d, n)
        worst_env = max(worst_env, max(_err(a, b) for a, b in zip(evolve(sc).states, ref)))
    return [
        _le("dense MPS contraction", worst_mps, 1e-11),
        _le("dense MPDO contraction", worst_mpdo, 1e-11),
        _le("dense correlated evolution", worst_env, 1e-11),
    ]


def check_rightnorm(trials: int = 1000, seed: int = 7):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for t in range(trials):
        d = int(rng.choice([2, 3]))
        d_s = int(rng.choice([2, 3]))
        n = int(rng.integers(1, 5))
        u = oracles.random_unitary(d_s * d, rng)
        if t % 2:
            phi = oracles.random_state_vector(d_s, rng)
            chain = build_standard_mps(u, phi, [oracles.random_state_vector(d, rng) for _ in range(n)])
            worst = max(worst, check_right_normalization(chain).worst)
        else:
            rank = int(rng.integers(1, d + 1))
            chain = build_standard_mpdo(
                u, oracles.random_density(d_s, rng), [oracles.random_density(d, rng, rank) for _ in range(n)]
            )
            worst = max(worst, check_right_normalization_mpdo(chain).worst)
    return [_le(f"right normalization over {trials} chains", worst, 1e-12)]


def check_nz(k_max: int = 8):
    out = []
    for name, preset in PRESETS.items():
        sc = preset.scenario(steps=k_max + 1)
        rebuilt = nz_trajectory(sc, k_max + 1).states
        exact = evolve(sc).states
        out.append(_le(f"NZ recursion vs evolve: {name}", max(_err(a, b) for a, b in zip(rebuilt, exact)), 1e-10))
    return out


def check_perturbative():
    out = []
    for name, preset in PRESETS.items():
        sc = preset.scenario(steps=6)
        worst_slope, zero = None, 0.0
        for m in (1, 2, 3):
            rep = perturbative_order_check(sc, m, m)
            zero = max(zero, rep.zeroth_order_norm)
            if rep.exponent is not None:
                worst_slope = rep.exponent if worst_slope is None else min(worst_slope, rep.exponent)
        slope_ok = worst_slope is None or worst_slope >= 1.9
        out.append(
            Check(
                f"order audit {name}: K0 = K1 = 0",
                bool(slope_ok and zero < 1e-12),
                worst_slope if worst_slope is not None else float("nan"),
                1.9,
                "identically zero" if worst_slope is None else "",
            )
        )
    for name in ("aklt-projective", "aklt-heisenberg", "ghz-qutrit"):
        sc = get_preset(name).scenario(g_tau=5e-3, steps=4)
        g2t = sc.g**2 * sc.tau
        worst = 0.0
        for m in (1, 2, 3):
            exact = exact_kernel_term(sc, m, m).matrix / g2t
            pred = kernel_order2(sc, m).matrix
            worst = max(worst, float(np.linalg.norm(exact - pred) / np.linalg.norm(pred)))
        out.append(_le(f"kernel_order2 vs finite difference at gtau=5e-3: {name}", worst, 0.02))
    return out


SELECTORS: dict[str, Callable[[], list]] = {
    "example1": check_example1,
    "example2": check_example2,
    "example3": check_example3,
    "example4": check_example4,
    "example5": check_example5,
    "example6": check_example6,
    "dense": check_dense,
    "rightnorm": check_rightnorm,
    "nz": check_nz,
    "perturbative": check_perturbative,
}


def run(selectors=None) -> dict:
    """Run the named selectors (all when ``None``) and return a JSON-ready report."""
    names = list(SELECTORS) if not selectors or "all" in selectors else list(selectors)
    unknown = [n for n in names if n not in SELECTORS]
    if unknown:
        raise KeyError(f"unknown selector(s): {', '.join(unknown)}")
    groups = []
    for name in names:
        start = time.perf_counter()
        checks = SELECTORS[name]()
        groups.append(
            {
                "selector": name,
                "seconds": round(time.perf_counter() - start, 3),
                "passed": all(c.ok for c in checks),
                "checks": [c.as_dict() for c in checks],
            }
        )
    return {"passed": all(g["passed"] for g in groups), "groups": groups}


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2, allow_nan=False)
