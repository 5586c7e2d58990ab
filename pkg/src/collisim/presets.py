"""Built-in scenarios and environments."""
from __future__ import annotations

import dataclasses
from typing import Callable

import numpy as np

from .env import CollisionScenario, EnvironmentMPDO, reduced_site_density
from .errors import ValidationError
from .kernel import mean_coupling
from .operators import DOWN, UP, GENERATORS, from_bloch, projector

# Bloch vector of the default initial state of the qubit presets
DEFAULT_BLOCH = np.ones(3) / np.sqrt(3)


def ghz_environment() -> EnvironmentMPDO:
    """Qutrit GHZ chain: ``B^i = |i><i|`` and an all-equal bond state."""
    tensor = np.zeros((3, 1, 3, 3), dtype=complex)
    for i in range(3):
        tensor[i, 0, i, i] = 1.0
    return EnvironmentMPDO(np.ones((3, 3)) / 3, tensor)


def aklt_environment() -> EnvironmentMPDO:
    """Spin-1 AKLT chain with bond dimension 2 and a maximally mixed bond state."""
    a = 1 / np.sqrt(3)
    b = np.sqrt(2 / 3)
    tensor = np.zeros((3, 1, 2, 2), dtype=complex)
    tensor[0, 0] = [[0, b], [0, 0]]
    tensor[1, 0] = [[-a, 0], [0, a]]
    tensor[2, 0] = [[0, 0], [-b, 0]]
    return EnvironmentMPDO(np.eye(2) / 2, tensor)


def gibbs_state(delta_over_kt: float = 1.0) -> np.ndarray:
    """Qubit Gibbs state with ``(E_up - E_down) / k_B T = delta_over_kt``."""
    p_down = 1 / (1 + np.exp(-delta_over_kt))
    rho = np.zeros((2, 2), dtype=complex)
    rho[DOWN, DOWN] = p_down
    rho[UP, UP] = 1 - p_down
    return rho


@dataclasses.dataclass(frozen=True)
class Preset:
    name: str
    description: str
    generator: str
    g_tau: float
    steps: int
    build_env: Callable[[], EnvironmentMPDO]
    initial_state: Callable[[], np.ndarray]
    d_s: int = 2
    d: int = 2

    def scenario(self, g_tau: float | None = None, steps: int | None = None, tau: float = 1.0) -> CollisionScenario:
        g_tau = self.g_tau if g_tau is None else g_tau
        return CollisionScenario(
            d_s=self.d_s,
            d=self.d,
            g=g_tau / tau,
            tau=tau,
            rho_s0=self.initial_state(),
            env=self.build_env(),
            steps=self.steps if steps is None else steps,
            hamiltonian=GENERATORS[self.generator](),
            name=self.name,
        )


PRESETS = {
    p.name: p
    for p in [
        Preset(
            "w-chain",
            "excited qubit, ground-state qubit ancillas, energy exchange (W-like output)",
            "energy-exchange",
            0.3,
            6,
            lambda: EnvironmentMPDO.factorized(projector(2, DOWN)),
            lambda: projector(2, UP),
        ),
        Preset(
            "gibbs-chain",
            "excited qubit, Gibbs-state qubit ancillas (dE/kT = 1), energy exchange",
            "energy-exchange",
            0.3,
            6,
            lambda: EnvironmentMPDO.factorized(gibbs_state()),
            lambda: projector(2, UP),
        ),
        Preset(
            "ghz-qutrit",
            "qubit coupled by (1/2) sum sigma_j J_j to a qutrit GHZ chain",
            "pauli-spin1",
            0.2,
            50,
            ghz_environment,
            lambda: from_bloch(DEFAULT_BLOCH),
            d=3,
        ),
        Preset(
            "ghz-controlled",
            "qubit rotated by sigma_j controlled on qutrit GHZ ancilla |j>",
            "pauli-projector",
            0.7,
            10,
            ghz_environment,
            lambda: from_bloch(DEFAULT_BLOCH),
            d=3,
        ),
        Preset(
            "aklt-projective",
            "qubit coupled by sum sigma_j |j><j| to an AKLT chain",
            "pauli-projector",
            0.1,
            200,
            aklt_environment,
            lambda: from_bloch(DEFAULT_BLOCH),
            d=3,
        ),
        Preset(
            "aklt-heisenberg",
            "qubit coupled by (1/2) sum sigma_j J_j to an AKLT chain",
            "pauli-spin1",
            0.4,
            50,
            aklt_environment,
            lambda: from_bloch(DEFAULT_BLOCH),
            d=3,
        ),
    ]
}


def get_preset(name: str) -> Preset:
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None


ENV_PRESETS = {"ghz": ghz_environment, "aklt": aklt_environment}


def check_preset_invariants(name: str, scenario: CollisionScenario) -> None:
    """Model-specific facts a preset must satisfy; raises ``ValidationError``."""
    if name == "aklt-heisenberg":
        rho1 = reduced_site_density(scenario.env, 1)
        mean = mean_coupling(scenario.hamiltonian, rho1, scenario.d_s, scenario.d)
        if np.max(np.abs(mean)) > 1e-10:
            raise ValidationError("aklt-heisenberg: <H>_anc should vanish")
    if name in ("aklt-projective", "aklt-heisenberg", "ghz-qutrit", "ghz-controlled"):
        rho1 = reduced_site_density(scenario.env, 1)
        if np.max(np.abs(rho1 - np.eye(3) / 3)) > 1e-10:
            raise ValidationError(f"{name}: single-ancilla state should be I/3")
