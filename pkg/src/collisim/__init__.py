"""Quantum collision models as matrix product states and operators."""
from ._core import BACKEND
from .env import (
    CollisionScenario,
    CorrelationSpectrum,
    EnvironmentMPDO,
    Trajectory,
    chi_sequence,
    correlation_spectrum,
    evolve,
    reduced_site_density,
    reduced_two_site_density,
    stationary_bond_state,
    transfer_matrix,
)
from .errors import (
    CapExceededError,
    CollisimError,
    ConvergenceError,
    DimensionError,
    HypothesisError,
    InfiniteCorrelationLengthError,
    IntegrationError,
    ScenarioParseError,
    ValidationError,
)
from .kernel import (
    exact_kernel_term,
    integrate_generator,
    kernel_order2,
    kernel_order3,
    kossakowski,
    local_generator,
    nz_reconstruct,
    nz_trajectory,
    perturbative_order_check,
    stroboscopic_generator,
    three_point_cumulant,
    two_point_cumulant,
)
from .mpdo import MPDOChain, build_standard_mpdo, contract_density
from .mps import MPSChain, build_standard_mps, contract_statevector, entanglement_entropy_cut
from .numkernel import Superoperator
from .presets import PRESETS, get_preset
from .scenario_io import dump_scenario, load_scenario, save_scenario

__version__ = "0.1.0"
