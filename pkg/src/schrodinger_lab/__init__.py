"""Finite-state Schrödinger problems: entropic bridges on reversible Markov
chains, their interpolations, and the slowing-down limit to optimal transport."""

from .entropy import (
    Measure,
    additive_decomposition,
    as_probability,
    relative_entropy,
    total_variation,
    verify_variational_formula,
)
from .markov import (
    EndpointKernel,
    RateGraph,
    ReversibleChain,
    check_regenerative,
    endpoint_coupling,
    gaussian_grid_kernel,
    graph_distance,
    grid_diffusion_chain,
    random_reversible_chain,
    simple_random_walk,
    slow_down,
    transition_kernel,
)
from .schrodinger_system import (
    BridgePotentials,
    ConvergenceError,
    StaticSolution,
    blend_marginals,
    dual_value,
    solve,
    verify_schrodinger_system,
)
from .interpolation import (
    InterpolationPath,
    JumpField,
    action_value,
    build_path,
    entropy_convexity_check,
    gaussian_action_value,
    hjb_residual,
    jump_intensities,
    verify_disintegration,
    verify_markov_factorization,
)
from .transport import (
    GammaSweepReport,
    TransportProblem,
    entropic_midpoint_vs_displacement,
    gamma_sweep_gaussian,
    gamma_sweep_graph,
    mk_solve,
    monotone_coupling_1d,
)
from .particles import (
    ConditionalReport,
    SimulationConfig,
    condition_and_compare,
    simulate_walkers,
)

__version__ = "0.1.0"
