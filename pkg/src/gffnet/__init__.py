"""Random walks and resistor networks in a log-correlated Gaussian environment.

Modules
-------
field       white-noise approximation of the Gaussian free field on lattice boxes
network     resistor networks, planar duals and annulus views
resistance  two-terminal solves, flows, Green functions and hitting probabilities
maxflow     max-flow / min-cut with real capacities
walk        conductance-weighted random walks and exit statistics
measure     LQG-type vertex measures
harness     seeded experiments, reports and the command-line interface
"""
from .field import (
    FieldError,
    FieldSample,
    GridSpec,
    KernelSpec,
    SynthesisResourceError,
    analytic_covariance,
    load_sample,
    oscillation,
    sample_field,
    save_sample,
)
from .measure import MeasureReport, eta_measure, pi_measure
from .network import (
    AnnulusView,
    AroundView,
    Network,
    NetworkError,
    ShapeError,
    Terminals,
    annulus_views,
    around_dual,
    build_network,
    contract,
    dual_network,
    read_edgelist,
    rectangle_network,
    write_edgelist,
)
from .resistance import (
    ConnectivityError,
    SolveResult,
    SolverError,
    WeightedPathSet,
    around_resistance,
    current_through_set,
    dirichlet_energy,
    effective_resistance,
    green_function,
    hitting_probability,
    max_flow_min_cut,
    path_decomposition,
    resdif_gap,
    solve_two_terminal,
)
from .walk import (
    ExitRecord,
    RescaledPath,
    Walker,
    WalkStream,
    chi,
    cmp_distance,
    exact_exit_expectation,
    exit_measure,
    harmonic_measure,
    rescaled_path,
    simulate_until_exit,
    step_distribution,
)

__version__ = "0.1.0"
