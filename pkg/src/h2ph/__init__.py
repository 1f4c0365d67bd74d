"""Port-Hamiltonian modeling, simulation and passivity analysis of
sector-coupled hydrogen networks."""

from .phblock import (
    DimensionError,
    PhBlock,
    PowerTerms,
    QuadraticForm,
    StructureReport,
    finite_difference_gradient,
    finite_difference_jacobian,
    quadratic_block,
    validate_structure,
)
from .components import (
    CompressorParams,
    DeviceKind,
    NernstConditions,
    PipeParams,
    SectorDeviceParams,
    StorageParams,
    junction_capacity,
    make_compressor,
    make_junction,
    make_pipe,
    make_sector_device,
    make_storage,
    nernst_open_circuit,
    weymouth_mean_pressure,
)
from .topology import (
    EdgeDecl,
    EdgeKind,
    NetworkConstants,
    NetworkTopology,
    NodeDecl,
    NodeKind,
    SectorDeviceDecl,
    build_incidence,
    validate_topology,
)
from .assembly import (
    AttachedDevice,
    GridSystem,
    build_coupled,
    build_grid,
    couple_sector,
    interconnect_grid,
    stack_edges,
    stack_nodes,
)
from .sim import (
    InputSeries,
    IntegrationError,
    Scenario,
    Trajectory,
    integrate_implicit_midpoint,
    integrate_rk4,
    run_scenario,
)
from .analysis import (
    PassivityReport,
    SteadyStateResult,
    export_matrices,
    load_exported,
    passivity_audit,
    reconstruct_rhs,
    steady_state,
)
from .netio import (
    NetworkFileError,
    ScenarioFileError,
    parse_network,
    parse_scenario,
    serialize_network,
    write_results,
)

__version__ = "0.1.0"
