//! Outage analysis of multi-hop relay chains where every transmitter
//! cooperates with its next `k` nodes and some relays switch between active
//! and silent modes.
//!
//! The pieces, bottom up: per-receiver outage of coherently combined Rayleigh
//! links ([`link`]), the network-state Markov chain ([`state`], [`markov`]),
//! system-level results ([`analysis`]), a slot-level simulator ([`sim`]) and
//! a power-split optimizer ([`optimize`]).

pub mod acceptance;
pub mod analysis;
pub mod config;
pub mod curve;
pub mod error;
pub mod experiment;
pub mod link;
pub mod markov;
pub mod optimize;
pub mod quadrature;
pub mod sim;
pub mod special;
pub mod state;
pub mod units;

pub use acceptance::{run_acceptance, AcceptanceOptions, AcceptanceReport, CriterionReport};
pub use analysis::{
    deployment_check, diversity_order, dmt, estimate_slope, multi_branch_dmt, multi_branch_outage, outage_floor,
    solve_system, system_outage, DmtCurve, FlowGraph, SystemSolution,
};
pub use config::{NetworkConfig, NetworkConfigBuilder, SplitTable};
pub use curve::{run_sweep, OutageCurve, OutageRecord, SweepOptions};
pub use error::{Error, Result};
pub use experiment::{Experiment, SplitsMode};
pub use link::{
    characteristic_function, conventional_benchmark, outage_gil_pelaez, outage_per_node, outage_saa,
    outage_single_link, LinkPattern, OutageCache, OutageMethod,
};
pub use markov::{
    build_matrix, stationary, stationary_with, transition_exists, transition_probability, ChainModel, OutageTable,
    Solver, StationaryDistribution, StationaryOptions, TransitionMatrix,
};
pub use optimize::{equal_splits, optimize_splits, OptimizerOptions, Parameterization, SplitSolution};
pub use sim::{occupancy_histogram, SimOptions, SimResult, SimState};
pub use state::{NetworkState, StateSpace};
pub use units::{db_to_linear, linear_to_db, power_from_db};
