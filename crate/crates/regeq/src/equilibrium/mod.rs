//! Computation of the coordinated regression profile: the profile of
//! per-farm forecast models at which no producer can gain by a unilateral
//! model change under re-equilibrated market prices.
//!
//! The profile is the optimizer of one regularized cost-minimization QP
//! over all training samples; its constraint duals are the supporting
//! prices. The module also carries the verification apparatus: the scalar
//! potential whose gradient matches the stacked player map, and the
//! no-deviation check.

mod central;
mod potential;
mod verify;

pub use central::{
    build_central_qp, embed_profile, solve_equilibrium, CentralIndex, EqError,
    EquilibriumDiagnostics, EquilibriumSolution, GameConfig,
};
pub use potential::{gradient_map, potential_value, PlayerPoint};
pub use verify::{farm_profits, verify_equilibrium, DeviationReport, FarmDeviation};
