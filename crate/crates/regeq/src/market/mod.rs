//! Two-settlement market domain: network data, per-sample clearing of the
//! day-ahead and real-time stages, locational marginal prices and
//! settlement.

mod case;
mod clearing;
mod data;
mod lmp;
mod settle;

pub use case::{permute_buses, CaseError, NetworkCase};
pub use clearing::{
    canonicalize_regulation, clear_day_ahead, clear_joint, clear_real_time, real_time_objective,
    social_cost, ClearingError, DayAheadResult, JointClearing, RealTimeResult,
};
pub use data::{Dataset, DispatchDecision, PriceSystem, RawDuals, RegressionProfile, Sample};
pub use lmp::equilibrium_lmps;
pub use settle::{settle, Settlement};
