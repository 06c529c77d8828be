//! Decentralized computation of the coordinated regression profile.
//!
//! Iterates price-taking best responses of wind farms, generators and
//! loads against the current price system, then performs projected dual
//! ascent on the shared-constraint multipliers and recomposes locational
//! prices. Wind farms solve on their own feature data only; everything
//! they need from the rest of the system arrives as public aggregates.

mod best_response;
mod schedule;
mod solve;
mod state;

pub use best_response::{
    best_response_generators, best_response_loads, best_response_wind, best_response_wind_farm,
    WindPublicSignal,
};
pub use schedule::StepSchedule;
pub use solve::{admm_solve, AdmmError, AdmmInit, AdmmOutput, AdmmStop};
pub use state::{dual_update, lmp_update, AdmmState, TraceRow};

/// Sign applied to the augmentation penalties in the best responses.
/// Subtracting from profit (adding to the minimized objective) penalizes
/// constraint violation; the flipped sign rewards it and is kept only to
/// demonstrate divergence in tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum PenaltySign {
    Subtract,
    AddAsPrinted,
}

impl PenaltySign {
    pub(crate) fn factor(self) -> f64 {
        match self {
            PenaltySign::Subtract => 1.0,
            PenaltySign::AddAsPrinted => -1.0,
        }
    }
}
