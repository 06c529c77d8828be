//! Two-settlement electricity market simulation in which wind power
//! producers coordinate their forecast models through market prices.
//!
//! The crate models a day-ahead/real-time market pair cleared by convex
//! quadratic programs, kernel-feature wind power regression, and the
//! computation of the profile of forecast models at which no producer can
//! profit from a unilateral model change. That profile can be computed
//! either through one centralized solve or through a decentralized
//! price-update algorithm that never pools training features. An
//! evaluation harness compares perfect-foresight, accuracy-focused and
//! coordinated regressions on dispatch cost, revenue and risk metrics.

pub mod qp;
pub mod market;
pub mod features;
pub mod equilibrium;
pub mod admm;
pub mod eval;
pub mod io;

#[cfg(test)]
pub(crate) mod fixtures;
