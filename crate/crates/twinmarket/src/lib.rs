//! Deterministic, seedable simulator for a two-sided vehicular digital-twin
//! resource market: autonomous vehicles auction for roadside-unit execution of
//! multi-deadline DT tasks (online submarket), and virtual simulators auction
//! for the winner's residual time windows (offline submarket). The market is
//! cleared by a multi-task enhanced second-score mechanism plus SPA, PViSA and
//! EPViSA baselines, with executable checks of the mechanism's theoretical
//! properties (strategy-proofness, adverse-selection freedom, marginal-score
//! monotonicity, deadline optimality).

pub mod domain;
pub mod engine;
pub mod mechanism;
pub mod network;
pub mod report;
pub mod scoring;
pub mod simvalue;
pub mod verify;
