//! Scenario parsing, presets and simulation drivers on top of `dvpp-core`.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod engine;
pub mod error;
pub mod metrics;
pub mod presets;
pub mod scenario;

pub use engine::{bode, montecarlo, run, simulate_scenario, verify, McOutput, RunOutput};
pub use error::DvppError;
pub use metrics::{compute_metrics, Check, MetricsReport};
pub use scenario::{parse_scenario, Scenario};
