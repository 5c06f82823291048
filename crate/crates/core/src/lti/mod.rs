//! Scalar transfer functions, realizations and fixed-step simulation.

mod lpv;
pub mod poly;
mod sim;
mod ss;
mod tf;

pub use lpv::{lpv_track, LpvGain};
pub use sim::{format_sci, simulate, simulate_from, step_input, Discretized, TimeSeries};
pub use ss::{siso_freq, to_state_space, StateSpace};
pub use tf::RationalTF;

use alloc::vec::Vec;

/// Largest polynomial degree any transfer function may reach.
pub const MAX_DEGREE: usize = 16;

/// `n` points log-spaced between `10^lo` and `10^hi` inclusive.
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => alloc::vec![libm::pow(10.0, lo)],
        _ => (0..n)
            .map(|k| libm::pow(10.0, lo + (hi - lo) * k as f64 / (n - 1) as f64))
            .collect(),
    }
}
