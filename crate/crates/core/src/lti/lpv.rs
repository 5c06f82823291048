use alloc::vec::Vec;

use super::sim::{simulate, TimeSeries};
use super::ss::to_state_space;
use super::tf::RationalTF;
use crate::error::{Error, Result};

/// A fixed filter followed by a piecewise-constant gain `μ(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpvGain {
    /// Gain in force before the first switch.
    pub mu0: f64,
    /// `(t, μ)` switches with strictly increasing times.
    pub switches: Vec<(f64, f64)>,
    pub base: RationalTF,
}

impl LpvGain {
    pub fn new(base: RationalTF, mu0: f64, switches: Vec<(f64, f64)>) -> Result<Self> {
        if switches.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::InvalidSchedule);
        }
        if !mu0.is_finite() || switches.iter().any(|(t, m)| !t.is_finite() || !m.is_finite()) {
            return Err(Error::InvalidSchedule);
        }
        Ok(LpvGain { mu0, switches, base })
    }

    pub fn mu_at(&self, t: f64) -> f64 {
        self.switches
            .iter()
            .take_while(|(ts, _)| *ts <= t + 1e-12)
            .last()
            .map_or(self.mu0, |(_, m)| *m)
    }
}

/// Output of the base filter scaled by the schedule at each sample.
pub fn lpv_track(g: &LpvGain, input: &TimeSeries, dt: f64) -> Result<TimeSeries> {
    if !g.base.is_proper() {
        return Err(Error::ImproperTransferFunction);
    }
    if !g.base.is_stable() {
        return Err(Error::UnstableDiscretization {
            magnitude: f64::INFINITY,
        });
    }
    let ss = to_state_space(&g.base)?;
    let mut out = simulate(&ss, input, dt)?;
    for (_, data) in out.channels.iter_mut() {
        for (k, v) in data.iter_mut().enumerate() {
            *v *= g.mu_at(input.t[k]);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::step_input;

    fn base() -> RationalTF {
        RationalTF::first_order(-100.0, 0.01).unwrap()
    }

    #[test]
    fn steady_output_follows_schedule() {
        let g = LpvGain::new(base(), 1.0, alloc::vec![(3.0, 0.5)]).unwrap();
        let y = lpv_track(&g, &step_input(6.0, 1e-3, &["dv"], &[0.01]), 1e-3).unwrap();
        let d = &y.channels[0].1;
        assert!((d[2999] + 1.0).abs() < 1e-3);
        assert!((d[6000] + 0.5).abs() < 1e-3);
        assert!((d[3001] + 0.5).abs() < 1e-3);
    }

    #[test]
    fn zero_schedule_is_silent() {
        let g = LpvGain::new(base(), 0.0, Vec::new()).unwrap();
        let y = lpv_track(&g, &step_input(1.0, 1e-3, &["dv"], &[0.01]), 1e-3).unwrap();
        assert!(y.channels[0].1.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn unsorted_schedule_is_rejected() {
        let r = LpvGain::new(base(), 1.0, alloc::vec![(2.0, 0.5), (1.0, 0.2)]);
        assert_eq!(r, Err(Error::InvalidSchedule));
    }
}
