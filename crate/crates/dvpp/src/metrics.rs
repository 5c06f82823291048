use std::fmt;

use dvpp_core::lti::{format_sci, TimeSeries};

use crate::error::DvppError;

pub const ROCOF_WINDOW: f64 = 0.1;

/// One pass/fail line of a report.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tol: f64,
    pub pass: bool,
    /// Reported only, never fails the run.
    pub informational: bool,
}

impl Check {
    pub fn below(name: impl Into<String>, value: f64, tol: f64) -> Self {
        Check {
            name: name.into(),
            value,
            tol,
            pass: value < tol,
            informational: false,
        }
    }

    pub fn info(name: impl Into<String>, value: f64) -> Self {
        Check {
            name: name.into(),
            value,
            tol: f64::INFINITY,
            pass: true,
            informational: true,
        }
    }

    pub fn flag(name: impl Into<String>, pass: bool) -> Self {
        Check {
            name: name.into(),
            value: if pass { 0.0 } else { 1.0 },
            tol: 0.5,
            pass,
            informational: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsReport {
    pub nadir: f64,
    /// Largest 100 ms sliding mean of `|dΔf_coi/dt|`.
    pub rocof: f64,
    /// Largest single-step finite difference.
    pub rocof_instant: f64,
    pub steady_state: f64,
    pub nadir_normalized: Option<f64>,
    pub rocof_normalized: Option<f64>,
    pub peaks: Vec<(String, f64)>,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
}

impl MetricsReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass || c.informational)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl MetricsReport {
    /// Only the pass/fail lines and notes.
    pub fn conditions(&self) -> String {
        let mut out = String::new();
        self.write_conditions(&mut out).expect("writing to a String");
        out
    }

    fn write_conditions(&self, f: &mut impl fmt::Write) -> fmt::Result {
        for c in &self.checks {
            let status = match (c.informational, c.pass) {
                (true, _) => "INFO",
                (false, true) => "PASS",
                (false, false) => "FAIL",
            };
            if c.informational {
                writeln!(f, "{status} {} = {}", c.name, format_sci(c.value))?;
            } else {
                writeln!(
                    f,
                    "{status} {} = {} (tol {})",
                    c.name,
                    format_sci(c.value),
                    format_sci(c.tol)
                )?;
            }
        }
        for n in &self.notes {
            writeln!(f, "note: {n}")?;
        }
        Ok(())
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "nadir = {}", format_sci(self.nadir))?;
        writeln!(f, "rocof = {}", format_sci(self.rocof))?;
        writeln!(f, "rocof_instant = {}", format_sci(self.rocof_instant))?;
        writeln!(f, "steady_state = {}", format_sci(self.steady_state))?;
        if let Some(v) = self.nadir_normalized {
            writeln!(f, "nadir_normalized = {}", format_sci(v))?;
        }
        if let Some(v) = self.rocof_normalized {
            writeln!(f, "rocof_normalized = {}", format_sci(v))?;
        }
        for (name, v) in &self.peaks {
            writeln!(f, "peak {name} = {}", format_sci(*v))?;
        }
        self.write_conditions(f)
    }
}

/// Nadir, RoCoF and peak powers of a run; normalized variants need `dp_load ≠ 0`.
pub fn compute_metrics(series: &TimeSeries, dp_load: f64) -> Result<MetricsReport, DvppError> {
    let f = series.require("f_coi")?;
    let dt = series.dt().unwrap_or(0.0);
    let nadir = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let steady_state = f.last().copied().unwrap_or(0.0);

    let diffs: Vec<f64> = if dt > 0.0 {
        f.windows(2).map(|w| (w[1] - w[0]) / dt).collect()
    } else {
        Vec::new()
    };
    let rocof_instant = diffs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let rocof = if diffs.is_empty() {
        0.0
    } else {
        let n = ((ROCOF_WINDOW / dt).round() as usize).clamp(1, diffs.len());
        let mut sum: f64 = diffs[..n].iter().sum();
        let mut best = sum.abs();
        for k in n..diffs.len() {
            sum += diffs[k] - diffs[k - n];
            best = best.max(sum.abs());
        }
        best / n as f64
    };

    let peaks = series
        .channels
        .iter()
        .filter(|(n, _)| n.starts_with("p:") || n.starts_with("q:"))
        .map(|(n, d)| (n.clone(), d.iter().fold(0.0f64, |m, v| m.max(v.abs()))))
        .collect();
    let norm = (dp_load != 0.0).then(|| dp_load.abs());
    Ok(MetricsReport {
        nadir,
        rocof,
        rocof_instant,
        steady_state,
        nadir_normalized: norm.map(|d| nadir / d),
        rocof_normalized: norm.map(|d| rocof / d),
        peaks,
        checks: Vec::new(),
        notes: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use dvpp_core::design::make_tdes;
    use dvpp_core::lti::{simulate, step_input, to_state_space};

    fn tdes_step(dp: f64, dt: f64) -> TimeSeries {
        let t = make_tdes(5.55, 33.33, 0.01).unwrap().tf_pf;
        let mut ss = to_state_space(&t).unwrap();
        ss.outputs = vec!["f_coi".into()];
        ss.inputs = vec!["p".into()];
        simulate(&ss, &step_input(5.0, dt, &["p"], &[dp]), dt).unwrap()
    }

    #[test]
    fn first_order_step_has_no_overshoot() {
        let m = compute_metrics(&tdes_step(-0.28, 1e-3), -0.28).unwrap();
        assert!((m.nadir - m.steady_state.abs()).abs() < 1e-15);
        assert!(m.nadir >= m.steady_state.abs());
    }

    #[test]
    fn rocof_matches_initial_slope() {
        let m = compute_metrics(&tdes_step(-0.28, 1e-4), -0.28).unwrap();
        assert!((m.rocof_instant - 0.050450).abs() / 0.050450 < 1e-3);
        assert!(m.rocof < m.rocof_instant);
        assert!((m.rocof_normalized.unwrap() - m.rocof / 0.28).abs() < 1e-15);
    }

    #[test]
    fn zero_input_gives_zero_metrics() {
        let m = compute_metrics(&tdes_step(0.0, 1e-3), 0.0).unwrap();
        assert_eq!(
            (m.nadir, m.rocof, m.rocof_instant, m.steady_state),
            (0.0, 0.0, 0.0, 0.0)
        );
        assert_eq!(m.nadir_normalized, None);
    }

    #[test]
    fn missing_coi_channel() {
        let ts = TimeSeries::span(1.0, 0.1);
        assert!(matches!(compute_metrics(&ts, 1.0), Err(DvppError::Model(_))));
    }
}
