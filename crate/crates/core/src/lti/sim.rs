use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use nalgebra::{DMatrix, DVector};

use super::ss::StateSpace;
use crate::error::{Error, Result};

/// Uniformly sampled named channels.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub t: Vec<f64>,
    pub channels: Vec<(String, Vec<f64>)>,
}

impl TimeSeries {
    /// `n` samples starting at `t0` with spacing `dt`.
    pub fn uniform(t0: f64, dt: f64, n: usize) -> Self {
        TimeSeries {
            t: (0..n).map(|k| t0 + k as f64 * dt).collect(),
            channels: Vec::new(),
        }
    }

    /// Samples covering `[0, t_end]` inclusive.
    pub fn span(t_end: f64, dt: f64) -> Self {
        let n = libm::round(t_end / dt) as usize + 1;
        Self::uniform(0.0, dt, n)
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn dt(&self) -> Option<f64> {
        if self.t.len() < 2 {
            None
        } else {
            Some(self.t[1] - self.t[0])
        }
    }

    pub fn with_channel(mut self, name: &str, data: Vec<f64>) -> Result<Self> {
        self.push(name, data)?;
        Ok(self)
    }

    pub fn push(&mut self, name: &str, data: Vec<f64>) -> Result<()> {
        if data.len() != self.t.len() {
            return Err(Error::DimensionMismatch {
                expected: self.t.len(),
                found: data.len(),
            });
        }
        self.channels.push((name.to_string(), data));
        Ok(())
    }

    /// Adds a channel computed from the sample times.
    pub fn push_fn(&mut self, name: &str, f: impl Fn(f64) -> f64) {
        let data = self.t.iter().map(|&t| f(t)).collect();
        self.channels.push((name.to_string(), data));
    }

    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.channels.iter().find(|(n, _)| n == name).map(|(_, d)| d.as_slice())
    }

    pub fn require(&self, name: &str) -> Result<&[f64]> {
        self.get(name).ok_or_else(|| Error::MissingChannel(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.channels.iter().map(|(n, _)| n.as_str())
    }

    /// Appends `other`, skipping its first sample when it repeats our last time.
    pub fn append(&mut self, other: &TimeSeries) -> Result<()> {
        if self.t.is_empty() {
            *self = other.clone();
            return Ok(());
        }
        let skip = match (self.t.last(), other.t.first()) {
            (Some(a), Some(b)) if libm::fabs(a - b) < 1e-9 => 1,
            _ => 0,
        };
        if skip == 1 {
            self.t.pop();
            for (_, d) in self.channels.iter_mut() {
                d.pop();
            }
        }
        for (name, data) in self.channels.iter_mut() {
            let src = other.get(name).ok_or_else(|| Error::MissingChannel(name.clone()))?;
            data.extend_from_slice(src);
        }
        self.t.extend_from_slice(&other.t);
        Ok(())
    }

    /// CSV with a leading `t` column and `%.9e` number formatting.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for (n, _) in &self.channels {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for k in 0..self.t.len() {
            out.push_str(&format_sci(self.t[k]));
            for (_, d) in &self.channels {
                out.push(',');
                out.push_str(&format_sci(d[k]));
            }
            out.push('\n');
        }
        out
    }
}

/// C-style `%.9e`: nine mantissa digits and a signed exponent of at least two digits.
pub fn format_sci(v: f64) -> String {
    if v.is_nan() {
        return String::from("nan");
    }
    if v.is_infinite() {
        return String::from(if v > 0.0 { "inf" } else { "-inf" });
    }
    let s = format!("{v:.9e}");
    let (mant, exp) = s.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    let mut out = String::with_capacity(16);
    let sign = if exp < 0 { '-' } else { '+' };
    let _ = write!(out, "{mant}e{sign}{:02}", exp.abs());
    out
}

/// Bilinear (trapezoidal) discretization of a continuous model.
#[derive(Debug, Clone)]
pub struct Discretized {
    pub ad: DMatrix<f64>,
    pub bd: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub dt: f64,
}

impl Discretized {
    pub fn new(model: &StateSpace, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidTimeStep);
        }
        let n = model.n_states();
        let h = 0.5 * dt;
        let (ad, bd) = if n == 0 {
            (DMatrix::zeros(0, 0), DMatrix::zeros(0, model.n_inputs()))
        } else {
            let lhs = DMatrix::identity(n, n) - &model.a * h;
            let lu = lhs.lu();
            let rhs = DMatrix::identity(n, n) + &model.a * h;
            let ad = lu.solve(&rhs).ok_or(Error::InvalidTimeStep)?;
            let bd = lu.solve(&(&model.b * h)).ok_or(Error::InvalidTimeStep)?;
            (ad, bd)
        };
        if n > 0 && model.is_stable() {
            let worst = ad
                .complex_eigenvalues()
                .iter()
                .fold(0.0_f64, |m, z| m.max(libm::hypot(z.re, z.im)));
            if worst >= 1.0 + 1e-9 {
                return Err(Error::UnstableDiscretization { magnitude: worst });
            }
        }
        Ok(Discretized {
            ad,
            bd,
            c: model.c.clone(),
            d: model.d.clone(),
            dt,
        })
    }

    pub fn n_states(&self) -> usize {
        self.ad.nrows()
    }

    /// Runs from `x0` over the input rows `u[k]`; returns outputs per sample
    /// and the state at the last sample.
    pub fn run(&self, x0: &DVector<f64>, u: &[DVector<f64>]) -> (Vec<DVector<f64>>, DVector<f64>) {
        let mut x = x0.clone();
        let mut ys = Vec::with_capacity(u.len());
        for k in 0..u.len() {
            ys.push(&self.c * &x + &self.d * &u[k]);
            if k + 1 < u.len() {
                let us = &u[k] + &u[k + 1];
                x = &self.ad * &x + &self.bd * us;
            }
        }
        (ys, x)
    }
}

fn input_rows(model: &StateSpace, input: &TimeSeries) -> Result<Vec<DVector<f64>>> {
    let m = model.n_inputs();
    let zeros = vec![0.0; input.len()];
    let cols: Vec<&[f64]> = if m == 0 {
        Vec::new()
    } else if input.channels.is_empty() {
        vec![zeros.as_slice(); m]
    } else if model.inputs.iter().any(|n| input.get(n).is_some()) {
        // Matched by name; inputs without a channel stay at zero.
        model
            .inputs
            .iter()
            .map(|n| input.get(n).unwrap_or(zeros.as_slice()))
            .collect()
    } else if input.channels.len() == m {
        input.channels.iter().map(|(_, d)| d.as_slice()).collect()
    } else {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: input.channels.len(),
        });
    };
    Ok((0..input.len())
        .map(|k| DVector::from_iterator(m, cols.iter().map(|c| c[k])))
        .collect())
}

fn check_spacing(input: &TimeSeries, dt: f64) -> Result<()> {
    if !(dt > 0.0) {
        return Err(Error::InvalidTimeStep);
    }
    if let Some(h) = input.dt() {
        if libm::fabs(h - dt) > 1e-9 * dt.max(1e-12) * 1e3 {
            return Err(Error::InvalidTimeStep);
        }
    }
    Ok(())
}

/// Simulates from zero initial state.
pub fn simulate(model: &StateSpace, input: &TimeSeries, dt: f64) -> Result<TimeSeries> {
    let x0 = DVector::zeros(model.n_states());
    Ok(simulate_from(model, input, dt, &x0)?.0)
}

/// Simulates from `x0` and also returns the state at the final sample.
pub fn simulate_from(
    model: &StateSpace,
    input: &TimeSeries,
    dt: f64,
    x0: &DVector<f64>,
) -> Result<(TimeSeries, DVector<f64>)> {
    check_spacing(input, dt)?;
    if x0.len() != model.n_states() {
        return Err(Error::DimensionMismatch {
            expected: model.n_states(),
            found: x0.len(),
        });
    }
    let disc = Discretized::new(model, dt)?;
    let u = input_rows(model, input)?;
    let (ys, xf) = disc.run(x0, &u);
    let mut out = TimeSeries {
        t: input.t.clone(),
        channels: Vec::new(),
    };
    for (j, name) in model.outputs.iter().enumerate() {
        out.channels.push((name.clone(), ys.iter().map(|y| y[j]).collect()));
    }
    Ok((out, xf))
}

/// Constant-valued input channels, handy for step experiments.
pub fn step_input(t_end: f64, dt: f64, names: &[&str], values: &[f64]) -> TimeSeries {
    let mut ts = TimeSeries::span(t_end, dt);
    for (n, v) in names.iter().zip(values) {
        let data = vec![*v; ts.len()];
        ts.channels.push((n.to_string(), data));
    }
    ts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::{to_state_space, RationalTF};

    #[test]
    fn first_order_step_matches_analytic() {
        let ss = to_state_space(&RationalTF::first_order(1.0, 0.01).unwrap()).unwrap();
        let input = step_input(0.05, 1e-4, &["u"], &[1.0]);
        let y = simulate(&ss, &input, 1e-4).unwrap();
        let last = *y.channels[0].1.last().unwrap();
        assert!((last - (1.0 - libm::exp(-5.0))).abs() < 1e-3);
    }

    #[test]
    fn zero_input_gives_zero_output() {
        let ss = to_state_space(&RationalTF::new(&[1.0, 2.0], &[1.0, 3.0, 1.0]).unwrap()).unwrap();
        let y = simulate(&ss, &step_input(1.0, 1e-3, &["u"], &[0.0]), 1e-3).unwrap();
        assert!(y.channels[0].1.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn static_gain_is_constant() {
        let ss = to_state_space(&RationalTF::constant(0.01)).unwrap();
        let y = simulate(&ss, &step_input(0.1, 1e-3, &["u"], &[1.0]), 1e-3).unwrap();
        assert!(y.channels[0].1.iter().all(|v| *v == 0.01));
    }

    #[test]
    fn mismatched_spacing_is_rejected() {
        let ss = to_state_space(&RationalTF::constant(1.0)).unwrap();
        let input = step_input(0.1, 1e-3, &["u"], &[1.0]);
        assert_eq!(simulate(&ss, &input, 2e-3), Err(Error::InvalidTimeStep));
    }

    #[test]
    fn c_style_exponent() {
        assert_eq!(format_sci(1.0), "1.000000000e+00");
        assert_eq!(format_sci(-8.4009e-3), "-8.400900000e-03");
        assert_eq!(format_sci(0.0), "0.000000000e+00");
        assert_eq!(format_sci(1.5e120), "1.500000000e+120");
    }

    #[test]
    fn append_joins_at_shared_sample() {
        let mut a = TimeSeries::uniform(0.0, 0.5, 3)
            .with_channel("y", vec![0.0, 1.0, 2.0])
            .unwrap();
        let b = TimeSeries::uniform(1.0, 0.5, 2)
            .with_channel("y", vec![5.0, 6.0])
            .unwrap();
        a.append(&b).unwrap();
        assert_eq!(a.t, vec![0.0, 0.5, 1.0, 1.5]);
        assert_eq!(a.get("y").unwrap(), &[0.0, 1.0, 5.0, 6.0]);
    }
}
