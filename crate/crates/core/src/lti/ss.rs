use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::tf::RationalTF;
use crate::error::{Error, Result};

/// `ẋ = A x + B u`, `y = C x + D u`, with labelled signals.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub states: Vec<String>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
}

fn labels(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

impl StateSpace {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, d: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        let (m, p) = (b.ncols(), c.nrows());
        let check = |expected: usize, found: usize| {
            if expected == found {
                Ok(())
            } else {
                Err(Error::DimensionMismatch { expected, found })
            }
        };
        check(n, a.ncols())?;
        check(n, b.nrows())?;
        check(n, c.ncols())?;
        check(p, d.nrows())?;
        check(m, d.ncols())?;
        Ok(StateSpace {
            a,
            b,
            c,
            d,
            states: labels("x", n),
            inputs: labels("u", m),
            outputs: labels("y", p),
        })
    }

    pub fn with_labels(mut self, inputs: Vec<String>, outputs: Vec<String>) -> Result<Self> {
        if inputs.len() != self.n_inputs() {
            return Err(Error::DimensionMismatch {
                expected: self.n_inputs(),
                found: inputs.len(),
            });
        }
        if outputs.len() != self.n_outputs() {
            return Err(Error::DimensionMismatch {
                expected: self.n_outputs(),
                found: outputs.len(),
            });
        }
        self.inputs = inputs;
        self.outputs = outputs;
        Ok(self)
    }

    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn n_outputs(&self) -> usize {
        self.c.nrows()
    }

    /// Transfer matrix `C (sI - A)^{-1} B + D` at complex frequency `s`.
    pub fn response(&self, s: Complex64) -> Result<DMatrix<Complex64>> {
        let n = self.n_states();
        let d = self.d.map(|v| Complex64::new(v, 0.0));
        if n == 0 {
            return Ok(d);
        }
        let mut m = self.a.map(|v| Complex64::new(-v, 0.0));
        for i in 0..n {
            m[(i, i)] += s;
        }
        let b = self.b.map(|v| Complex64::new(v, 0.0));
        let x = m.lu().solve(&b).ok_or(Error::PoleAtQueryPoint)?;
        let c = self.c.map(|v| Complex64::new(v, 0.0));
        Ok(c * x + d)
    }

    pub fn eigenvalues(&self) -> Vec<Complex64> {
        if self.n_states() == 0 {
            return Vec::new();
        }
        self.a
            .complex_eigenvalues()
            .iter()
            .map(|z| Complex64::new(z.re, z.im))
            .collect()
    }

    /// Largest real part of the spectrum (`-inf` for a static model).
    pub fn spectral_abscissa(&self) -> f64 {
        self.eigenvalues().iter().fold(f64::NEG_INFINITY, |m, z| m.max(z.re))
    }

    pub fn is_stable(&self) -> bool {
        self.spectral_abscissa() < 0.0
    }

    pub fn output_index(&self, name: &str) -> Option<usize> {
        self.outputs.iter().position(|o| o == name)
    }

    /// Steady-state output for constant input `u`, requiring nonsingular `A`.
    pub fn dc_output(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        if self.n_states() == 0 {
            return Ok(&self.d * u);
        }
        let bu = &self.b * u;
        let x = self.a.clone().lu().solve(&bu).ok_or(Error::PoleAtQueryPoint)?;
        Ok(&self.d * u - &self.c * x)
    }
}

/// Controllable canonical realization of a proper SISO transfer function.
pub fn to_state_space(tf: &RationalTF) -> Result<StateSpace> {
    if !tf.is_proper() {
        return Err(Error::ImproperTransferFunction);
    }
    let den = tf.den();
    let n = den.len() - 1;
    let mut num = tf.num().to_vec();
    num.resize(n + 1, 0.0);
    let d = num[n];
    let rem: Vec<f64> = (0..n).map(|i| num[i] - d * den[i]).collect();
    let a = DMatrix::from_fn(n, n, |i, j| {
        if i + 1 == n {
            -den[j]
        } else if j == i + 1 {
            1.0
        } else {
            0.0
        }
    });
    let mut b = DMatrix::zeros(n, 1);
    if n > 0 {
        b[(n - 1, 0)] = 1.0;
    }
    let c = DMatrix::from_row_slice(1, n, &rem);
    let dm = DMatrix::from_element(1, 1, d);
    StateSpace::new(a, b, c, dm)
}

/// Evaluates a SISO realization at `jω`.
pub fn siso_freq(ss: &StateSpace, omega: f64) -> Result<Complex64> {
    Ok(ss.response(Complex64::new(0.0, omega))?[(0, 0)])
}
