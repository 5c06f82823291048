use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use super::poly;
use super::MAX_DEGREE;
use crate::error::{Error, Result};

/// Ratio of two real polynomials in `s` with ascending coefficients.
///
/// Always canonical: both polynomials trimmed, denominator monic, common
/// root clusters cancelled, and the zero function stored as `0/1`.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalTF {
    num: Vec<f64>,
    den: Vec<f64>,
}

impl RationalTF {
    pub fn new(num: &[f64], den: &[f64]) -> Result<Self> {
        Self::canonical(num.to_vec(), den.to_vec())
    }

    pub fn constant(k: f64) -> Self {
        let num = if k == 0.0 { Vec::new() } else { vec![k] };
        RationalTF { num, den: vec![1.0] }
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn one() -> Self {
        Self::constant(1.0)
    }

    /// `k / (tau s + 1)`.
    pub fn first_order(k: f64, tau: f64) -> Result<Self> {
        Self::new(&[k], &[1.0, tau])
    }

    fn canonical(num: Vec<f64>, den: Vec<f64>) -> Result<Self> {
        let den = poly::trimmed(den);
        if den.is_empty() {
            return Err(Error::ZeroDenominator);
        }
        let num = poly::trimmed(num);
        if num.is_empty() {
            return Ok(Self::zero());
        }
        let (_, mut num, mut den) = poly::common_factor(&num, &den);
        let lead = *den.last().unwrap();
        for c in num.iter_mut() {
            *c /= lead;
        }
        for c in den.iter_mut() {
            *c /= lead;
        }
        let num = poly::trimmed(num);
        let degree = num.len().max(den.len()).saturating_sub(1);
        if degree > MAX_DEGREE {
            return Err(Error::DegreeOverflow { degree });
        }
        Ok(RationalTF { num, den })
    }

    pub fn num(&self) -> &[f64] {
        &self.num
    }

    pub fn den(&self) -> &[f64] {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_empty()
    }

    pub fn num_degree(&self) -> Option<usize> {
        poly::degree(&self.num)
    }

    pub fn den_degree(&self) -> usize {
        self.den.len() - 1
    }

    /// `deg(den) - deg(num)`; the zero function counts as strictly proper.
    pub fn relative_degree(&self) -> isize {
        match self.num_degree() {
            None => isize::MAX,
            Some(n) => self.den_degree() as isize - n as isize,
        }
    }

    pub fn is_proper(&self) -> bool {
        self.relative_degree() >= 0
    }

    pub fn is_static(&self) -> bool {
        self.den.len() == 1 && self.num.len() <= 1
    }

    pub fn eval(&self, s: Complex64) -> Result<Complex64> {
        let d = poly::eval(&self.den, s);
        if d.norm() < 1e-300 {
            return Err(Error::PoleAtQueryPoint);
        }
        Ok(poly::eval(&self.num, s) / d)
    }

    /// Frequency response at `s = jω`.
    pub fn freq(&self, omega: f64) -> Result<Complex64> {
        self.eval(Complex64::new(0.0, omega))
    }

    pub fn dc_gain(&self) -> Result<f64> {
        Ok(self.eval(Complex64::new(0.0, 0.0))?.re)
    }

    /// Limit of the function as `s → ∞` (the feedthrough of a proper realization).
    pub fn high_frequency_gain(&self) -> Result<f64> {
        match self.relative_degree() {
            r if r > 0 => Ok(0.0),
            0 => Ok(*self.num.last().unwrap()),
            _ => Err(Error::ImproperTransferFunction),
        }
    }

    pub fn poles(&self) -> Vec<Complex64> {
        poly::roots(&self.den)
    }

    pub fn zeros(&self) -> Vec<Complex64> {
        if self.num.is_empty() {
            Vec::new()
        } else {
            poly::roots(&self.num)
        }
    }

    pub fn is_stable(&self) -> bool {
        self.poles().iter().all(|p| p.re < 0.0)
    }

    pub fn add(&self, other: &RationalTF) -> Result<RationalTF> {
        if self.is_zero() {
            return Ok(other.clone());
        }
        if other.is_zero() {
            return Ok(self.clone());
        }
        let (g, da, db) = poly::common_factor(&self.den, &other.den);
        let num = poly::add(&poly::mul(&self.num, &db), &poly::mul(&other.num, &da));
        let den = poly::mul(&g, &poly::mul(&da, &db));
        Self::canonical(num, den)
    }

    pub fn sub(&self, other: &RationalTF) -> Result<RationalTF> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> RationalTF {
        self.scale(-1.0)
    }

    pub fn scale(&self, k: f64) -> RationalTF {
        if k == 0.0 {
            return Self::zero();
        }
        RationalTF {
            num: poly::scale(&self.num, k),
            den: self.den.clone(),
        }
    }

    pub fn mul(&self, other: &RationalTF) -> Result<RationalTF> {
        if self.is_zero() || other.is_zero() {
            return Ok(Self::zero());
        }
        let (_, n1, d2) = poly::common_factor(&self.num, &other.den);
        let (_, n2, d1) = poly::common_factor(&other.num, &self.den);
        Self::canonical(poly::mul(&n1, &n2), poly::mul(&d1, &d2))
    }

    pub fn div(&self, other: &RationalTF) -> Result<RationalTF> {
        self.mul(&other.inverse()?)
    }

    pub fn inverse(&self) -> Result<RationalTF> {
        if self.is_zero() {
            return Err(Error::InverseOfZero);
        }
        Self::canonical(self.den.clone(), self.num.clone())
    }

    pub fn powi(&self, k: usize) -> Result<RationalTF> {
        let mut out = Self::one();
        for _ in 0..k {
            out = out.mul(self)?;
        }
        Ok(out)
    }

    /// Largest coefficient-level difference after canonicalization, scaled by
    /// the largest coefficient of either operand.
    pub fn coefficient_distance(&self, other: &RationalTF) -> f64 {
        let diff = |a: &[f64], b: &[f64]| {
            let n = a.len().max(b.len());
            let mut worst = 0.0_f64;
            let mut scale = 0.0_f64;
            for i in 0..n {
                let x = a.get(i).copied().unwrap_or(0.0);
                let y = b.get(i).copied().unwrap_or(0.0);
                worst = worst.max((x - y).abs());
                scale = scale.max(x.abs()).max(y.abs());
            }
            if scale == 0.0 {
                0.0
            } else {
                worst / scale
            }
        };
        diff(&self.num, &other.num).max(diff(&self.den, &other.den))
    }
}
