//! Semi-explicit linear DAE assembly with algebraic elimination.

use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::lti::StateSpace;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    X(usize),
    Y(usize),
    U(usize),
}

pub type Terms = Vec<(Var, f64)>;

/// Output made of a direct linear form plus the time derivative of another.
#[derive(Debug, Clone, Default)]
pub struct OutputForm {
    pub direct: Terms,
    pub deriv: Terms,
}

/// `ẋ = f(x, y, u)`, `0 = g(x, y, u)`, `out = h(x, y, u) + d/dt k(x, y, u)`.
#[derive(Debug, Clone, Default)]
pub struct DaeBuilder {
    pub states: Vec<String>,
    pub algs: Vec<String>,
    pub inputs: Vec<String>,
    f: Vec<Terms>,
    g: Vec<Terms>,
    outputs: Vec<(String, OutputForm)>,
}

/// Reduced model `ẋ = A x + B u`, plus the map `y = G x + H u`.
#[derive(Debug, Clone)]
pub struct Assembled {
    pub ss: StateSpace,
    pub g: DMatrix<f64>,
    pub h: DMatrix<f64>,
}

impl DaeBuilder {
    pub fn state(&mut self, tag: String) -> usize {
        self.states.push(tag);
        self.f.push(Terms::new());
        self.states.len() - 1
    }

    pub fn alg(&mut self, tag: String) -> usize {
        self.algs.push(tag);
        self.algs.len() - 1
    }

    pub fn input(&mut self, tag: String) -> usize {
        self.inputs.push(tag);
        self.inputs.len() - 1
    }

    pub fn derivative(&mut self, state: usize, terms: &[(Var, f64)]) {
        self.f[state].extend_from_slice(terms);
    }

    pub fn equation(&mut self, terms: Terms) {
        self.g.push(terms);
    }

    pub fn output(&mut self, name: String, form: OutputForm) {
        self.outputs.push((name, form));
    }

    pub fn assemble(&self) -> Result<Assembled> {
        let (nx, ny, nu) = (self.states.len(), self.algs.len(), self.inputs.len());
        if self.g.len() != ny {
            return Err(Error::DimensionMismatch {
                expected: ny,
                found: self.g.len(),
            });
        }
        let fill = |rows: &[Terms]| {
            let n = rows.len();
            let mut mx = DMatrix::zeros(n, nx);
            let mut my = DMatrix::zeros(n, ny);
            let mut mu = DMatrix::zeros(n, nu);
            for (r, terms) in rows.iter().enumerate() {
                for &(v, c) in terms {
                    match v {
                        Var::X(i) => mx[(r, i)] += c,
                        Var::Y(i) => my[(r, i)] += c,
                        Var::U(i) => mu[(r, i)] += c,
                    }
                }
            }
            (mx, my, mu)
        };
        let (axx, axy, bx) = fill(&self.f);
        let (ayx, ayy, by) = fill(&self.g);
        let (g, h) = if ny == 0 {
            (DMatrix::zeros(0, nx), DMatrix::zeros(0, nu))
        } else {
            let lu = ayy.lu();
            let g: DMatrix<f64> = lu.solve(&(-ayx)).ok_or(Error::SingularInteriorBlock)?;
            let h: DMatrix<f64> = lu.solve(&(-by)).ok_or(Error::SingularInteriorBlock)?;
            if g.iter().chain(h.iter()).any(|v| !v.is_finite()) {
                return Err(Error::SingularInteriorBlock);
            }
            (g, h)
        };
        let a = &axx + &axy * &g;
        let b = &bx + &axy * &h;

        let reduce = |terms: &Terms| {
            let (cx, cy, cu) = fill(core::slice::from_ref(terms));
            (&cx + &cy * &g, &cy * &h + &cu)
        };
        let np = self.outputs.len();
        let mut c = DMatrix::zeros(np, nx);
        let mut d = DMatrix::zeros(np, nu);
        for (r, (_, form)) in self.outputs.iter().enumerate() {
            let (cx, du) = reduce(&form.direct);
            let (kx, _) = reduce(&form.deriv);
            let row_c = cx + &kx * &a;
            let row_d = du + &kx * &b;
            c.row_mut(r).copy_from(&row_c.row(0));
            d.row_mut(r).copy_from(&row_d.row(0));
        }
        let mut ss = StateSpace::new(a, b, c, d)?.with_labels(
            self.inputs.clone(),
            self.outputs.iter().map(|(n, _)| n.clone()).collect(),
        )?;
        ss.states = self.states.clone();
        Ok(Assembled { ss, g, h })
    }
}
