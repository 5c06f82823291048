//! Dense real polynomials stored as ascending coefficient vectors.
//!
//! The zero polynomial is the empty vector. Root clustering and common
//! factor extraction live here since both the rational arithmetic and the
//! canonicalization depend on them.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Highest-order coefficients below this fraction of the largest one are dropped.
const TRIM_REL: f64 = 1e-14;
/// Roots closer than this (relative to max(1, |r|)) are treated as one cluster.
const CLUSTER_REL: f64 = 1e-4;
/// Cluster centers closer than this are considered the same root.
pub const CANCEL_TOL: f64 = 1e-9;

pub fn trim(p: &mut Vec<f64>) {
    let max = p.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
    if max == 0.0 {
        p.clear();
        return;
    }
    while let Some(&last) = p.last() {
        if last.abs() <= TRIM_REL * max {
            p.pop();
        } else {
            break;
        }
    }
}

pub fn trimmed(mut p: Vec<f64>) -> Vec<f64> {
    trim(&mut p);
    p
}

/// Degree of a trimmed polynomial; `None` for the zero polynomial.
pub fn degree(p: &[f64]) -> Option<usize> {
    if p.is_empty() {
        None
    } else {
        Some(p.len() - 1)
    }
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len().max(b.len());
    let mut out = vec![0.0; n];
    for (i, c) in a.iter().enumerate() {
        out[i] += c;
    }
    for (i, c) in b.iter().enumerate() {
        out[i] += c;
    }
    trimmed(out)
}

pub fn scale(a: &[f64], k: f64) -> Vec<f64> {
    trimmed(a.iter().map(|c| c * k).collect())
}

pub fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    trimmed(out)
}

pub fn pow(a: &[f64], k: usize) -> Vec<f64> {
    let mut out = vec![1.0];
    for _ in 0..k {
        out = mul(&out, a);
    }
    out
}

/// Long division `a = q·b + r`; `b` must be nonzero.
pub fn div_rem(a: &[f64], b: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let db = b.len() - 1;
    if a.len() < b.len() {
        return (Vec::new(), a.to_vec());
    }
    let lead = b[db];
    let mut r = a.to_vec();
    let mut q = vec![0.0; a.len() - db];
    for k in (0..q.len()).rev() {
        let coef = r[k + db] / lead;
        q[k] = coef;
        for (j, bj) in b.iter().enumerate() {
            r[k + j] -= coef * bj;
        }
        r[k + db] = 0.0;
    }
    r.truncate(db);
    (trimmed(q), trimmed(r))
}

pub fn eval(p: &[f64], s: Complex64) -> Complex64 {
    p.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * s + c)
}

pub fn eval_real(p: &[f64], s: f64) -> f64 {
    p.iter().rev().fold(0.0, |acc, &c| acc * s + c)
}

/// Number of exact zero roots (lowest-order zero coefficients).
pub fn zeros_at_origin(p: &[f64]) -> usize {
    p.iter().take_while(|c| **c == 0.0).count()
}

/// All complex roots of `p` (trimmed, nonzero, exact origin roots included).
pub fn roots(p: &[f64]) -> Vec<Complex64> {
    let z = zeros_at_origin(p);
    let mut out: Vec<Complex64> = (0..z).map(|_| Complex64::new(0.0, 0.0)).collect();
    let q = &p[z..];
    let n = q.len().saturating_sub(1);
    match n {
        0 => {}
        1 => out.push(Complex64::new(-q[0] / q[1], 0.0)),
        2 => {
            let (a, b, c) = (q[2], q[1], q[0]);
            let disc = b * b - 4.0 * a * c;
            if disc >= 0.0 {
                let sq = libm::sqrt(disc);
                let t = -0.5 * (b + b.signum() * sq);
                if t == 0.0 {
                    out.push(Complex64::new(0.0, 0.0));
                    out.push(Complex64::new(0.0, 0.0));
                } else {
                    out.push(Complex64::new(t / a, 0.0));
                    out.push(Complex64::new(c / t, 0.0));
                }
            } else {
                let re = -b / (2.0 * a);
                let im = libm::sqrt(-disc) / (2.0 * a.abs());
                out.push(Complex64::new(re, im));
                out.push(Complex64::new(re, -im));
            }
        }
        _ => {
            let lead = q[n];
            let comp = DMatrix::<f64>::from_fn(n, n, |i, j| {
                if j == n - 1 {
                    -q[i] / lead
                } else if i == j + 1 {
                    1.0
                } else {
                    0.0
                }
            });
            for r in comp.complex_eigenvalues().iter() {
                out.push(Complex64::new(r.re, r.im));
            }
        }
    }
    out
}

/// A group of numerically coincident roots.
#[derive(Debug, Clone, Copy)]
pub struct RootCluster {
    pub center: Complex64,
    pub multiplicity: usize,
}

fn scale_of(r: Complex64) -> f64 {
    r.norm().max(1.0)
}

/// Groups roots into clusters; conjugate clusters are reported once with
/// a non-negative imaginary part and real clusters have zero imaginary part.
pub fn clusters(p: &[f64]) -> Vec<RootCluster> {
    let rs = roots(p);
    let mut used = vec![false; rs.len()];
    let mut out: Vec<RootCluster> = Vec::new();
    for i in 0..rs.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        let mut members = vec![rs[i]];
        for j in (i + 1)..rs.len() {
            if !used[j] && (rs[j] - rs[i]).norm() <= CLUSTER_REL * scale_of(rs[i]) {
                used[j] = true;
                members.push(rs[j]);
            }
        }
        let sum = members.iter().fold(Complex64::new(0.0, 0.0), |a, b| a + b);
        let center = sum / members.len() as f64;
        out.push(RootCluster {
            center,
            multiplicity: members.len(),
        });
    }
    // Merge conjugate pairs and snap real clusters.
    let mut merged: Vec<RootCluster> = Vec::new();
    let mut taken = vec![false; out.len()];
    for i in 0..out.len() {
        if taken[i] {
            continue;
        }
        taken[i] = true;
        let c = out[i].center;
        if c.im.abs() <= CLUSTER_REL * scale_of(c) {
            merged.push(RootCluster {
                center: Complex64::new(c.re, 0.0),
                multiplicity: out[i].multiplicity,
            });
            continue;
        }
        let mut partner = None;
        for j in (i + 1)..out.len() {
            if !taken[j] && (out[j].center - c.conj()).norm() <= CLUSTER_REL * scale_of(c) {
                partner = Some(j);
                break;
            }
        }
        if let Some(j) = partner {
            taken[j] = true;
        }
        let center = Complex64::new(c.re, c.im.abs());
        merged.push(RootCluster {
            center,
            multiplicity: out[i].multiplicity,
        });
    }
    merged
}

/// Monic factor whose roots are `cluster.center` repeated `m` times
/// (and its conjugate for complex clusters).
fn cluster_factor(center: Complex64, m: usize) -> Vec<f64> {
    let base = if center.im == 0.0 {
        vec![-center.re, 1.0]
    } else {
        vec![center.norm_sqr(), -2.0 * center.re, 1.0]
    };
    pow(&base, m)
}

/// Extracts the common factor of `a` and `b` made of root clusters that
/// coincide within [`CANCEL_TOL`]. Returns `(g, a/g, b/g)` with `g` monic.
pub fn common_factor(a: &[f64], b: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    if a.is_empty() || b.is_empty() {
        return (vec![1.0], a.to_vec(), b.to_vec());
    }
    let z = zeros_at_origin(a).min(zeros_at_origin(b));
    let mut ra = a[z..].to_vec();
    let mut rb = b[z..].to_vec();
    let mut g = vec![0.0; z];
    g.push(1.0);

    if ra.len() > 1 && rb.len() > 1 {
        let ca = clusters(&ra);
        let cb = clusters(&rb);
        let mut factor = vec![1.0];
        for x in &ca {
            for y in &cb {
                let tol = CANCEL_TOL * scale_of(x.center);
                let same_kind = (x.center.im == 0.0) == (y.center.im == 0.0);
                if same_kind && (x.center - y.center).norm() <= tol {
                    let m = x.multiplicity.min(y.multiplicity);
                    let center = (x.center + y.center) * 0.5;
                    let center = if x.center.im == 0.0 {
                        Complex64::new(center.re, 0.0)
                    } else {
                        center
                    };
                    factor = mul(&factor, &cluster_factor(center, m));
                }
            }
        }
        if factor.len() > 1 {
            ra = div_rem(&ra, &factor).0;
            rb = div_rem(&rb, &factor).0;
            g = mul(&g, &factor);
        }
    }
    (g, ra, rb)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn division_recovers_factors() {
        let a = mul(&[1.0, 1.0], &[2.0, 3.0, 1.0]);
        let (q, r) = div_rem(&a, &[1.0, 1.0]);
        assert!(r.is_empty() || r.iter().all(|c| c.abs() < 1e-14));
        assert_eq!(q.len(), 3);
        for (x, y) in q.iter().zip([2.0, 3.0, 1.0]) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn double_root_cluster_center_is_accurate() {
        // (s + 2/3)^2 (s + 5)
        let p = mul(&pow(&[2.0 / 3.0, 1.0], 2), &[5.0, 1.0]);
        let cs = clusters(&p);
        let dbl = cs.iter().find(|c| c.multiplicity == 2).unwrap();
        assert!((dbl.center.re + 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(dbl.center.im, 0.0);
    }

    #[test]
    fn common_factor_with_complex_pair() {
        let pair = [2.0, 2.0, 1.0]; // roots -1 ± j
        let a = mul(&pair, &[3.0, 1.0]);
        let b = mul(&pair, &[0.5, 1.0]);
        let (g, ra, rb) = common_factor(&a, &b);
        assert_eq!(g.len(), 3);
        assert!((ra[0] - 3.0).abs() < 1e-12 && (rb[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn nearby_distinct_roots_are_not_cancelled() {
        let a = [1.0, 1.0];
        let b = [1.0 + 1e-6, 1.0];
        let (g, _, _) = common_factor(&a, &b);
        assert_eq!(g, vec![1.0]);
    }

    #[test]
    fn trim_drops_negligible_leading_terms() {
        assert_eq!(trimmed(vec![1.0, 2.0, 1e-20]), vec![1.0, 2.0]);
        assert!(trimmed(vec![0.0, 0.0]).is_empty());
    }
}
