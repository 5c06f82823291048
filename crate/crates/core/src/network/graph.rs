use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    /// Susceptance (pu).
    pub b: f64,
    /// Resistance-to-reactance ratio, when the line is not purely inductive.
    pub rx: Option<f64>,
}

/// Undirected bus graph with labelled nodes.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NetworkGraph {
    pub nodes: Vec<String>,
    pub edges: Vec<Edge>,
    /// Nodes retained under Kron reduction.
    pub boundary: Vec<usize>,
}

impl NetworkGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_nodes<S: AsRef<str>>(names: &[S]) -> Self {
        NetworkGraph {
            nodes: names.iter().map(|n| n.as_ref().to_string()).collect(),
            edges: Vec::new(),
            boundary: Vec::new(),
        }
    }

    /// Index of `name`, adding the node if missing.
    pub fn ensure_node(&mut self, name: &str) -> usize {
        match self.index(name) {
            Some(i) => i,
            None => {
                self.nodes.push(name.to_string());
                self.nodes.len() - 1
            }
        }
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n == name)
    }

    pub fn require(&self, name: &str) -> Result<usize> {
        self.index(name).ok_or_else(|| Error::UnknownNode(name.to_string()))
    }

    pub fn add_edge(&mut self, from: &str, to: &str, b: f64, rx: Option<f64>) -> Result<()> {
        let i = self.require(from)?;
        let j = self.require(to)?;
        self.add_edge_idx(i, j, b, rx)
    }

    pub fn add_edge_idx(&mut self, from: usize, to: usize, b: f64, rx: Option<f64>) -> Result<()> {
        let bad = || Error::InvalidEdge {
            from: from.to_string(),
            to: to.to_string(),
        };
        if from == to || from >= self.nodes.len() || to >= self.nodes.len() {
            return Err(bad());
        }
        if !(b > 0.0) || !b.is_finite() || rx.is_some_and(|r| !(r >= 0.0)) {
            return Err(bad());
        }
        self.edges.push(Edge { from, to, b, rx });
        Ok(())
    }

    pub fn is_connected(&self) -> bool {
        let n = self.nodes.len();
        if n == 0 {
            return false;
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(k) = stack.pop() {
            for e in &self.edges {
                let other = if e.from == k {
                    e.to
                } else if e.to == k {
                    e.from
                } else {
                    continue;
                };
                if !seen[other] {
                    seen[other] = true;
                    stack.push(other);
                }
            }
        }
        seen.iter().all(|s| *s)
    }

    /// Laplacian with edge weights chosen by `weight`.
    pub fn weighted_laplacian(&self, weight: impl Fn(&Edge) -> f64) -> Result<Laplacian> {
        if !self.is_connected() {
            return Err(Error::DisconnectedGraph);
        }
        let n = self.nodes.len();
        let mut l = DMatrix::zeros(n, n);
        for e in &self.edges {
            let w = weight(e);
            l[(e.from, e.to)] -= w;
            l[(e.to, e.from)] -= w;
            l[(e.from, e.from)] += w;
            l[(e.to, e.to)] += w;
        }
        Ok(Laplacian {
            l,
            labels: self.nodes.clone(),
        })
    }
}

/// Weighted graph Laplacian with node labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Laplacian {
    pub l: DMatrix<f64>,
    pub labels: Vec<String>,
}

/// `L[i][j] = -b_ij`, `L[i][i] = Σ_j b_ij`.
pub fn build_laplacian(graph: &NetworkGraph) -> Result<Laplacian> {
    graph.weighted_laplacian(|e| e.b)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplacianCheck {
    pub max_row_sum: f64,
    pub max_asymmetry: f64,
    pub max_offdiag: f64,
    pub min_eigenvalue: f64,
    pub zero_eigenvalues: usize,
}

impl LaplacianCheck {
    /// Whether all invariants hold at tolerance `tol` (scaled by the largest entry).
    pub fn holds(&self, tol: f64) -> bool {
        self.max_row_sum <= tol
            && self.max_asymmetry <= tol
            && self.max_offdiag <= tol
            && self.min_eigenvalue >= -tol
            && self.zero_eigenvalues == 1
    }
}

impl Laplacian {
    pub fn n(&self) -> usize {
        self.l.nrows()
    }

    pub fn scaled(&self, k: f64) -> Laplacian {
        Laplacian {
            l: &self.l * k,
            labels: self.labels.clone(),
        }
    }

    pub fn check(&self) -> LaplacianCheck {
        let n = self.n();
        let scale = self.l.amax().max(1e-300);
        let mut c = LaplacianCheck {
            max_row_sum: 0.0,
            max_asymmetry: 0.0,
            max_offdiag: f64::NEG_INFINITY,
            min_eigenvalue: 0.0,
            zero_eigenvalues: 0,
        };
        for i in 0..n {
            let row: f64 = (0..n).map(|j| self.l[(i, j)]).sum();
            c.max_row_sum = c.max_row_sum.max(row.abs() / scale);
            for j in 0..n {
                c.max_asymmetry = c.max_asymmetry.max((self.l[(i, j)] - self.l[(j, i)]).abs() / scale);
                if i != j {
                    c.max_offdiag = c.max_offdiag.max(self.l[(i, j)] / scale);
                }
            }
        }
        if n < 2 {
            c.max_offdiag = 0.0;
        }
        let eig = self.l.clone().symmetric_eigen().eigenvalues;
        c.min_eigenvalue = eig.iter().fold(f64::INFINITY, |m, v| m.min(*v)) / scale;
        c.zero_eigenvalues = eig.iter().filter(|v| v.abs() <= 1e-9 * scale).count();
        c
    }
}

fn split(n: usize, keep: &[usize]) -> Result<Vec<usize>> {
    for (i, &k) in keep.iter().enumerate() {
        if k >= n || keep[..i].contains(&k) {
            return Err(Error::UnknownNode(k.to_string()));
        }
    }
    Ok((0..n).filter(|i| !keep.contains(i)).collect())
}

fn block(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

/// Schur complement `L_kk - L_ke L_ee^{-1} L_ek` onto the nodes in `keep` (in that order).
pub fn kron_reduce(lap: &Laplacian, keep: &[usize]) -> Result<Laplacian> {
    let elim = split(lap.n(), keep)?;
    let lkk = block(&lap.l, keep, keep);
    let labels = keep.iter().map(|&k| lap.labels[k].clone()).collect();
    if elim.is_empty() {
        return Ok(Laplacian { l: lkk, labels });
    }
    let lke = block(&lap.l, keep, &elim);
    let lee = block(&lap.l, &elim, &elim);
    let lek = block(&lap.l, &elim, keep);
    let x = lee.lu().solve(&lek).ok_or(Error::SingularInteriorBlock)?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularInteriorBlock);
    }
    Ok(Laplacian {
        l: lkk - lke * x,
        labels,
    })
}

/// Maps full-network injections onto the kept nodes: `[I, -L_ke L_ee^{-1}]`
/// with columns in original node order.
pub fn kron_injection_map(lap: &Laplacian, keep: &[usize]) -> Result<DMatrix<f64>> {
    let n = lap.n();
    let elim = split(n, keep)?;
    let mut map = DMatrix::zeros(keep.len(), n);
    for (i, &k) in keep.iter().enumerate() {
        map[(i, k)] = 1.0;
    }
    if elim.is_empty() {
        return Ok(map);
    }
    let lke = block(&lap.l, keep, &elim);
    let lee = block(&lap.l, &elim, &elim);
    let lee_t = lee.transpose();
    let y = lee_t
        .lu()
        .solve(&lke.transpose())
        .ok_or(Error::SingularInteriorBlock)?
        .transpose();
    for i in 0..keep.len() {
        for (j, &e) in elim.iter().enumerate() {
            map[(i, e)] = -y[(i, j)];
        }
    }
    Ok(map)
}
