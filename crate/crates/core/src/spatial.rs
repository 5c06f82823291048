//! Rotational powers for resistive lines and spatially spread fleets.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::design::Fleet;
use crate::error::{Error, Result};
use crate::lti::{RationalTF, StateSpace};
use crate::network::{assemble_loop, fleet_devices, ClosedLoopModel, LoopNetwork, NetworkGraph, VoltageCoupling};

/// Line impedance split into resistance and reactance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationParams {
    pub r: f64,
    pub x: f64,
    pub z: f64,
}

impl RotationParams {
    pub fn new(r: f64, x: f64) -> Result<Self> {
        let z = libm::hypot(r, x);
        if !(z > 0.0) || !z.is_finite() {
            return Err(Error::ZeroImpedance);
        }
        Ok(RotationParams { r, x, z })
    }

    /// Unit reactance with resistance `ratio`.
    pub fn from_ratio(ratio: f64) -> Result<Self> {
        Self::new(ratio, 1.0)
    }

    pub fn cos(&self) -> f64 {
        self.x / self.z
    }

    pub fn sin(&self) -> f64 {
        self.r / self.z
    }

    pub fn angle(&self) -> f64 {
        libm::atan2(self.r, self.x)
    }

    /// `[[X/Z, −R/Z], [R/Z, X/Z]]`.
    pub fn matrix(&self) -> [[f64; 2]; 2] {
        [[self.cos(), -self.sin()], [self.sin(), self.cos()]]
    }
}

/// `(p', q') = 𝓡 (p, q)`.
pub fn rotate_power(p: f64, q: f64, params: &RotationParams) -> (f64, f64) {
    let (c, s) = (params.cos(), params.sin());
    (c * p - s * q, s * p + c * q)
}

/// `(p, q) = 𝓡ᵀ (p', q')`.
pub fn unrotate_power(pp: f64, qp: f64, params: &RotationParams) -> (f64, f64) {
    let (c, s) = (params.cos(), params.sin());
    (c * pp + s * qp, -s * pp + c * qp)
}

/// Residuals of the lossless rotated power-flow equations between two buses.
pub fn lossless_flow_residual(delta: f64, v_l: f64, v_m: f64, z: f64, p_rot: f64, q_rot: f64) -> Result<(f64, f64)> {
    if !(v_l > 0.0) || !(v_m > 0.0) {
        return Err(Error::NonPositiveVoltage);
    }
    let r1 = libm::sin(delta) - z * p_rot / (v_l * v_m);
    let r2 = (v_l - v_m * libm::cos(delta)) - z * q_rot / v_l;
    Ok((r1, r2))
}

/// Row `[X/Z · T, −R/Z · T]` mapping `(Δp, Δq)` to the POC frequency.
pub fn poc_coupled_spec(tdes: &RationalTF, params: &RotationParams) -> [RationalTF; 2] {
    [tdes.scale(params.cos()), tdes.scale(-params.sin())]
}

/// Devices spread over an area behind one or more points of coupling.
///
/// Edge susceptances are read as `1/X`; the rotated network weighs each line by `1/Z`.
#[derive(Debug, Clone, PartialEq)]
pub struct AreaModel {
    pub graph: NetworkGraph,
    pub fleet: Fleet,
    pub pocs: Vec<String>,
    pub homogeneous_ratio: Option<f64>,
    /// Angle-to-power scaling (`2π f_base` for angles in rad and frequency in pu).
    pub omega_b: f64,
    /// Static droop `q' = −k v` per device; defaults to `0.5 / D_q`.
    pub q_droop: f64,
}

/// How line ratios are taken when assembling an area.
#[derive(Debug, Clone, PartialEq)]
pub enum PlantMode {
    /// The plant equals the homogeneous design.
    Strict,
    /// Per-line plant ratios, evaluated against the homogeneous design.
    Perturbed(Vec<f64>),
}

impl AreaModel {
    pub fn new(
        graph: NetworkGraph,
        fleet: Fleet,
        pocs: Vec<String>,
        homogeneous_ratio: Option<f64>,
        omega_b: f64,
    ) -> Result<Self> {
        if pocs.is_empty() {
            return Err(Error::UnknownNode(String::from("<poc>")));
        }
        for p in &pocs {
            graph.require(p)?;
        }
        let d_q = fleet.desired.tf_qv.dc_gain().unwrap_or(1.0);
        Ok(AreaModel {
            graph,
            fleet,
            pocs,
            homogeneous_ratio,
            omega_b,
            q_droop: 0.5 / d_q,
        })
    }

    pub fn n_lines(&self) -> usize {
        self.graph.edges.len()
    }

    /// Design ratio: the homogeneous ratio or, failing that, the common ratio of all edges.
    fn design_ratio(&self) -> Result<f64> {
        if let Some(r) = self.homogeneous_ratio {
            return Ok(r);
        }
        let first = self.graph.edges.first().and_then(|e| e.rx).unwrap_or(0.0);
        if self.graph.edges.iter().all(|e| e.rx.unwrap_or(0.0) == first) {
            Ok(first)
        } else {
            Err(Error::HeterogeneousRatioWithStrictMode)
        }
    }
}

fn laplacian_from(graph: &NetworkGraph, w: &[f64]) -> DMatrix<f64> {
    let n = graph.nodes.len();
    let mut l = DMatrix::zeros(n, n);
    for (e, &w) in graph.edges.iter().zip(w) {
        l[(e.from, e.to)] -= w;
        l[(e.to, e.from)] -= w;
        l[(e.from, e.from)] += w;
        l[(e.to, e.to)] += w;
    }
    l
}

fn with_outputs(ss: StateSpace, extra: &[(String, Vec<(usize, f64)>)]) -> Result<StateSpace> {
    let p = ss.n_outputs();
    let n_new = p + extra.len();
    let mut c = DMatrix::zeros(n_new, ss.n_states());
    let mut d = DMatrix::zeros(n_new, ss.n_inputs());
    c.rows_mut(0, p).copy_from(&ss.c);
    d.rows_mut(0, p).copy_from(&ss.d);
    let mut names = ss.outputs.clone();
    for (k, (name, combo)) in extra.iter().enumerate() {
        for &(j, w) in combo {
            let rc = ss.c.row(j) * w;
            let rd = ss.d.row(j) * w;
            let mut row = c.row_mut(p + k);
            row += rc;
            let mut row = d.row_mut(p + k);
            row += rd;
        }
        names.push(name.clone());
    }
    let states = ss.states.clone();
    let mut out = StateSpace::new(ss.a, ss.b, c, d)?.with_labels(ss.inputs, names)?;
    out.states = states;
    Ok(out)
}

/// Assembles the area's frequency loop in rotated coordinates.
///
/// Inputs are physical `pd:<bus>`, `qd:<bus>` disturbances. Outputs add
/// `p:<device>`, `q:<device>` (physical powers), `p':<device>`, `q':<device>`
/// and `p'_poc` (rotated power drawn through all POCs) to the loop outputs.
pub fn build_area_model(area: &AreaModel, mode: &PlantMode) -> Result<ClosedLoopModel> {
    let design_ratio = match mode {
        PlantMode::Strict => area.design_ratio()?,
        PlantMode::Perturbed(_) => area.homogeneous_ratio.ok_or(Error::HeterogeneousRatioWithStrictMode)?,
    };
    if let (PlantMode::Strict, Some(r)) = (mode, area.homogeneous_ratio) {
        if area.graph.edges.iter().any(|e| e.rx.is_some_and(|x| x != r)) {
            return Err(Error::HeterogeneousRatioWithStrictMode);
        }
    }
    let plant: Vec<f64> = match mode {
        PlantMode::Strict => alloc::vec![design_ratio; area.n_lines()],
        PlantMode::Perturbed(r) => {
            if r.len() != area.n_lines() {
                return Err(Error::DimensionMismatch {
                    expected: area.n_lines(),
                    found: r.len(),
                });
            }
            r.clone()
        }
    };
    let design = RotationParams::from_ratio(design_ratio)?;
    let mut wc = Vec::with_capacity(plant.len());
    let mut ws = Vec::with_capacity(plant.len());
    for (e, &ratio) in area.graph.edges.iter().zip(&plant) {
        let line = RotationParams::from_ratio(ratio)?;
        let z = line.z / e.b;
        let delta = design.angle() - line.angle();
        wc.push(libm::cos(delta) / z);
        ws.push(libm::sin(delta) / z);
    }
    if !area.graph.is_connected() {
        return Err(Error::DisconnectedGraph);
    }
    let lc = laplacian_from(&area.graph, &wc);
    let ls = laplacian_from(&area.graph, &ws);
    let net = LoopNetwork {
        buses: area.graph.nodes.clone(),
        k_ptheta: &lc * area.omega_b,
        voltage: Some(VoltageCoupling {
            k_pv: -&ls,
            k_qtheta: &ls * area.omega_b,
            k_qv: lc,
        }),
    };
    let mut devices = fleet_devices(&area.fleet, &|i| area.graph.require(&area.fleet.devices[i].bus))?;
    for d in devices.iter_mut() {
        d.q_droop = area.q_droop;
    }
    let mut model = assemble_loop(&net, &devices)?;

    // Physical disturbances enter through the design rotation.
    let nb = net.buses.len();
    let (c, s) = (design.cos(), design.sin());
    let mut t = DMatrix::zeros(2 * nb, 2 * nb);
    for b in 0..nb {
        t[(b, b)] = c;
        t[(b, nb + b)] = -s;
        t[(nb + b, b)] = s;
        t[(nb + b, nb + b)] = c;
    }
    let ss = &mut model.ss;
    ss.b = &ss.b * &t;
    ss.d = &ss.d * &t;

    let idx = |name: &str| ss.output_index(name).unwrap();
    let mut extra: Vec<(String, Vec<(usize, f64)>)> = Vec::new();
    for d in &area.fleet.devices {
        let (pp, qq) = (idx(&format!("p:{}", d.name)), idx(&format!("q:{}", d.name)));
        extra.push((format!("p':{}", d.name), alloc::vec![(pp, 1.0)]));
        extra.push((format!("q':{}", d.name), alloc::vec![(qq, 1.0)]));
    }
    let poc: Vec<(usize, f64)> = area.pocs.iter().map(|p| (idx(&format!("pe:{p}")), 1.0)).collect();
    extra.push((String::from("p'_poc"), poc));
    let mut ss2 = with_outputs(model.ss.clone(), &extra)?;
    for d in &area.fleet.devices {
        let pp = ss2.output_index(&format!("p':{}", d.name)).unwrap();
        let qq = ss2.output_index(&format!("q':{}", d.name)).unwrap();
        let (pi, qi) = (
            idx_of(&ss2, &format!("p:{}", d.name)),
            idx_of(&ss2, &format!("q:{}", d.name)),
        );
        let rc_p = ss2.c.row(pp) * c + ss2.c.row(qq) * s;
        let rd_p = ss2.d.row(pp) * c + ss2.d.row(qq) * s;
        let rc_q = ss2.c.row(pp) * (-s) + ss2.c.row(qq) * c;
        let rd_q = ss2.d.row(pp) * (-s) + ss2.d.row(qq) * c;
        ss2.c.row_mut(pi).copy_from(&rc_p);
        ss2.d.row_mut(pi).copy_from(&rd_p);
        ss2.c.row_mut(qi).copy_from(&rc_q);
        ss2.d.row_mut(qi).copy_from(&rd_q);
    }
    model.ss = ss2;
    Ok(model)
}

fn idx_of(ss: &StateSpace, name: &str) -> usize {
    ss.output_index(name).unwrap()
}

/// Per-line uniform ratios; sample `i` draws from a stream seeded with `seed + i`.
pub fn sample_rx(min: f64, max: f64, n_lines: usize, n_samples: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if !(min > 0.0) || !(max >= min) || !max.is_finite() {
        return Err(Error::InvalidRange { min, max });
    }
    Ok((0..n_samples)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
            (0..n_lines).map(|_| rng.random_range(min..=max)).collect()
        })
        .collect())
}
