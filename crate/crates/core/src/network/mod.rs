//! Network graphs, Kron reduction and closed-loop assembly.

mod closed_loop;
pub mod dae;
mod graph;

pub use closed_loop::{
    assemble_loop, build_frequency_loop, fleet_devices, simulate_piecewise, ClosedLoopModel, LoopDevice, LoopNetwork,
    Segment, VoltageCoupling,
};
pub use graph::{build_laplacian, kron_injection_map, kron_reduce, Edge, Laplacian, LaplacianCheck, NetworkGraph};

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use crate::design::{Fleet, Role};
use crate::error::{Error, Result};
use crate::lti::{simulate, RationalTF, TimeSeries};
use dae::{DaeBuilder, OutputForm, Var};

/// `(Σ_forming T_i^{-1} + Σ_following T_i)^{-1}`.
pub fn coherent_response(fleet: &Fleet) -> Result<RationalTF> {
    let mut adm = RationalTF::zero();
    for d in &fleet.devices {
        let Some(r) = &d.ref_pf else {
            if d.participates_fp() {
                return Err(Error::UnrealizedDevice(d.name.clone()));
            }
            continue;
        };
        let term = match d.role {
            Role::Forming => r.inverse()?,
            Role::Following => r.clone(),
        };
        adm = adm.add(&term)?;
    }
    if adm.is_zero() {
        return Err(Error::DegenerateSum);
    }
    adm.inverse()
}

/// Closes `Δv_pcc = Δv_ext + K_g Δq_agg` with `Δq_agg = -Σ T_i^vq Δv_pcc`.
///
/// The disturbance series must carry one channel. Returns `v_pcc`, `q_agg` and `q:<device>`.
pub fn voltage_loop(fleet: &Fleet, k_g: f64, v_ext: &TimeSeries) -> Result<TimeSeries> {
    if !(k_g >= 0.0) {
        return Err(Error::InvalidGain { mu: k_g });
    }
    let dt = v_ext.dt().ok_or(Error::InvalidTimeStep)?;
    let mut dae = DaeBuilder::default();
    let u = dae.input("v_ext".to_string());
    let v = dae.alg("v_pcc".to_string());
    let q_agg = dae.alg("q_agg".to_string());
    let mut all_static = true;
    let mut d_sum = 0.0;
    let mut q_terms = vec![(Var::Y(q_agg), -1.0)];
    let mut device_q = Vec::new();
    for d in &fleet.devices {
        let Some(tf) = &d.ref_vq else {
            device_q.push((d.name.clone(), None));
            continue;
        };
        let ss = crate::lti::to_state_space(tf).map_err(|_| Error::ImproperDevice(d.name.clone()))?;
        all_static &= ss.n_states() == 0;
        d_sum += ss.d[(0, 0)];
        let n = ss.n_states();
        let idx: Vec<usize> = (0..n).map(|k| dae.state(format!("x:{}:{k}", d.name))).collect();
        for i in 0..n {
            let mut t: Vec<(Var, f64)> = (0..n).map(|j| (Var::X(idx[j]), ss.a[(i, j)])).collect();
            t.push((Var::Y(v), ss.b[(i, 0)]));
            dae.derivative(idx[i], &t);
        }
        let q = dae.alg(format!("q:{}", d.name));
        let mut t: Vec<(Var, f64)> = (0..n).map(|j| (Var::X(idx[j]), -ss.c[(0, j)])).collect();
        t.push((Var::Y(v), -ss.d[(0, 0)]));
        t.push((Var::Y(q), -1.0));
        dae.equation(t);
        q_terms.push((Var::Y(q), 1.0));
        device_q.push((d.name.clone(), Some(q)));
    }
    if all_static && (k_g * d_sum).abs() >= 1.0 {
        return Err(Error::AlgebraicLoopUnstable { loop_gain: k_g * d_sum });
    }
    dae.equation(q_terms);
    dae.equation(vec![(Var::Y(v), -1.0), (Var::U(u), 1.0), (Var::Y(q_agg), k_g)]);
    let direct = |y| OutputForm {
        direct: vec![(Var::Y(y), 1.0)],
        deriv: Vec::new(),
    };
    dae.output("v_pcc".to_string(), direct(v));
    dae.output("q_agg".to_string(), direct(q_agg));
    for (name, q) in &device_q {
        let form = match q {
            Some(q) => direct(*q),
            None => OutputForm::default(),
        };
        dae.output(format!("q:{name}"), form);
    }
    let model = dae.assemble()?.ss;
    let input = TimeSeries {
        t: v_ext.t.clone(),
        channels: vec![(
            "v_ext".to_string(),
            v_ext
                .channels
                .first()
                .ok_or(Error::MissingChannel("v_ext".to_string()))?
                .1
                .clone(),
        )],
    };
    simulate(&model, &input, dt)
}

/// Weighted average of frequency channels.
pub fn coi_frequency(channels: &[&[f64]], weights: &[f64]) -> Result<Vec<f64>> {
    if channels.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: channels.len(),
            found: weights.len(),
        });
    }
    if let Some(w) = weights.iter().find(|w| !(**w >= 0.0)) {
        return Err(Error::InvalidGain { mu: *w });
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroWeightSum);
    }
    let len = channels.first().map_or(0, |c| c.len());
    if let Some(c) = channels.iter().find(|c| c.len() != len) {
        return Err(Error::DimensionMismatch {
            expected: len,
            found: c.len(),
        });
    }
    Ok((0..len)
        .map(|k| channels.iter().zip(weights).map(|(c, w)| c[k] * w).sum::<f64>() / total)
        .collect())
}

#[cfg(test)]
mod tests;
