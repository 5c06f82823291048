//! Online DC-gain adaptation to time-varying device capacities.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::design::{proportional, Channel, FactorKind, Fleet};
use crate::error::{Error, Result};
use crate::lti::format_sci;

/// Per-device active capacities and apparent ratings (pu), in fleet order.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacityState {
    pub names: Vec<String>,
    pub p_capacity: Vec<f64>,
    pub s_rating: Vec<f64>,
}

impl CapacityState {
    pub fn from_fleet(fleet: &Fleet) -> Self {
        CapacityState {
            names: fleet.devices.iter().map(|d| d.name.clone()).collect(),
            p_capacity: fleet.devices.iter().map(|d| d.p_capacity).collect(),
            s_rating: fleet.devices.iter().map(|d| d.s_rating).collect(),
        }
    }

    pub fn q_capacity(&self, i: usize) -> f64 {
        q_capability(self.s_rating[i], self.p_capacity[i]).unwrap_or(0.0)
    }

    pub fn index(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownDevice(name.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapacityEvent {
    pub time: f64,
    pub device: String,
    pub p_capacity: f64,
}

/// Reactive headroom on the circular capability curve `√(S² − p²)`.
pub fn q_capability(s_rating: f64, p_capacity: f64) -> Result<f64> {
    if !(p_capacity >= 0.0) || p_capacity > s_rating {
        return Err(Error::CapacityExceedsRating { p_capacity, s_rating });
    }
    Ok(libm::sqrt(s_rating * s_rating - p_capacity * p_capacity))
}

/// Renormalizes low-pass DC gains on `channel` to the capacities and rebuilds the fleet.
pub fn update_dc_gains(fleet: &Fleet, caps: &CapacityState, channel: Channel) -> Result<Fleet> {
    let mut out = fleet.clone();
    for (d, (p, s)) in out.devices.iter_mut().zip(caps.p_capacity.iter().zip(&caps.s_rating)) {
        d.p_capacity = *p;
        d.s_rating = *s;
    }
    let lpf: Vec<usize> = (0..out.devices.len())
        .filter(|&i| {
            out.devices[i]
                .factor(channel)
                .is_some_and(|f| f.kind == FactorKind::Lpf)
        })
        .collect();
    if lpf.is_empty() {
        return Err(Error::AllCapacitiesZero);
    }
    let weights: Vec<f64> = lpf
        .iter()
        .map(|&i| match channel {
            Channel::Vq => caps.q_capacity(i),
            _ => caps.p_capacity[i],
        })
        .collect();
    let mu = proportional(&weights, 1.0)?;
    for (k, &i) in lpf.iter().enumerate() {
        let d = &mut out.devices[i];
        let slot = match channel {
            Channel::Vq => &mut d.factor_vq,
            _ => &mut d.factor_fp,
        };
        let f = slot.as_ref().unwrap();
        let mut g = f.with_mu(mu[k])?;
        g.channel = f.channel;
        *slot = Some(g);
    }
    out.recomplete(channel)?;
    out.realize()?;
    Ok(out)
}

/// Applies a capacity change and adapts both channels.
///
/// If no low-pass device has reactive headroom left the reactive gains are kept.
pub fn apply_capacity_event(
    fleet: &Fleet,
    caps: &CapacityState,
    event: &CapacityEvent,
) -> Result<(Fleet, CapacityState)> {
    let i = caps.index(&event.device)?;
    q_capability(caps.s_rating[i], event.p_capacity)?;
    if caps.p_capacity[i] == event.p_capacity {
        return Ok((fleet.clone(), caps.clone()));
    }
    let mut next = caps.clone();
    next.p_capacity[i] = event.p_capacity;
    let fp = update_dc_gains(fleet, &next, Channel::Fp)?;
    let both = match update_dc_gains(&fp, &next, Channel::Vq) {
        Ok(f) => f,
        Err(Error::AllCapacitiesZero) => fp,
        Err(e) => return Err(e),
    };
    Ok((both, next))
}

/// Magnitudes `|m_i^k(jω)|` per device and channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub omega: Vec<f64>,
    pub columns: Vec<(String, Vec<f64>)>,
    /// `|Σ_i m_i^k(jω) − 1|` per channel.
    pub sum_error: Vec<(Channel, Vec<f64>)>,
}

impl Snapshot {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("omega");
        for (n, _) in &self.columns {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for k in 0..self.omega.len() {
            out.push_str(&format_sci(self.omega[k]));
            for (_, c) in &self.columns {
                out.push(',');
                out.push_str(&format_sci(c[k]));
            }
            out.push('\n');
        }
        out
    }
}

pub fn adpf_snapshot(fleet: &Fleet, grid: &[f64]) -> Result<Snapshot> {
    let mut snap = Snapshot {
        omega: grid.to_vec(),
        columns: Vec::new(),
        sum_error: Vec::new(),
    };
    for (channel, tag) in [(Channel::Fp, "fp"), (Channel::Vq, "vq")] {
        let mut sums = alloc::vec![Complex64::new(0.0, 0.0); grid.len()];
        let mut any = false;
        for d in &fleet.devices {
            let Some(f) = d.factor(channel) else { continue };
            any = true;
            let mut col = Vec::with_capacity(grid.len());
            for (k, &w) in grid.iter().enumerate() {
                let v = f.eval(w)?;
                sums[k] += v;
                col.push(v.norm());
            }
            snap.columns.push((format!("{}:{tag}", d.name), col));
        }
        if any {
            snap.sum_error
                .push((channel, sums.iter().map(|s| (s - 1.0).norm()).collect()));
        }
    }
    Ok(snap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::case1;
    use crate::lti::logspace;
    use crate::network::coherent_response;

    fn mu(f: &Fleet, name: &str, ch: Channel) -> f64 {
        f.device(name).unwrap().factor(ch).unwrap().mu
    }

    #[test]
    fn gains_follow_capacities() {
        let fleet = case1();
        assert!((mu(&fleet, "wind", Channel::Fp) - 46.0 / 119.0).abs() < 1e-15);
        assert!((mu(&fleet, "wind", Channel::Fp) - 0.38655).abs() < 5e-6);
        assert!((mu(&fleet, "pv", Channel::Fp) - 0.61345).abs() < 5e-6);

        let mut caps = CapacityState::from_fleet(&fleet);
        caps.p_capacity[1] = 0.0;
        let f = update_dc_gains(&fleet, &caps, Channel::Fp).unwrap();
        assert_eq!(mu(&f, "wind", Channel::Fp), 1.0);
        assert_eq!(mu(&f, "pv", Channel::Fp), 0.0);
        assert!(f.device("pv").unwrap().ref_pf.is_none());

        caps.p_capacity[0] = 0.5;
        caps.p_capacity[1] = 0.5;
        let f = update_dc_gains(&fleet, &caps, Channel::Fp).unwrap();
        assert_eq!(mu(&f, "wind", Channel::Fp), mu(&f, "pv", Channel::Fp));

        caps.p_capacity[0] = 0.0;
        caps.p_capacity[1] = 0.0;
        assert_eq!(
            update_dc_gains(&fleet, &caps, Channel::Fp),
            Err(Error::AllCapacitiesZero)
        );
    }

    #[test]
    fn capability_curve() {
        assert_eq!(q_capability(1.0, 1.0).unwrap(), 0.0);
        assert_eq!(q_capability(1.0, 0.0).unwrap(), 1.0);
        let q = q_capability(0.73, 0.45).unwrap();
        assert!((q - libm::sqrt(0.73 * 0.73 - 0.45 * 0.45)).abs() < 1e-15);
        assert!((q - 0.574804).abs() < 1e-6);
        assert!(q_capability(0.5, 0.6).is_err());
    }

    #[test]
    fn pv_capacity_event() {
        let fleet = case1();
        let caps = CapacityState::from_fleet(&fleet);
        let ev = CapacityEvent {
            time: 1.0,
            device: "pv".to_string(),
            p_capacity: 0.45,
        };
        let (next, c2) = apply_capacity_event(&fleet, &caps, &ev).unwrap();
        assert_eq!(c2.p_capacity[1], 0.45);
        assert!(mu(&next, "pv", Channel::Fp) < mu(&fleet, "pv", Channel::Fp));
        assert!(mu(&next, "wind", Channel::Fp) > mu(&fleet, "wind", Channel::Fp));
        assert!((mu(&next, "pv", Channel::Fp) + mu(&next, "wind", Channel::Fp) - 1.0).abs() < 1e-15);
        assert!(mu(&next, "pv", Channel::Vq) > mu(&fleet, "pv", Channel::Vq));

        let before = coherent_response(&fleet).unwrap();
        let after = coherent_response(&next).unwrap();
        assert!(before.coefficient_distance(&after) < 1e-9);
        assert_ne!(fleet.device("pv").unwrap().ref_pf, next.device("pv").unwrap().ref_pf);

        let same = CapacityEvent {
            p_capacity: 0.73,
            ..ev.clone()
        };
        assert_eq!(apply_capacity_event(&fleet, &caps, &same).unwrap().0, fleet);
        let unknown = CapacityEvent {
            device: "hydro".to_string(),
            ..ev
        };
        assert_eq!(
            apply_capacity_event(&fleet, &caps, &unknown).err(),
            Some(Error::UnknownDevice("hydro".to_string()))
        );
    }

    #[test]
    fn snapshot_rows_sum_to_one() {
        let fleet = case1();
        let snap = adpf_snapshot(&fleet, &[1e-6, 1.0, 1e3, 1e5]).unwrap();
        let col = |n: &str| &snap.columns.iter().find(|(c, _)| c == n).unwrap().1;
        assert!((col("wind:fp")[0] - mu(&fleet, "wind", Channel::Fp)).abs() < 1e-5);
        assert!(col("bess:fp")[0] < 1e-5);
        assert!((col("bess:fp")[3] - 1.0).abs() < 1e-4);
        assert!(col("wind:fp")[3] < 1e-4);
        for (_, e) in &snap.sum_error {
            assert!(e.iter().all(|v| *v < 1e-9));
        }
        let grid = logspace(-2.0, 3.0, 20);
        let csv = adpf_snapshot(&fleet, &grid).unwrap().to_csv();
        assert_eq!(csv.lines().count(), 21);
    }
}
