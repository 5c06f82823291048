//! Closed-loop frequency interconnection of forming and following devices.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use super::dae::{DaeBuilder, OutputForm, Terms, Var};
use super::graph::Laplacian;
use crate::design::{Fleet, Role};
use crate::error::{Error, Result};
use crate::lti::{simulate_from, to_state_space, RationalTF, StateSpace, TimeSeries};

/// A device attached to a bus of the loop.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopDevice {
    pub name: String,
    pub bus: usize,
    pub role: Role,
    /// `T^pf` (forming) or `T^fp` (following); `None` when the device sits out.
    pub model: Option<RationalTF>,
    /// Weight in the centre-of-inertia average.
    pub coi_weight: f64,
    /// Static droop `q' = -k v` used by the coupled voltage network.
    pub q_droop: f64,
}

/// Voltage coupling of the rotated network: `p'_e += K_pv v`, `q'_e = K_qθ θ + K_qv v`.
#[derive(Debug, Clone, PartialEq)]
pub struct VoltageCoupling {
    pub k_pv: DMatrix<f64>,
    pub k_qtheta: DMatrix<f64>,
    pub k_qv: DMatrix<f64>,
}

/// Bus set and the map from angles (and voltages) to network power.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopNetwork {
    pub buses: Vec<String>,
    /// `p_e = K θ`; a Laplacian, already scaled to the angle units in use.
    pub k_ptheta: DMatrix<f64>,
    pub voltage: Option<VoltageCoupling>,
}

impl LoopNetwork {
    pub fn from_laplacian(lap: &Laplacian) -> Self {
        LoopNetwork {
            buses: lap.labels.clone(),
            k_ptheta: lap.l.clone(),
            voltage: None,
        }
    }
}

/// Reduced closed-loop model with the bookkeeping to move states between models.
#[derive(Debug, Clone)]
pub struct ClosedLoopModel {
    /// Model in deflated coordinates.
    pub ss: StateSpace,
    /// Tags of the physical state vector.
    pub tags: Vec<String>,
    /// Physical state from deflated state.
    pub lift: DMatrix<f64>,
    /// Deflated state from physical state.
    pub project: DMatrix<f64>,
    /// Synchronous direction removed by the deflation.
    pub zero_mode: DVector<f64>,
    pub buses: Vec<String>,
    pub devices: Vec<String>,
}

struct Realized {
    a: DMatrix<f64>,
    b: DVector<f64>,
    c: DVector<f64>,
    d: f64,
}

fn realize(name: &str, tf: &RationalTF) -> Result<Realized> {
    let ss = to_state_space(tf).map_err(|_| Error::ImproperDevice(name.to_string()))?;
    Ok(Realized {
        b: ss.b.column(0).into_owned(),
        c: ss.c.row(0).transpose(),
        d: ss.d[(0, 0)],
        a: ss.a,
    })
}

fn add_block(dae: &mut DaeBuilder, prefix: &str, r: &Realized, input: &[(Var, f64)]) -> Vec<usize> {
    let n = r.a.nrows();
    let idx: Vec<usize> = (0..n).map(|k| dae.state(format!("{prefix}{k}"))).collect();
    for i in 0..n {
        let mut terms: Terms = (0..n)
            .filter(|&j| r.a[(i, j)] != 0.0)
            .map(|j| (Var::X(idx[j]), r.a[(i, j)]))
            .collect();
        if r.b[i] != 0.0 {
            terms.extend(input.iter().map(|&(v, c)| (v, c * r.b[i])));
        }
        dae.derivative(idx[i], &terms);
    }
    idx
}

fn dot_states(idx: &[usize], c: &DVector<f64>, k: f64) -> Terms {
    idx.iter()
        .zip(c.iter())
        .filter(|(_, v)| **v != 0.0)
        .map(|(&i, &v)| (Var::X(i), v * k))
        .collect()
}

enum BusKind {
    Forming,
    Explicit,
    Implicit,
    Passive,
}

/// Assembles and deflates the closed loop.
///
/// Inputs are `pd:<bus>` (and `qd:<bus>` with voltage coupling); outputs are
/// `f:<bus>`, `p:<device>`, `f_coi`, `pe:<bus>` (network power), and `v:<bus>`, `q:<device>` with voltage coupling.
pub fn assemble_loop(net: &LoopNetwork, devices: &[LoopDevice]) -> Result<ClosedLoopModel> {
    let nb = net.buses.len();
    if net.k_ptheta.nrows() != nb || net.k_ptheta.ncols() != nb {
        return Err(Error::DimensionMismatch {
            expected: nb,
            found: net.k_ptheta.nrows(),
        });
    }
    let mut realized: Vec<Option<Realized>> = Vec::with_capacity(devices.len());
    for d in devices {
        if d.bus >= nb {
            return Err(Error::DimensionMismatch {
                expected: nb,
                found: d.bus + 1,
            });
        }
        realized.push(match &d.model {
            Some(m) if !m.is_zero() => Some(realize(&d.name, m)?),
            _ => None,
        });
    }

    let mut kinds = Vec::with_capacity(nb);
    for b in 0..nb {
        let at: Vec<usize> = (0..devices.len())
            .filter(|&i| devices[i].bus == b && realized[i].is_some())
            .collect();
        let forming: Vec<usize> = at
            .iter()
            .copied()
            .filter(|&i| devices[i].role == Role::Forming)
            .collect();
        if forming.len() > 1 {
            return Err(Error::MultipleFormingAtBus(net.buses[b].clone()));
        }
        let kind = if !forming.is_empty() {
            BusKind::Forming
        } else if at.is_empty() {
            BusKind::Passive
        } else {
            let ds: Vec<f64> = at.iter().map(|&i| realized[i].as_ref().unwrap().d).collect();
            let sum: f64 = ds.iter().sum();
            if ds.iter().all(|d| *d == 0.0) {
                BusKind::Implicit
            } else if sum != 0.0 {
                BusKind::Explicit
            } else {
                return Err(Error::ImproperDevice(net.buses[b].clone()));
            }
        };
        kinds.push(kind);
    }

    let mut dae = DaeBuilder::default();
    let pd: Vec<usize> = net.buses.iter().map(|b| dae.input(format!("pd:{b}"))).collect();
    let qd: Vec<usize> = if net.voltage.is_some() {
        net.buses.iter().map(|b| dae.input(format!("qd:{b}"))).collect()
    } else {
        Vec::new()
    };

    // Angles: states where a frequency is imposed, algebraic elsewhere.
    let mut theta = Vec::with_capacity(nb);
    let mut freq: Vec<Option<usize>> = vec![None; nb];
    let mut zero_mode_entries: Vec<(usize, f64)> = Vec::new();
    for b in 0..nb {
        let tag = format!("th:{}", net.buses[b]);
        match kinds[b] {
            BusKind::Forming | BusKind::Explicit => {
                let x = dae.state(tag);
                let f = dae.alg(format!("f:{}", net.buses[b]));
                dae.derivative(x, &[(Var::Y(f), 1.0)]);
                freq[b] = Some(f);
                zero_mode_entries.push((x, 1.0));
                theta.push(Var::X(x));
            }
            _ => theta.push(Var::Y(dae.alg(tag))),
        }
    }
    let volt: Vec<usize> = if net.voltage.is_some() {
        net.buses.iter().map(|b| dae.alg(format!("v:{b}"))).collect()
    } else {
        Vec::new()
    };

    // Network power at each bus.
    let pe: Vec<usize> = net.buses.iter().map(|b| dae.alg(format!("pe:{b}"))).collect();
    for b in 0..nb {
        let mut t: Terms = vec![(Var::Y(pe[b]), -1.0)];
        for j in 0..nb {
            let k = net.k_ptheta[(b, j)];
            if k != 0.0 {
                t.push((theta[j], k));
            }
        }
        if let Some(vc) = &net.voltage {
            for j in 0..nb {
                if vc.k_pv[(b, j)] != 0.0 {
                    t.push((Var::Y(volt[j]), vc.k_pv[(b, j)]));
                }
            }
        }
        dae.equation(t);
    }

    // Device dynamics; `p_out[i]` holds each device's injection as a linear form.
    let mut p_out: Vec<Terms> = vec![Terms::new(); devices.len()];
    let mut follow_p: Vec<Vec<usize>> = vec![Vec::new(); nb];
    let mut forming_u: Vec<Option<usize>> = vec![None; nb];
    for (i, d) in devices.iter().enumerate() {
        let Some(r) = &realized[i] else { continue };
        let b = d.bus;
        match (d.role, &kinds[b]) {
            (Role::Forming, _) => {
                let u = dae.alg(format!("u:{}", d.name));
                let x = add_block(&mut dae, &format!("x:{}:", d.name), r, &[(Var::Y(u), 1.0)]);
                let f = freq[b].unwrap();
                let mut t = dot_states(&x, &r.c, 1.0);
                t.push((Var::Y(f), -1.0));
                if r.d != 0.0 {
                    t.push((Var::Y(u), r.d));
                }
                dae.equation(t);
                forming_u[b] = Some(u);
                p_out[i] = vec![(Var::Y(u), -1.0)];
            }
            (Role::Following, BusKind::Implicit) => {
                let Var::Y(th) = theta[b] else { unreachable!() };
                let ab = &r.a * &r.b;
                let cb = r.c.dot(&r.b);
                let w = add_block(&mut dae, &format!("w:{}:", d.name), r, &[]);
                for (k, &wi) in w.iter().enumerate() {
                    if ab[k] != 0.0 {
                        dae.derivative(wi, &[(Var::Y(th), ab[k])]);
                    }
                    if r.b[k] != 0.0 {
                        zero_mode_entries.push((wi, -r.b[k]));
                    }
                }
                let p = dae.alg(format!("p:{}", d.name));
                let mut t = dot_states(&w, &r.c, -1.0);
                t.push((Var::Y(p), -1.0));
                t.push((Var::Y(th), -cb));
                dae.equation(t);
                follow_p[b].push(p);
                p_out[i] = vec![(Var::Y(p), 1.0)];
            }
            (Role::Following, _) => {
                let f = freq[b].unwrap();
                let z = add_block(&mut dae, &format!("z:{}:", d.name), r, &[(Var::Y(f), 1.0)]);
                let p = dae.alg(format!("p:{}", d.name));
                let mut t = dot_states(&z, &r.c, -1.0);
                t.push((Var::Y(p), -1.0));
                if r.d != 0.0 {
                    t.push((Var::Y(f), -r.d));
                }
                dae.equation(t);
                follow_p[b].push(p);
                p_out[i] = vec![(Var::Y(p), 1.0)];
            }
        }
    }

    // Active power balance per bus.
    for b in 0..nb {
        let mut t: Terms = vec![(Var::U(pd[b]), 1.0), (Var::Y(pe[b]), -1.0)];
        t.extend(follow_p[b].iter().map(|&p| (Var::Y(p), 1.0)));
        if let Some(u) = forming_u[b] {
            t.push((Var::Y(u), -1.0));
        }
        dae.equation(t);
    }

    // Reactive balance with static droops on the rotated network.
    if let Some(vc) = &net.voltage {
        for b in 0..nb {
            let droop: f64 = devices.iter().filter(|d| d.bus == b).map(|d| d.q_droop).sum();
            let mut t: Terms = vec![(Var::U(qd[b]), 1.0)];
            if droop != 0.0 {
                t.push((Var::Y(volt[b]), -droop));
            }
            for j in 0..nb {
                if vc.k_qtheta[(b, j)] != 0.0 {
                    t.push((theta[j], -vc.k_qtheta[(b, j)]));
                }
                if vc.k_qv[(b, j)] != 0.0 {
                    t.push((Var::Y(volt[j]), -vc.k_qv[(b, j)]));
                }
            }
            dae.equation(t);
        }
    }

    // Outputs.
    let f_form = |b: usize| -> OutputForm {
        match freq[b] {
            Some(f) => OutputForm {
                direct: vec![(Var::Y(f), 1.0)],
                deriv: Vec::new(),
            },
            None => OutputForm {
                direct: Vec::new(),
                deriv: vec![(theta[b], 1.0)],
            },
        }
    };
    for b in 0..nb {
        dae.output(format!("f:{}", net.buses[b]), f_form(b));
    }
    for (i, d) in devices.iter().enumerate() {
        dae.output(
            format!("p:{}", d.name),
            OutputForm {
                direct: p_out[i].clone(),
                deriv: Vec::new(),
            },
        );
    }
    let wsum: f64 = devices.iter().map(|d| d.coi_weight).sum();
    let mut coi = OutputForm::default();
    if wsum > 0.0 {
        for d in devices {
            let f = f_form(d.bus);
            let k = d.coi_weight / wsum;
            coi.direct.extend(f.direct.iter().map(|&(v, c)| (v, c * k)));
            coi.deriv.extend(f.deriv.iter().map(|&(v, c)| (v, c * k)));
        }
    }
    dae.output("f_coi".to_string(), coi);
    for b in 0..nb {
        dae.output(
            format!("pe:{}", net.buses[b]),
            OutputForm {
                direct: vec![(Var::Y(pe[b]), 1.0)],
                deriv: Vec::new(),
            },
        );
    }
    if net.voltage.is_some() {
        for b in 0..nb {
            dae.output(
                format!("v:{}", net.buses[b]),
                OutputForm {
                    direct: vec![(Var::Y(volt[b]), 1.0)],
                    deriv: Vec::new(),
                },
            );
        }
        for d in devices {
            dae.output(
                format!("q:{}", d.name),
                OutputForm {
                    direct: vec![(Var::Y(volt[d.bus]), -d.q_droop)],
                    deriv: Vec::new(),
                },
            );
        }
    }

    let asm = dae.assemble()?;
    let n = asm.ss.n_states();
    let mut v0 = DVector::zeros(n);
    for (k, v) in zero_mode_entries {
        v0[k] = v;
    }
    deflate(
        asm.ss,
        v0,
        net.buses.clone(),
        devices.iter().map(|d| d.name.clone()).collect(),
    )
}

/// Removes the synchronous direction `v0` (`A v0 = 0`, `C v0 = 0`) from the state.
fn deflate(ss: StateSpace, v0: DVector<f64>, buses: Vec<String>, devices: Vec<String>) -> Result<ClosedLoopModel> {
    let n = ss.n_states();
    let tags = ss.states.clone();
    let vmax = v0.amax();
    if n == 0 || vmax == 0.0 {
        return Ok(ClosedLoopModel {
            lift: DMatrix::identity(n, n),
            project: DMatrix::identity(n, n),
            zero_mode: v0,
            tags,
            ss,
            buses,
            devices,
        });
    }
    let k = (0..n).find(|&i| v0[i].abs() == vmax).unwrap();
    let mut pi = DMatrix::identity(n, n);
    for i in 0..n {
        pi[(i, k)] -= v0[i] / v0[k];
    }
    let keep: Vec<usize> = (0..n).filter(|&i| i != k).collect();
    let project = DMatrix::from_fn(n - 1, n, |r, c| pi[(keep[r], c)]);
    let lift = DMatrix::from_fn(n, n - 1, |r, c| if r == keep[c] { 1.0 } else { 0.0 });
    let a = &project * &ss.a * &lift;
    let b = &project * &ss.b;
    let c = &ss.c * &lift;
    let mut red = StateSpace::new(a, b, c, ss.d.clone())?.with_labels(ss.inputs.clone(), ss.outputs.clone())?;
    red.states = keep.iter().map(|&i| tags[i].clone()).collect();
    Ok(ClosedLoopModel {
        ss: red,
        tags,
        lift,
        project,
        zero_mode: v0,
        buses,
        devices,
    })
}

impl ClosedLoopModel {
    pub fn n_states(&self) -> usize {
        self.ss.n_states()
    }

    pub fn is_stable(&self) -> bool {
        self.ss.n_states() == 0 || self.ss.is_stable()
    }

    /// Carries a deflated state of `from` over to this model by matching physical state tags.
    pub fn handoff(&self, from: &ClosedLoopModel, xi: &DVector<f64>) -> DVector<f64> {
        let full = &from.lift * xi;
        let mut x = DVector::zeros(self.tags.len());
        for (i, tag) in self.tags.iter().enumerate() {
            if let Some(j) = from.tags.iter().position(|t| t == tag) {
                x[i] = full[j];
            }
        }
        &self.project * x
    }

    /// Steady-state outputs for constant inputs.
    pub fn steady_state(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        self.ss.dc_output(u)
    }

    pub fn input_index(&self, name: &str) -> Result<usize> {
        self.ss
            .inputs
            .iter()
            .position(|i| i == name)
            .ok_or_else(|| Error::MissingChannel(name.to_string()))
    }
}

/// Closed loop with one bus per device, in fleet order.
pub fn build_frequency_loop(fleet: &Fleet, lap: &Laplacian) -> Result<ClosedLoopModel> {
    let n = fleet.devices.len();
    if lap.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: lap.n(),
        });
    }
    let devices = fleet_devices(fleet, &|i| Ok(i))?;
    let net = LoopNetwork {
        buses: fleet.devices.iter().map(|d| d.name.clone()).collect(),
        k_ptheta: lap.l.clone(),
        voltage: None,
    };
    assemble_loop(&net, &devices)
}

/// Loop devices for a fleet, placing device `i` on bus `bus_of(i)`.
///
/// COI weights split the aggregate inertia coefficient by rating.
pub fn fleet_devices(fleet: &Fleet, bus_of: &dyn Fn(usize) -> Result<usize>) -> Result<Vec<LoopDevice>> {
    let total: f64 = fleet.devices.iter().map(|d| d.rating).sum();
    let h = fleet.desired.tf_pf.den().get(1).copied().unwrap_or(0.0) / fleet.desired.tf_pf.num()[0];
    let mut out = Vec::with_capacity(fleet.devices.len());
    for (i, d) in fleet.devices.iter().enumerate() {
        if d.participates_fp() && d.ref_pf.is_none() {
            return Err(Error::UnrealizedDevice(d.name.clone()));
        }
        let share = if total > 0.0 {
            d.rating / total
        } else {
            1.0 / fleet.devices.len() as f64
        };
        out.push(LoopDevice {
            name: d.name.clone(),
            bus: bus_of(i)?,
            role: d.role,
            model: d.ref_pf.clone(),
            coi_weight: if h > 0.0 { h * share } else { share },
            q_droop: 0.0,
        });
    }
    Ok(out)
}

/// One segment of a piecewise simulation.
#[derive(Debug, Clone)]
pub struct Segment<'a> {
    pub model: &'a ClosedLoopModel,
    /// Input samples for this segment, starting at the switching instant.
    pub input: TimeSeries,
}

/// Runs segments back to back, handing the state over at each boundary.
pub fn simulate_piecewise(segments: &[Segment<'_>], dt: f64) -> Result<TimeSeries> {
    let mut out = TimeSeries {
        t: Vec::new(),
        channels: Vec::new(),
    };
    let mut prev: Option<(&ClosedLoopModel, DVector<f64>)> = None;
    for seg in segments {
        let x0 = match &prev {
            Some((m, x)) => seg.model.handoff(m, x),
            None => DVector::zeros(seg.model.n_states()),
        };
        let (ts, xf) = simulate_from(&seg.model.ss, &seg.input, dt, &x0)?;
        out.append(&ts)?;
        prev = Some((seg.model, xf));
    }
    Ok(out)
}
