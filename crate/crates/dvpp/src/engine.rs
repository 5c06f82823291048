//! Drivers behind the `run`, `verify`, `bode` and `montecarlo` commands.

use dvpp_core::adaptation::{adpf_snapshot, apply_capacity_event, update_dc_gains, CapacityEvent, CapacityState};
use dvpp_core::design::{
    aggregation_errors, build_fleet, check_participation, hybrid_split, make_tdes, Channel, DesignOptions, DeviceInput,
    Fleet, Role,
};
use dvpp_core::lti::{format_sci, logspace, simulate, simulate_from, to_state_space, RationalTF, TimeSeries};
use dvpp_core::network::{
    assemble_loop, coherent_response, fleet_devices, simulate_piecewise, ClosedLoopModel, LoopDevice, LoopNetwork,
    NetworkGraph, Segment,
};
use dvpp_core::spatial::{build_area_model, sample_rx, AreaModel, PlantMode, RotationParams};
use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::DvppError;
use crate::metrics::{compute_metrics, Check, MetricsReport};
use crate::scenario::{Event, Machine, MonteCarlo, Scenario};

type Result<T> = std::result::Result<T, DvppError>;

/// Frequency band in which following devices must match the specification.
pub const HYBRID_BAND: f64 = 10.0;
pub const HYBRID_TOL: f64 = 1e-3;
/// Line susceptance from which the fleet is expected to follow the specification trace.
pub const COHERENT_SUSCEPTANCE: f64 = 10.0;

pub fn default_grid() -> Vec<f64> {
    logspace(-2.0, 3.0, 200)
}

/// Designs the fleet, including the forming/following split when `epsilon` is set.
pub fn design(sc: &Scenario) -> Result<Fleet> {
    let t = &sc.tdes;
    let desired = make_tdes(t.h_p, t.d_p, t.d_q)?;
    let opts = DesignOptions {
        tau_pll: t.tau_pll,
        pll_order: t.pll_order,
        tau_aug: t.tau_aug,
        ..DesignOptions::default()
    };
    let inputs: Vec<DeviceInput> = sc
        .devices
        .iter()
        .map(|d| DeviceInput {
            name: d.name.clone(),
            bus: d.bus.clone(),
            role: d.role,
            shape: d.shape,
            tau: d.tau,
            mu: d.mu,
            rating: d.rating,
            tau_dc: d.tau_dc,
            p_capacity: d.p_capacity,
        })
        .collect();
    let fleet = build_fleet(desired, &inputs, sc.system.base_mva, opts)?;
    Ok(match sc.system.epsilon {
        Some(e) => hybrid_split(&fleet, e)?,
        None => fleet,
    })
}

pub fn graph(sc: &Scenario) -> Result<NetworkGraph> {
    let mut g = NetworkGraph::with_nodes(&sc.network.buses());
    for l in &sc.network.lines {
        g.add_edge(&l.from, &l.to, l.b, l.rx.or(sc.network.rx))?;
    }
    Ok(g)
}

/// `1/(2H s + D)` on the system base.
pub fn machine_model(m: &Machine, base_mva: f64) -> Result<RationalTF> {
    let s = m.rating / base_mva;
    Ok(RationalTF::new(&[1.0], &[s / m.droop, 2.0 * m.h * s])?)
}

/// Everything that changes when events fire.
#[derive(Debug, Clone)]
struct PlantState {
    fleet: Fleet,
    caps: CapacityState,
    machines: Vec<bool>,
}

impl PlantState {
    fn has_forming(&self) -> bool {
        self.machines.iter().any(|a| *a)
            || self
                .fleet
                .devices
                .iter()
                .any(|d| d.role == Role::Forming && d.participates_fp())
    }
}

fn model(sc: &Scenario, g: &NetworkGraph, st: &PlantState, mode: &PlantMode) -> Result<ClosedLoopModel> {
    let omega_b = sc.system.omega_b();
    if sc.network.is_area() {
        let mut area = AreaModel::new(
            g.clone(),
            st.fleet.clone(),
            sc.network.pocs.clone(),
            sc.network.rx,
            omega_b,
        )?;
        area.q_droop = sc.tdes.q_droop_factor / sc.tdes.d_q;
        return Ok(build_area_model(&area, mode)?);
    }
    let lap = g.weighted_laplacian(|e| e.b)?.scaled(omega_b);
    let fleet = &st.fleet;
    let mut devices = fleet_devices(fleet, &|i| g.require(&fleet.devices[i].bus))?;
    for (m, active) in sc.machines.iter().zip(&st.machines) {
        let s = m.rating / sc.system.base_mva;
        devices.push(LoopDevice {
            name: m.name.clone(),
            bus: g.require(&m.bus)?,
            role: Role::Forming,
            model: if *active {
                Some(machine_model(m, sc.system.base_mva)?)
            } else {
                None
            },
            coi_weight: 2.0 * m.h * s,
            q_droop: 0.0,
        });
    }
    Ok(assemble_loop(&LoopNetwork::from_laplacian(&lap), &devices)?)
}

/// Closed loop of the scenario before any event fires.
pub fn closed_loop(sc: &Scenario) -> Result<ClosedLoopModel> {
    let g = graph(sc)?;
    let fleet = design(sc)?;
    let st = PlantState {
        caps: CapacityState::from_fleet(&fleet),
        fleet,
        machines: vec![true; sc.machines.len()],
    };
    model(sc, &g, &st, &PlantMode::Strict)
}

/// Takes a device out of the fleet; the remaining complement devices absorb its share.
fn remove_device(st: &mut PlantState, name: &str) -> Result<()> {
    let i = st.caps.index(name)?;
    st.caps.p_capacity[i] = 0.0;
    st.caps.s_rating[i] = 0.0;
    for ch in [Channel::Fp, Channel::Vq] {
        match update_dc_gains(&st.fleet, &st.caps, ch) {
            Ok(f) => st.fleet = f,
            Err(dvpp_core::Error::AllCapacitiesZero) => {}
            Err(e) => return Err(e.into()),
        }
    }
    let d = &mut st.fleet.devices[i];
    d.factor_fp = d.factor_fp.as_ref().map(|f| f.scaled(0.0));
    d.factor_vq = d.factor_vq.as_ref().map(|f| f.scaled(0.0));
    st.fleet.recomplete(Channel::Fp)?;
    st.fleet.recomplete(Channel::Vq)?;
    st.fleet.realize()?;
    Ok(())
}

/// Simulated traces plus what happened along the way.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub series: TimeSeries,
    pub stable: bool,
    /// Sum of all injections applied, per sample.
    pub total_injection: Vec<f64>,
    pub notes: Vec<String>,
    pub final_fleet: Fleet,
    /// Fleet in force on each span, with the first and last sample of the span.
    pub spans: Vec<(Fleet, usize, usize)>,
}

fn steps(t: f64, dt: f64) -> usize {
    (t / dt).round() as usize
}

/// Piecewise-constant simulation of the event list.
pub fn simulate_scenario(sc: &Scenario, mode: &PlantMode) -> Result<Simulation> {
    let dt = sc.system.dt;
    let g = graph(sc)?;
    let fleet = design(sc)?;
    let mut st = PlantState {
        caps: CapacityState::from_fleet(&fleet),
        fleet,
        machines: vec![true; sc.machines.len()],
    };
    let buses = g.nodes.clone();
    let mut pd = vec![0.0; buses.len()];
    let mut notes = Vec::new();

    let mut models = vec![model(sc, &g, &st, mode)?];
    let mut fleets = vec![st.fleet.clone()];
    // (model index, first step, last step, injections)
    let mut spans: Vec<(usize, usize, usize, Vec<f64>)> = Vec::new();
    let k_end = steps(sc.system.t_end, dt);
    let mut k0 = 0;
    let mut i = 0;
    while i < sc.events.len() {
        let k = steps(sc.events[i].time(), dt).min(k_end);
        if k > k0 {
            spans.push((models.len() - 1, k0, k, pd.clone()));
            k0 = k;
        }
        let mut rebuild = false;
        while i < sc.events.len() && steps(sc.events[i].time(), dt).min(k_end) == k {
            match &sc.events[i] {
                Event::Load { bus, dp, .. } => pd[g.require(bus)?] += dp,
                Event::Capacity { t, device, p_capacity } => {
                    let j = st.caps.index(device)?;
                    let old = st.caps.p_capacity[j];
                    let ev = CapacityEvent {
                        time: *t,
                        device: device.clone(),
                        p_capacity: *p_capacity,
                    };
                    let (f, c) = apply_capacity_event(&st.fleet, &st.caps, &ev)?;
                    st.fleet = f;
                    st.caps = c;
                    let bus = &st.fleet.devices[st.fleet.index_of(device)?].bus;
                    pd[g.require(bus)?] += p_capacity - old;
                    rebuild = true;
                }
                Event::Outage { t, device } => {
                    if let Some(m) = sc.machines.iter().position(|m| &m.name == device) {
                        st.machines[m] = false;
                    } else {
                        remove_device(&mut st, device)?;
                    }
                    if !st.has_forming() {
                        return Err(DvppError::NoFormingDevice(format!("outage of `{device}` at t = {t}")));
                    }
                    rebuild = true;
                    notes.push(format!("outage of `{device}` at t = {t}"));
                }
            }
            i += 1;
        }
        if rebuild {
            models.push(model(sc, &g, &st, mode)?);
            fleets.push(st.fleet.clone());
            let m = models.last().unwrap();
            let mut u = DVector::zeros(m.ss.n_inputs());
            for (b, v) in buses.iter().zip(&pd) {
                u[m.input_index(&format!("pd:{b}"))?] = *v;
            }
            if let Ok(y) = m.steady_state(&u) {
                if let Some(j) = m.ss.output_index("f_coi") {
                    notes.push(format!(
                        "operating point from t = {}: f_coi -> {}",
                        k as f64 * dt,
                        format_sci(y[j])
                    ));
                }
            }
        }
    }
    if k_end > k0 || spans.is_empty() {
        spans.push((models.len() - 1, k0, k_end.max(k0), pd.clone()));
    }

    let stable = models.iter().all(|m| m.is_stable());
    let inputs: Vec<TimeSeries> = spans
        .iter()
        .map(|(_, a, b, pd)| {
            let mut ts = TimeSeries::uniform(*a as f64 * dt, dt, b - a + 1);
            for (bus, v) in buses.iter().zip(pd) {
                if *v != 0.0 {
                    ts.channels.push((format!("pd:{bus}"), vec![*v; b - a + 1]));
                }
            }
            ts
        })
        .collect();
    let segments: Vec<Segment<'_>> = spans
        .iter()
        .zip(inputs)
        .map(|((m, ..), input)| Segment {
            model: &models[*m],
            input,
        })
        .collect();
    let series = simulate_piecewise(&segments, dt)?;

    let mut total_injection = vec![0.0; series.len()];
    for (_, a, b, pd) in &spans {
        let s: f64 = pd.iter().sum();
        for v in &mut total_injection[*a..=*b] {
            *v = s;
        }
    }
    Ok(Simulation {
        series,
        stable,
        total_injection,
        notes,
        final_fleet: st.fleet,
        spans: spans.iter().map(|(m, a, b, _)| (fleets[*m].clone(), *a, *b)).collect(),
    })
}

/// Frequency predicted by the coherent response of the fleet in force, driven by the
/// total fleet output. Power channels are `p':` in an area and `p:` otherwise.
pub fn aggregate_trace(sim: &Simulation, area: bool) -> Result<Vec<f64>> {
    let prefix = if area { "p':" } else { "p:" };
    let dt = sim.series.dt().unwrap_or(1.0);
    let mut out = Vec::with_capacity(sim.series.len());
    let mut x: Option<DVector<f64>> = None;
    for (fleet, a, b) in &sim.spans {
        let mut drive = vec![0.0; b - a + 1];
        for d in &fleet.devices {
            let p = sim.series.require(&format!("{prefix}{}", d.name))?;
            for (v, p) in drive.iter_mut().zip(&p[*a..=*b]) {
                *v -= p;
            }
        }
        let mut ss = to_state_space(&coherent_response(fleet)?)?;
        ss.inputs = vec!["p".into()];
        let input = TimeSeries::uniform(*a as f64 * dt, dt, drive.len()).with_channel("p", drive)?;
        let x0 = match x.take() {
            Some(x) if x.len() == ss.n_states() => x,
            _ => DVector::zeros(ss.n_states()),
        };
        let (ts, xf) = simulate_from(&ss, &input, dt, &x0)?;
        let y = &ts.channels[0].1;
        // Shared boundary samples belong to the later span.
        out.truncate(*a);
        out.extend_from_slice(y);
        x = Some(xf);
    }
    Ok(out)
}

/// Traces of a run and the report on them.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub series: TimeSeries,
    pub report: MetricsReport,
}

impl RunOutput {
    /// The requested output channels (all when none were requested).
    pub fn selected(&self, outputs: &[String]) -> Result<TimeSeries> {
        if outputs.is_empty() {
            return Ok(self.series.clone());
        }
        let mut ts = TimeSeries {
            t: self.series.t.clone(),
            channels: Vec::new(),
        };
        for name in outputs {
            let data = self
                .series
                .get(name)
                .ok_or_else(|| DvppError::Unsupported(format!("unknown output channel `{name}`")))?;
            ts.channels.push((name.clone(), data.to_vec()));
        }
        Ok(ts)
    }
}

fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

fn l2(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn run(sc: &Scenario) -> Result<RunOutput> {
    let sim = simulate_scenario(sc, &PlantMode::Strict)?;
    let f_agg = aggregate_trace(&sim, sc.network.is_area())?;
    let mut series = sim.series;
    series.push("f_agg", f_agg)?;
    let mut checks = vec![Check::flag("stable", sim.stable)];

    // Reference: the specification driven by the total disturbance it is meant to absorb.
    if sc.machines.is_empty() {
        let tf = sim.final_fleet.desired.tf_pf.clone();
        let mut ss = to_state_space(&tf)?;
        ss.inputs = vec!["p".into()];
        ss.outputs = vec!["f_des".into()];
        let scale = match sc.network.rx {
            Some(r) if sc.network.is_area() => RotationParams::from_ratio(r)?.cos(),
            _ => 1.0,
        };
        let u = TimeSeries {
            t: series.t.clone(),
            channels: vec![("p".into(), sim.total_injection.iter().map(|v| v * scale).collect())],
        };
        let f_des = simulate(&ss, &u, sc.system.dt)?.channels.remove(0).1;
        let f = series.require("f_coi")?;
        let peak = f_des.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let norm = l2(&f_des);
        if norm > 0.0 {
            let gap: Vec<f64> = f.iter().zip(&f_des).map(|(a, b)| a - b).collect();
            let gap = l2(&gap) / norm;
            if sc.network.lines.iter().all(|l| l.b >= COHERENT_SUSCEPTANCE) {
                checks.push(Check::below("trace_match", gap, sc.system.trace_tol));
            } else {
                checks.push(Check::info("trace_match", gap));
            }
            checks.push(Check::info("trace_linf", linf(f, &f_des) / peak));
        }
        series.push("f_des", f_des)?;
    }

    let mut report = compute_metrics(&series, sc.total_load_step())?;
    for d in &sim.final_fleet.devices {
        let Some(p) = series.get(&format!("p:{}", d.name)) else {
            continue;
        };
        let peak = p.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if d.p_capacity > 0.0 && peak > d.p_capacity {
            report.notes.push(format!(
                "`{}` peaks at {} pu above its capacity {} pu",
                d.name,
                format_sci(peak),
                format_sci(d.p_capacity)
            ));
        }
    }
    report.checks.extend(checks);
    report.notes.extend(sim.notes);
    Ok(RunOutput { series, report })
}

/// Participation, DC-gain and aggregation residuals of the designed fleet.
pub fn verify(sc: &Scenario) -> Result<MetricsReport> {
    let grid = default_grid();
    let fleet = design(sc)?;
    let tol = sc.system.residual_tol;
    let mut report = MetricsReport::default();
    for (ch, tag) in [(Channel::Fp, "fp"), (Channel::Vq, "vq")] {
        let r = check_participation(&fleet, ch, &grid)?;
        report
            .checks
            .push(Check::below(format!("participation_{tag}"), r.max_deviation, tol));
        report
            .checks
            .push(Check::below(format!("dc_gain_{tag}"), r.dc_residual, tol));
    }
    let errs = aggregation_errors(&fleet, &grid)?;
    let worst = |v: &[f64], keep: &dyn Fn(f64) -> bool| {
        errs.omega
            .iter()
            .zip(v)
            .filter(|(w, _)| keep(**w))
            .fold(0.0f64, |m, (_, e)| m.max(*e))
    };
    let hybrid = fleet.devices.iter().any(|d| d.role == Role::Following);
    if hybrid {
        let pll = 1.0 / fleet.opts.tau_pll;
        let band = |w: f64| w <= HYBRID_BAND;
        report
            .checks
            .push(Check::below("hybrid_freq", worst(&errs.freq, &band), HYBRID_TOL));
        report
            .checks
            .push(Check::below("hybrid_volt", worst(&errs.volt, &band), HYBRID_TOL));
        report
            .checks
            .push(Check::info("freq_above_pll", worst(&errs.freq, &|w| w > pll)));
        report
            .checks
            .push(Check::info("volt_above_pll", worst(&errs.volt, &|w| w > pll)));
    } else {
        report
            .checks
            .push(Check::below("aggregation_freq", worst(&errs.freq, &|_| true), tol));
        report
            .checks
            .push(Check::below("aggregation_volt", worst(&errs.volt, &|_| true), tol));
    }

    let mut st = PlantState {
        caps: CapacityState::from_fleet(&fleet),
        fleet,
        machines: vec![true; sc.machines.len()],
    };
    let mut forming = st.has_forming();
    if !forming {
        report.notes.push("no forming device present".into());
    }
    for e in &sc.events {
        if let Event::Outage { t, device } = e {
            if let Some(m) = sc.machines.iter().position(|m| &m.name == device) {
                st.machines[m] = false;
            } else {
                remove_device(&mut st, device)?;
            }
            if forming && !st.has_forming() {
                forming = false;
                report.notes.push(format!(
                    "no forming device present after outage of `{device}` at t = {t}"
                ));
            }
        }
    }
    report.checks.push(Check::flag("forming_present", forming));
    Ok(report)
}

/// Magnitude and phase of the specification and the coherent aggregate, plus every factor.
pub fn bode(sc: &Scenario, wmin: f64, wmax: f64, points: usize) -> Result<String> {
    if !(wmin > 0.0 && wmax > wmin && points >= 2) {
        return Err(DvppError::Unsupported(
            "bode needs 0 < wmin < wmax and at least 2 points".into(),
        ));
    }
    let grid = logspace(wmin.log10(), wmax.log10(), points);
    let fleet = design(sc)?;
    let agg = coherent_response(&fleet)?;
    let snap = adpf_snapshot(&fleet, &grid)?;
    let mut out = String::from("omega,tdes_mag,tdes_phase_deg,agg_mag,agg_phase_deg");
    for (n, _) in &snap.columns {
        out.push(',');
        out.push_str(n);
    }
    out.push('\n');
    for (k, &w) in grid.iter().enumerate() {
        let t = fleet.desired.tf_pf.freq(w)?;
        let a = agg.freq(w)?;
        let row = [w, t.norm(), t.arg().to_degrees(), a.norm(), a.arg().to_degrees()];
        let cells: Vec<String> = row
            .iter()
            .copied()
            .chain(snap.columns.iter().map(|(_, c)| c[k]))
            .map(format_sci)
            .collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct McSample {
    pub index: usize,
    pub rx: Vec<f64>,
    pub stable: bool,
    /// Largest POC frequency deviation from the homogeneous baseline.
    pub max_deviation: f64,
    pub report: MetricsReport,
    pub series: TimeSeries,
}

#[derive(Debug, Clone)]
pub struct McOutput {
    pub baseline: TimeSeries,
    pub samples: Vec<McSample>,
    pub pocs: Vec<String>,
}

impl McOutput {
    pub fn summary_csv(&self) -> String {
        let peaks: Vec<&str> = self
            .samples
            .first()
            .map(|s| s.report.peaks.iter().map(|(n, _)| n.as_str()).collect())
            .unwrap_or_default();
        let n_lines = self.samples.first().map_or(0, |s| s.rx.len());
        let mut out = String::from("sample,stable,max_dev_f_poc");
        for p in &peaks {
            out.push_str(&format!(",peak_{p}"));
        }
        for l in 0..n_lines {
            out.push_str(&format!(",rx_{l}"));
        }
        out.push('\n');
        for s in &self.samples {
            out.push_str(&format!(
                "{},{},{}",
                s.index,
                u8::from(s.stable),
                format_sci(s.max_deviation)
            ));
            for (_, v) in &s.report.peaks {
                out.push(',');
                out.push_str(&format_sci(*v));
            }
            for r in &s.rx {
                out.push(',');
                out.push_str(&format_sci(*r));
            }
            out.push('\n');
        }
        out
    }

    pub fn max_deviation(&self) -> f64 {
        self.samples.iter().fold(0.0f64, |m, s| m.max(s.max_deviation))
    }
}

/// Runs the homogeneous design against sampled per-line R/X plants.
pub fn montecarlo(sc: &Scenario, samples: Option<usize>, seed: Option<u64>) -> Result<McOutput> {
    if !sc.network.is_area() {
        return Err(DvppError::Unsupported(
            "montecarlo needs an area with points of coupling".into(),
        ));
    }
    let base = sc.montecarlo.unwrap_or(MonteCarlo {
        samples: 24,
        min: 0.4,
        max: 2.0,
        seed: 0,
    });
    let mc = MonteCarlo {
        samples: samples.unwrap_or(base.samples),
        seed: seed.unwrap_or(base.seed),
        ..base
    };
    let baseline = simulate_scenario(sc, &PlantMode::Strict)?.series;
    let draws = sample_rx(mc.min, mc.max, sc.network.lines.len(), mc.samples, mc.seed)?;
    let pocs: Vec<String> = sc.network.pocs.iter().map(|p| format!("f:{p}")).collect();
    let load = sc.total_load_step();
    let samples = draws
        .into_par_iter()
        .enumerate()
        .map(|(index, rx)| -> Result<McSample> {
            let sim = simulate_scenario(sc, &PlantMode::Perturbed(rx.clone()))?;
            let mut dev = 0.0f64;
            for p in &pocs {
                dev = dev.max(linf(sim.series.require(p)?, baseline.require(p)?));
            }
            let mut report = compute_metrics(&sim.series, load)?;
            report.checks.push(Check::flag("stable", sim.stable));
            report.checks.push(Check::info("max_dev_f_poc", dev));
            Ok(McSample {
                index,
                rx,
                stable: sim.stable,
                max_deviation: dev,
                report,
                series: sim.series,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(McOutput {
        baseline,
        samples,
        pocs,
    })
}
