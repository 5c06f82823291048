use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use super::*;
use crate::design::{hybrid_split, make_tdes, DesignOptions};
use crate::fixtures::case1;
use crate::lti::{logspace, simulate, step_input, to_state_space};

fn single(tf: RationalTF) -> ClosedLoopModel {
    let net = LoopNetwork {
        buses: vec!["pcc".to_string()],
        k_ptheta: DMatrix::zeros(1, 1),
        voltage: None,
    };
    let dev = LoopDevice {
        name: "dvpp".to_string(),
        bus: 0,
        role: Role::Forming,
        model: Some(tf),
        coi_weight: 1.0,
        q_droop: 0.0,
    };
    assemble_loop(&net, &[dev]).unwrap()
}

fn star(n: usize, b: f64) -> Laplacian {
    let names: Vec<alloc::string::String> = (0..=n).map(|i| alloc::format!("n{i}")).collect();
    let mut g = NetworkGraph::with_nodes(&names);
    for i in 1..=n {
        g.add_edge_idx(0, i, b, None).unwrap();
    }
    build_laplacian(&g).unwrap()
}

/// Case-1 fleet with every device on its own bus, all tied to a PCC bus.
fn case1_on_star(fleet: &Fleet, b: f64) -> ClosedLoopModel {
    let lap = star(3, b);
    let devices = fleet_devices(fleet, &|i| Ok(1 + i % 3)).unwrap();
    assemble_loop(&LoopNetwork::from_laplacian(&lap), &devices).unwrap()
}

#[test]
fn single_device_steady_state() {
    let tdes = make_tdes(5.55, 33.33, 0.01).unwrap().tf_pf;
    let m = single(tdes);
    assert_eq!(m.n_states(), 1);
    let ss = m.steady_state(&DVector::from_element(1, -0.28)).unwrap();
    assert!((ss[0] + 0.28 / 33.33).abs() < 1e-15);
    assert!((ss[0] + 8.4009e-3).abs() < 1e-7);
    let y = simulate(&m.ss, &step_input(30.0, 1e-3, &["pd:pcc"], &[-0.28]), 1e-3).unwrap();
    let f = y.get("f:pcc").unwrap();
    assert!((f.last().unwrap() + 0.28 / 33.33).abs() < 1e-9);
}

#[test]
fn identical_devices_are_symmetric() {
    let t = make_tdes(2.0, 10.0, 0.01).unwrap().tf_pf;
    let mut g = NetworkGraph::with_nodes(&["a", "b"]);
    g.add_edge("a", "b", 3.0, None).unwrap();
    let lap = build_laplacian(&g).unwrap();
    let devs: Vec<LoopDevice> = (0..2)
        .map(|i| LoopDevice {
            name: alloc::format!("d{i}"),
            bus: i,
            role: Role::Forming,
            model: Some(t.clone()),
            coi_weight: 1.0,
            q_droop: 0.0,
        })
        .collect();
    let m = assemble_loop(&LoopNetwork::from_laplacian(&lap), &devs).unwrap();
    let y = simulate(&m.ss, &step_input(5.0, 1e-3, &["pd:a", "pd:b"], &[-0.1, -0.1]), 1e-3).unwrap();
    let (a, b) = (y.get("f:a").unwrap(), y.get("f:b").unwrap());
    assert!(a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-14));
}

#[test]
fn zero_mode_is_an_equilibrium_direction() {
    let fleet = case1();
    let lap = star(3, 5.0);
    let devices = fleet_devices(&fleet, &|i| Ok(1 + i)).unwrap();
    let m = assemble_loop(&LoopNetwork::from_laplacian(&lap), &devices).unwrap();
    assert!(m.is_stable());
    assert_eq!(m.n_states() + 1, m.tags.len());
    assert!(m.tags.iter().any(|t| t == "th:n1"));
    let half = hybrid_split(&fleet, 0.0).unwrap();
    let devices = fleet_devices(&half, &|i| Ok(1 + i)).unwrap();
    let m = assemble_loop(&LoopNetwork::from_laplacian(&lap), &devices).unwrap();
    assert!(m.tags.iter().any(|t| t.starts_with("w:")));
    assert!(m.zero_mode.amax() == 1.0);
    assert!(m.is_stable());
}

#[test]
fn coherency_after_one_second() {
    // Lines of 10 pu susceptance with angles in rad and frequency in pu of 50 Hz.
    let fleet = case1();
    let m = case1_on_star(&fleet, 10.0 * 2.0 * core::f64::consts::PI * 50.0);
    let y = simulate(&m.ss, &step_input(2.0, 1e-3, &["pd:n0"], &[-0.28]), 1e-3).unwrap();
    let k = 1000;
    let fs: Vec<f64> = ["f:n1", "f:n2", "f:n3"].iter().map(|c| y.get(c).unwrap()[k]).collect();
    let mean = fs.iter().sum::<f64>() / 3.0;
    for f in fs {
        assert!((f - mean).abs() <= 0.02 * mean.abs());
    }
}

#[test]
fn steady_state_is_independent_of_topology() {
    let fleet = case1();
    for b in [0.5, 3.0, 40.0] {
        let m = case1_on_star(&fleet, b);
        let mut u = DVector::zeros(4);
        u[0] = -0.1;
        u[2] = -0.18;
        let ss = m.steady_state(&u).unwrap();
        let f = ss[m.ss.output_index("f_coi").unwrap()];
        assert!((f + 0.28 / 33.33).abs() < 1e-12);
    }
}

#[test]
fn hybrid_loop_reaches_design_steady_state() {
    let fleet = case1();
    for eps in [0.0, 0.5] {
        let h = hybrid_split(&fleet, eps).unwrap();
        let m = case1_on_star(&h, 10.0);
        assert!(m.is_stable());
        let mut u = DVector::zeros(4);
        u[0] = -0.28;
        let ss = m.steady_state(&u).unwrap();
        for c in ["f:n0", "f:n1", "f_coi"] {
            let f = ss[m.ss.output_index(c).unwrap()];
            assert!((f + 0.28 / 33.33).abs() < 1e-12, "{eps} {c} {f}");
        }
    }
}

#[test]
fn power_outputs_balance_disturbance() {
    let fleet = case1();
    let m = case1_on_star(&fleet, 10.0);
    let y = simulate(&m.ss, &step_input(3.0, 1e-3, &["pd:n0"], &[-0.28]), 1e-3).unwrap();
    let k = y.len() - 1;
    let p: f64 = ["p:wind", "p:pv", "p:bess"].iter().map(|c| y.get(c).unwrap()[k]).sum();
    assert!((p - 0.28).abs() < 1e-3);
}

#[test]
fn handoff_to_same_model_is_identity() {
    let m = case1_on_star(&case1(), 10.0);
    let xi = DVector::from_fn(m.n_states(), |i, _| i as f64 * 0.1 - 0.3);
    let back = m.handoff(&m, &xi);
    assert!((back - xi).amax() < 1e-15);
}

#[test]
fn piecewise_with_unchanged_model_matches_single_run() {
    let m = case1_on_star(&case1(), 10.0);
    let dt = 1e-3;
    let full = simulate(&m.ss, &step_input(2.0, dt, &["pd:n0"], &[-0.28]), dt).unwrap();
    let mk = |t0: f64, n: usize| {
        let mut ts = crate::lti::TimeSeries::uniform(t0, dt, n);
        for name in m.ss.inputs.iter() {
            let v = if name == "pd:n0" { -0.28 } else { 0.0 };
            ts.push(name, vec![v; n]).unwrap();
        }
        ts
    };
    let segs = [
        Segment {
            model: &m,
            input: mk(0.0, 1001),
        },
        Segment {
            model: &m,
            input: mk(1.0, 1001),
        },
    ];
    let pw = simulate_piecewise(&segs, dt).unwrap();
    let a = full.get("f_coi").unwrap();
    let b = pw.get("f_coi").unwrap();
    assert_eq!(a.len(), b.len());
    for k in 0..a.len() {
        assert!((a[k] - b[k]).abs() < 1e-12);
    }
}

#[test]
fn coherent_response_examples() {
    let t = make_tdes(2.0, 10.0, 0.01).unwrap();
    let mut f = case1();
    f.devices.truncate(2);
    for d in f.devices.iter_mut() {
        d.ref_pf = Some(t.tf_pf.clone());
    }
    let r = coherent_response(&f).unwrap();
    assert!(r.coefficient_distance(&t.tf_pf.scale(0.5)) < 1e-14);

    let fleet = case1();
    let r = coherent_response(&fleet).unwrap();
    assert!(r.coefficient_distance(&fleet.desired.tf_pf) < 1e-9);
    for w in logspace(-2.0, 3.0, 50) {
        let a = r.freq(w).unwrap();
        let b = fleet.desired.tf_pf.freq(w).unwrap();
        assert!((a - b).norm() < 1e-9 * b.norm());
    }
    let mut none = fleet.clone();
    for d in none.devices.iter_mut() {
        d.ref_pf = None;
        d.factor_fp = None;
    }
    assert_eq!(coherent_response(&none), Err(Error::DegenerateSum));
}

#[test]
fn voltage_loop_examples() {
    let fleet = case1();
    let v = step_input(5.0, 1e-3, &["dv"], &[0.01]);
    let y = voltage_loop(&fleet, 0.0, &v).unwrap();
    let q = y.get("q_agg").unwrap();
    assert!((q.last().unwrap() + 1.0).abs() < 1e-6);
    let z = voltage_loop(&fleet, 0.0, &step_input(1.0, 1e-3, &["dv"], &[0.0])).unwrap();
    assert!(z.channels.iter().all(|(_, d)| d.iter().all(|v| *v == 0.0)));

    let mut one = fleet.clone();
    one.devices.truncate(1);
    one.devices[0].ref_vq = Some(RationalTF::constant(100.0));
    let y = voltage_loop(&one, 0.005, &step_input(1.0, 1e-3, &["dv"], &[0.01])).unwrap();
    assert!((y.get("v_pcc").unwrap()[500] - 0.01 / 1.5).abs() < 1e-12);
    assert!(matches!(
        voltage_loop(&one, 0.01, &v),
        Err(Error::AlgebraicLoopUnstable { .. })
    ));
}

#[test]
fn coi_examples() {
    let a = [0.9, 0.5];
    let b = [1.1, 0.5];
    assert_eq!(coi_frequency(&[&a, &b], &[1.0, 1.0]).unwrap(), vec![1.0, 0.5]);
    assert_eq!(coi_frequency(&[&a, &b], &[1.0, 0.0]).unwrap(), a.to_vec());
    assert_eq!(coi_frequency(&[&a, &a], &[2.0, 3.0]).unwrap(), a.to_vec());
    assert_eq!(coi_frequency(&[&a], &[0.0]), Err(Error::ZeroWeightSum));
}

#[test]
fn frequency_loop_from_fleet_and_kron() {
    let fleet = case1();
    let full = star(3, 10.0);
    let lap = kron_reduce(&full, &[1, 2, 3]).unwrap();
    let m = build_frequency_loop(&fleet, &lap).unwrap();
    assert_eq!(m.ss.inputs.len(), 3);
    assert!(m.ss.output_index("f:wind").is_some());
    let ss = m.steady_state(&DVector::from_vec(vec![-0.1, 0.0, 0.0])).unwrap();
    assert!((ss[m.ss.output_index("f:pv").unwrap()] + 0.1 / 33.33).abs() < 1e-12);
    assert!(matches!(
        build_frequency_loop(&fleet, &full),
        Err(Error::DimensionMismatch { .. })
    ));
    let _ = to_state_space;
    let _ = DesignOptions::default();
}
