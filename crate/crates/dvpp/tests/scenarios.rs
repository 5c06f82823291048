use dvpp::engine::{montecarlo, simulate_scenario};
use dvpp::{parse_scenario, run, verify, DvppError, MetricsReport, Scenario};
use dvpp_core::spatial::PlantMode;

fn scenario(text: &str) -> Scenario {
    parse_scenario(text).unwrap()
}

const CASE1_STEP: &str = "preset case1\n[system]\nt_end = 10\n[events]\nload 1 2 -0.28\n";

#[test]
fn runs_are_byte_identical() {
    let sc = scenario(CASE1_STEP);
    let a = run(&sc).unwrap();
    let b = run(&sc).unwrap();
    assert_eq!(a.series.to_csv(), b.series.to_csv());
    assert_eq!(a.report.to_string(), b.report.to_string());
}

#[test]
fn free_run_stays_at_zero() {
    let out = run(&scenario("preset case1\n[system]\nt_end = 3\n")).unwrap();
    for (name, data) in &out.series.channels {
        assert!(data.iter().all(|v| *v == 0.0), "{name}");
    }
    assert_eq!(out.report.nadir, 0.0);
}

#[test]
fn capacity_event_keeps_the_operating_point() {
    let out = run(&scenario("preset case1\n[events]\ncapacity 1 pv 0.45\n")).unwrap();
    let ss = out.report.steady_state;
    assert!((ss + 0.28 / 33.33).abs() < 1e-9);
    assert!(out
        .report
        .notes
        .iter()
        .any(|n| n.starts_with("operating point from t = 1")));
}

#[test]
fn undersubscribed_gains_fail_the_dc_condition() {
    let text = "\
[system]
t_end = 2
[tdes]
h_p = 5.55
d_p = 33.33
d_q = 0.01
[devices]
wind forming lpf 1.5 0.5 46 1.5
pv forming lpf 0.6 0.4 73 0.6
[network]
pcc 2
line 2 wind 20
line 2 pv 20
";
    let report = verify(&scenario(text)).unwrap();
    let dc = report.check("dc_gain_fp").unwrap();
    assert!(!dc.pass);
    assert!((dc.value - 0.1).abs() < 1e-12);
    assert!(!report.passed());
}

fn hybrid_report(eps: f64) -> MetricsReport {
    verify(&scenario(&format!("preset case2 epsilon={eps}\n"))).unwrap()
}

#[test]
fn hybrid_mismatch_grows_with_the_following_share() {
    let tau_pll = 0.01;
    for eps in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let r = hybrid_report(eps);
        assert!(r.check("participation_fp").unwrap().pass);
        assert!(r.check("dc_gain_fp").unwrap().pass);
        if eps == 1.0 {
            assert!(r.check("aggregation_freq").unwrap().value < 1e-9);
            continue;
        }
        let low = r.check("hybrid_freq").unwrap();
        let bound = (1.0 - eps) * tau_pll * 10.0;
        assert!(low.value <= bound && low.value > 0.9 * bound, "{eps}: {}", low.value);
        let high = r.check("freq_above_pll").unwrap();
        assert!(high.informational && high.pass);
    }
}

#[test]
fn all_following_fleet_without_machines_is_flagged() {
    let text = "preset case2 epsilon=0\n[events]\nload 1 2 -0.1\noutage 2 sg1\noutage 3 sg3\n";
    let sc = scenario(text);
    let report = verify(&sc).unwrap();
    assert!(!report.check("forming_present").unwrap().pass);
    assert!(report.notes.iter().any(|n| n.contains("no forming device present")));
    assert!(matches!(run(&sc), Err(DvppError::NoFormingDevice(_))));

    let mixed = scenario("preset case2 epsilon=0.5\n[events]\noutage 2 sg1\noutage 3 sg3\n");
    assert!(verify(&mixed).unwrap().check("forming_present").unwrap().pass);
    assert!(run(&mixed)
        .unwrap()
        .report
        .notes
        .iter()
        .any(|n| n.contains("outage of `sg3`")));
}

#[test]
fn machine_outage_shifts_the_operating_point() {
    let sc = scenario("preset case2 epsilon=0.5\n[events]\nload 1 2 -0.28\noutage 5 sg3\n");
    let out = run(&sc).unwrap();
    assert!(out.report.check("stable").unwrap().pass);
    // Total damping before and after the outage, in pu power per pu frequency.
    let before = 33.33 + 2.5 / 0.01 + 0.64 / 0.01;
    let after = 33.33 + 2.5 / 0.01;
    let f = out.series.get("f_coi").unwrap();
    let at = |t: f64| f[(t / sc.system.dt).round() as usize];
    assert!((at(4.99) + 0.28 / before).abs() < 1e-6);
    assert!((out.report.steady_state + 0.28 / after).abs() < 1e-6);
}

#[test]
fn monte_carlo_on_the_design_ratio_matches_the_baseline() {
    let sc = scenario("preset case3\n[events]\nload 1 m2 -0.2\nmontecarlo 1 1 1 7\n");
    let out = montecarlo(&sc, None, None).unwrap();
    assert_eq!(out.samples.len(), 1);
    assert!(out.samples[0].rx.iter().all(|r| *r == 1.0));
    assert!(out.max_deviation() < 1e-12);
}

#[test]
fn monte_carlo_streams_extend_by_prefix() {
    let sc = scenario("preset case3\n");
    let short = montecarlo(&sc, Some(3), Some(11)).unwrap().summary_csv();
    let long = montecarlo(&sc, Some(6), Some(11)).unwrap().summary_csv();
    let lines: Vec<&str> = short.lines().collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(long.lines().take(4).collect::<Vec<_>>(), lines);
    assert_ne!(montecarlo(&sc, Some(3), Some(12)).unwrap().summary_csv(), short);
}

#[test]
fn monte_carlo_needs_an_area() {
    assert!(matches!(
        montecarlo(&scenario(CASE1_STEP), None, None),
        Err(DvppError::Unsupported(_))
    ));
}

fn metrics_at(text: &str, halve: bool) -> MetricsReport {
    let mut sc = scenario(text);
    if halve {
        sc.system.dt /= 2.0;
    }
    run(&sc).unwrap().report
}

#[test]
fn halving_the_step_moves_metrics_by_less_than_one_percent() {
    let cases = [
        CASE1_STEP,
        "preset case2 epsilon=0.5\n[system]\nt_end = 10\n[events]\nload 1 2 -0.28\n",
        "preset case3\n",
    ];
    for text in cases {
        let (a, b) = (metrics_at(text, false), metrics_at(text, true));
        let mut pairs = vec![
            ("nadir", a.nadir, b.nadir),
            ("rocof", a.rocof, b.rocof),
            ("steady_state", a.steady_state, b.steady_state),
        ];
        for ((name, x), (_, y)) in a.peaks.iter().zip(&b.peaks) {
            pairs.push((name.as_str(), *x, *y));
        }
        for (name, x, y) in pairs {
            assert!(
                (x - y).abs() <= 0.01 * x.abs().max(1e-12),
                "{text:?} {name}: {x} vs {y}"
            );
        }
    }
}

#[test]
fn area_traces_report_rotational_channels() {
    let sim = simulate_scenario(&scenario("preset case3\n"), &PlantMode::Strict).unwrap();
    for name in ["f:4", "f:6", "p':wind", "q':wind", "p'_poc", "q:bess"] {
        assert!(sim.series.get(name).is_some(), "{name}");
    }
    assert!(sim.stable);
}
