use dvpp_core::adaptation::q_capability;
use dvpp_core::design::{complete_fleet, make_adpf, AdpfKind, Channel, ParticipationFactor};
use dvpp_core::lti::{siso_freq, to_state_space, Discretized, RationalTF};
use dvpp_core::network::{build_laplacian, kron_injection_map, kron_reduce, NetworkGraph};
use dvpp_core::spatial::{rotate_power, sample_rx, unrotate_power, RotationParams};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;

fn stable_tf() -> impl Strategy<Value = RationalTF> {
    (
        prop::collection::vec(0.05f64..20.0, 1..4),
        prop::collection::vec(-3.0f64..3.0, 1..4),
    )
        .prop_map(|(poles, zeros)| {
            let mut den = RationalTF::one();
            for p in &poles {
                den = den.mul(&RationalTF::new(&[1.0], &[*p, 1.0]).unwrap()).unwrap();
            }
            let n = zeros.len().min(poles.len());
            let mut num = RationalTF::one();
            for z in &zeros[..n] {
                num = num.mul(&RationalTF::new(&[*z, 1.0], &[1.0]).unwrap()).unwrap();
            }
            num.mul(&den).unwrap()
        })
}

fn close(a: Complex64, b: Complex64, rel: f64) -> bool {
    (a - b).norm() <= rel * (1.0 + a.norm().max(b.norm()))
}

fn points() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1e-2f64..1e2, 5)
}

fn connected_graph() -> impl Strategy<Value = NetworkGraph> {
    (2usize..=6).prop_flat_map(|n| {
        (
            prop::collection::vec((0usize..1000, 0.5f64..20.0), n - 1),
            prop::collection::vec((0usize..n, 0usize..n, 0.5f64..20.0), 0..6),
        )
            .prop_map(move |(tree, extra)| {
                let names: Vec<String> = (0..n).map(|i| format!("n{i}")).collect();
                let mut g = NetworkGraph::with_nodes(&names);
                for (i, (parent, b)) in tree.into_iter().enumerate() {
                    g.add_edge_idx(parent % (i + 1), i + 1, b, None).unwrap();
                }
                for (a, c, b) in extra {
                    if a != c {
                        g.add_edge_idx(a, c, b, None).unwrap();
                    }
                }
                g
            })
    })
}

proptest! {
    #[test]
    fn tf_add_commutes_and_associates(a in stable_tf(), b in stable_tf(), c in stable_tf(), w in points()) {
        let ab = a.add(&b).unwrap();
        let ba = b.add(&a).unwrap();
        let l = ab.add(&c).unwrap();
        let r = a.add(&b.add(&c).unwrap()).unwrap();
        for w in w {
            let s = Complex64::new(0.0, w);
            prop_assert!(close(ab.eval(s).unwrap(), ba.eval(s).unwrap(), 1e-9));
            prop_assert!(close(l.eval(s).unwrap(), r.eval(s).unwrap(), 1e-8));
            let direct = a.eval(s).unwrap() + b.eval(s).unwrap();
            prop_assert!(close(ab.eval(s).unwrap(), direct, 1e-9));
        }
    }

    #[test]
    fn tf_mul_commutes_and_associates(a in stable_tf(), b in stable_tf(), c in stable_tf(), w in points()) {
        let ab = a.mul(&b).unwrap();
        let ba = b.mul(&a).unwrap();
        let l = ab.mul(&c).unwrap();
        let r = a.mul(&b.mul(&c).unwrap()).unwrap();
        for w in w {
            let s = Complex64::new(0.0, w);
            prop_assert!(close(ab.eval(s).unwrap(), ba.eval(s).unwrap(), 1e-9));
            prop_assert!(close(l.eval(s).unwrap(), r.eval(s).unwrap(), 1e-8));
        }
    }

    #[test]
    fn realization_matches_evaluation(tf in stable_tf(), w in points()) {
        let ss = to_state_space(&tf).unwrap();
        prop_assert_eq!(ss.n_states(), tf.den_degree());
        for w in w {
            let a = siso_freq(&ss, w).unwrap();
            let b = tf.freq(w).unwrap();
            prop_assert!((a - b).norm() <= 1e-9 * b.norm().max(1e-12));
        }
    }

    #[test]
    fn bilinear_keeps_stable_models_stable(tf in stable_tf(), dt in 1e-4f64..1.0) {
        let ss = to_state_space(&tf).unwrap();
        prop_assume!(ss.n_states() > 0);
        let d = Discretized::new(&ss, dt).unwrap();
        let radius = d.ad.complex_eigenvalues().iter().fold(0.0f64, |m, z| m.max(z.norm()));
        prop_assert!(radius < 1.0);
    }

    #[test]
    fn laplacian_invariants(g in connected_graph()) {
        let lap = build_laplacian(&g).unwrap();
        prop_assert!(lap.check().holds(1e-12));
    }

    #[test]
    fn kron_preserves_boundary_behaviour(g in connected_graph(), mask in prop::collection::vec(any::<bool>(), 6), p in prop::collection::vec(-1.0f64..1.0, 6)) {
        let lap = build_laplacian(&g).unwrap();
        let n = lap.n();
        let mut keep: Vec<usize> = (0..n).filter(|&i| mask[i]).collect();
        if keep.is_empty() {
            keep.push(0);
        }
        let red = kron_reduce(&lap, &keep).unwrap();
        prop_assert!(keep.len() == 1 || red.check().holds(1e-9));

        // Balanced injections, ground at node 0, dense solve.
        let mut inj = DVector::from_iterator(n, p.iter().copied().take(n));
        let mean = inj.mean();
        inj.add_scalar_mut(-mean);
        let sub = lap.l.view((1, 1), (n - 1, n - 1)).into_owned();
        let rhs = inj.rows(1, n - 1).into_owned();
        let theta_rest = sub.lu().solve(&rhs).unwrap();
        let mut theta = DVector::zeros(n);
        theta.rows_mut(1, n - 1).copy_from(&theta_rest);

        let theta_k = DVector::from_iterator(keep.len(), keep.iter().map(|&k| theta[k]));
        let lhs = &red.l * theta_k;
        let map = kron_injection_map(&lap, &keep).unwrap();
        let mapped = &map * &inj;
        for i in 0..keep.len() {
            prop_assert!((lhs[i] - mapped[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn participation_sums_to_one(taus in prop::collection::vec(0.05f64..5.0, 1..4), shares in prop::collection::vec(0.01f64..1.0, 4), hpf in 0.05f64..5.0, w in prop::collection::vec(-3.0f64..4.0, 100)) {
        let total: f64 = shares.iter().take(taus.len()).sum::<f64>() * 1.25;
        let mut factors: Vec<ParticipationFactor> = taus
            .iter()
            .zip(&shares)
            .map(|(t, s)| make_adpf(AdpfKind::Lpf { tau: *t }, s / total, Channel::Fp).unwrap())
            .collect();
        factors.push(make_adpf(AdpfKind::Hpf { tau: hpf }, 0.0, Channel::Fp).unwrap());
        factors.push(complete_fleet(&factors, Channel::Fp).unwrap());
        for e in w {
            let omega = 10f64.powf(e);
            let sum: Complex64 = factors.iter().map(|f| f.eval(omega).unwrap()).sum();
            prop_assert!((sum - 1.0).norm() < 1e-9);
        }
        let dc: f64 = factors.iter().map(|f| f.dc_gain()).sum();
        prop_assert!((dc - 1.0).abs() < 1e-12);
    }

    #[test]
    fn high_pass_dc_is_exactly_zero(tau in 1e-3f64..100.0) {
        let f = make_adpf(AdpfKind::Hpf { tau }, 0.0, Channel::Vq).unwrap();
        prop_assert_eq!(f.dc_gain(), 0.0);
        prop_assert_eq!(f.tf().dc_gain().unwrap(), 0.0);
    }

    #[test]
    fn rotation_is_an_isometry(r in 0.0f64..10.0, x in 1e-3f64..10.0, p in -5.0f64..5.0, q in -5.0f64..5.0) {
        let params = RotationParams::new(r, x).unwrap();
        let m = params.matrix();
        let mm = DMatrix::from_row_slice(2, 2, &[m[0][0], m[0][1], m[1][0], m[1][1]]);
        let gram = mm.transpose() * &mm;
        prop_assert!((gram - DMatrix::<f64>::identity(2, 2)).amax() < 1e-12);
        prop_assert!((mm.determinant() - 1.0).abs() < 1e-12);
        let (pp, qq) = rotate_power(p, q, &params);
        prop_assert!(((pp * pp + qq * qq) - (p * p + q * q)).abs() < 1e-12 * (1.0 + p * p + q * q));
        let (p2, q2) = unrotate_power(pp, qq, &params);
        prop_assert!((p2 - p).abs() < 1e-12 && (q2 - q).abs() < 1e-12);
    }

    #[test]
    fn q_capability_falls_with_active_capacity(s in 0.01f64..2.0, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(q_capability(s, lo * s).unwrap() >= q_capability(s, hi * s).unwrap());
    }

    #[test]
    fn monte_carlo_streams_are_deterministic(seed in any::<u64>(), n in 1usize..10, lines in 1usize..6) {
        let a = sample_rx(0.4, 2.0, lines, n, seed).unwrap();
        prop_assert_eq!(&a, &sample_rx(0.4, 2.0, lines, n, seed).unwrap());
        let long = sample_rx(0.4, 2.0, lines, 2 * n, seed).unwrap();
        prop_assert_eq!(&long[..n], &a[..]);
    }
}
