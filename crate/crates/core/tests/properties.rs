mod common;

use proptest::prelude::*;
use tn_gbp::engine::{overlap_metric, reduced_phase};
use tn_gbp::models::{random_loopy_network, random_norm_network, random_tree_network, with_open_legs};
use tn_gbp::observables::{expectation, identity};
use tn_gbp::oracles::exact::{brute_force_log_z, exact_log_z};
use tn_gbp::oracles::reference_bp::trajectory_gap;
use tn_gbp::{build_preset, init_messages, EngineSettings, GbpState, InitStrategy, MessageSet, Preset, C64};
use tn_gbp::{IndexLabel, LabeledTensor};

fn same_log(a: C64, b: C64) -> f64 {
    let d = a - b;
    C64::new(d.re, reduced_phase(d.im)).norm()
}

/// Identity over (z, z') on every message of a norm network.
fn identity_messages(st: &GbpState, chi: usize) -> MessageSet {
    let mut ms = st.messages();
    for m in ms.entries.values_mut() {
        let labels: Vec<IndexLabel> = m.labels.clone();
        *m = LabeledTensor::from_fn(labels, |x| {
            let diag = x.iter().all(|&v| v / chi == v % chi);
            C64::new(diag as u8 as f64, 0.0)
        });
    }
    ms
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn counting_identity_and_telescoping(n in 3usize..8, extra in 0usize..5, complex: bool, seed in 0u64..1000, blocks in 1usize..4) {
        let net = with_open_legs(random_loopy_network(n, extra, 3, complex, seed), 2, seed);
        let partition: Vec<Vec<usize>> = (0..blocks).map(|b| (0..n).filter(|v| v % blocks == b).collect()).collect();
        for preset in [Preset::SimpleBp, Preset::BlockBp(partition)] {
            let g = build_preset(&net, &preset).unwrap();
            prop_assert_eq!(common::counting_defect(&net, &g), 0);
            let gap = common::telescoping_gap(&net, &g, 4, seed).unwrap();
            prop_assert!(gap < 1e-10, "telescoping gap {}", gap);
        }
    }

    #[test]
    fn exact_contraction_matches_enumeration(n in 2usize..7, extra in 0usize..5, complex: bool, seed in 0u64..1000, legs: bool) {
        let mut net = random_loopy_network(n, extra, 2, complex, seed);
        if legs {
            net = with_open_legs(net, 2, seed);
        }
        prop_assume!(net.labels().len() <= 20);
        let a = exact_log_z(&net.tensors).unwrap();
        let b = brute_force_log_z(&net.tensors).unwrap();
        prop_assert!(same_log(a, b) < 1e-10 * (1.0 + b.norm()), "{} vs {}", a, b);
    }

    #[test]
    fn simple_bp_follows_reference(n in 3usize..8, extra in 0usize..4, complex: bool, seed in 0u64..1000, damping in 0.2f64..=1.0) {
        let net = with_open_legs(random_loopy_network(n, extra, 3, complex, seed), 2, seed);
        let gap = trajectory_gap(&net, damping, 15).unwrap();
        prop_assert!(gap <= 1e-12, "gap {}", gap);
    }

    #[test]
    fn trees_are_exact(n in 2usize..9, complex: bool, seed in 0u64..1000) {
        let net = random_tree_network(n, 3, complex, seed);
        let settings = EngineSettings { epsilon: 1e-26, max_iters: 5000, damping: 0.5, ..Default::default() };
        let mut st = GbpState::from_preset(net.clone(), &Preset::SimpleBp, &InitStrategy::Uniform, settings).unwrap();
        prop_assert!(st.run().converged());
        let f = st.kikuchi_free_energy().unwrap();
        let z = exact_log_z(&net.tensors).unwrap();
        prop_assert!(same_log(-f, z) < 1e-10, "{} vs {}", -f, z);
    }

    #[test]
    fn psd_preserved_by_simple_bp(alpha in 0.0f64..0.6, seed in 0u64..1000, damping in 0.2f64..=1.0) {
        let chi = 2;
        let m = random_norm_network(3, chi, alpha, seed);
        let settings = EngineSettings { damping, psd_diagnostic: true, ..Default::default() };
        let mut st = GbpState::from_preset(m.network.clone(), &Preset::SimpleBp, &InitStrategy::Uniform, settings).unwrap();
        let ms = identity_messages(&st, chi);
        st.set_messages(&ms).unwrap();
        for _ in 0..25 {
            if st.sweep().is_err() {
                break;
            }
        }
        for h in &st.history {
            let e = h.min_eigenvalue.unwrap();
            prop_assert!(e >= -1e-12, "sweep {} min eigenvalue {}", h.iteration, e);
        }
    }

    #[test]
    fn identity_expectation_is_one(alpha in 0.0f64..0.3, seed in 0u64..1000, site in 0usize..9) {
        let m = random_norm_network(3, 2, alpha, seed);
        let mut st = GbpState::from_preset(m.network.clone(), &Preset::SimpleBp, &InitStrategy::Uniform, EngineSettings::default()).unwrap();
        prop_assume!(st.run().converged());
        let one = identity(2);
        let v = expectation(&st, &m, &[(site, &one)]).unwrap();
        prop_assert!((v - 1.0).norm() < 1e-12, "{}", v);
    }

    #[test]
    fn message_scale_does_not_matter(seed in 0u64..1000, scale in 0.01f64..100.0) {
        let m = random_norm_network(3, 2, 0.1, seed);
        let g = build_preset(&m.network, &Preset::R1Plaquettes).unwrap();
        let base = init_messages(&g, &InitStrategy::Noisy { c: 0.1, seed }).unwrap();
        let mut scaled = base.clone();
        for (k, t) in scaled.entries.values_mut().enumerate() {
            let s = scale * (1.0 + k as f64);
            *t = t.map_entries(|z| z * s);
        }
        let settings = EngineSettings { epsilon: 1e-20, max_iters: 3000, ..Default::default() };
        let mut a = GbpState::new(m.network.clone(), g.clone(), base, settings.clone()).unwrap();
        let mut b = GbpState::new(m.network.clone(), g, scaled, settings).unwrap();
        let (ra, rb) = (a.run(), b.run());
        prop_assert_eq!(ra.converged(), rb.converged());
        prop_assume!(ra.converged());
        let (fa, fb) = (a.kikuchi_free_energy().unwrap(), b.kikuchi_free_energy().unwrap());
        prop_assert!((fa - fb).norm() < 1e-10);
        for r in 0..a.graph.regions.len() {
            let pa = a.belief(r).unwrap().0.materialize();
            let pb = b.belief(r).unwrap().0.materialize();
            let d: f64 = pa.iter().zip(&pb).map(|(x, y)| (x - y).norm()).sum();
            prop_assert!(d < 1e-10);
        }
    }
}

#[test]
fn zoo_region_graphs_satisfy_counting_identity() {
    for (name, m, p) in common::model_zoo() {
        let g = build_preset(&m.network, &p).unwrap();
        assert_eq!(common::counting_defect(&m.network, &g), 0, "{name}");
        if let Some(gap) = common::telescoping_gap(&m.network, &g, 4, 7) {
            assert!(gap < 1e-10, "{name}: {gap}");
        }
    }
}

#[test]
fn marginals_agree_at_converged_points() {
    let epsilon = 1e-10;
    for (name, m, p) in common::model_zoo() {
        if p.name().contains("voxel") || p == Preset::R2Plaquettes {
            continue;
        }
        let settings = EngineSettings { epsilon, max_iters: 2000, ..Default::default() };
        let mut st = GbpState::from_preset(m.network.clone(), &p, &InitStrategy::Uniform, settings).unwrap();
        if st.run().converged() {
            let gap = common::marginal_gap(&st);
            assert!(gap <= 10.0 * epsilon.sqrt(), "{name}: {gap}");
        }
    }
}

#[test]
fn uniform_and_identity_starts_agree_for_simple_bp() {
    let m = random_norm_network(3, 2, 0.0, 3);
    let settings = EngineSettings { epsilon: 1e-20, ..Default::default() };
    let mut a = GbpState::from_preset(m.network.clone(), &Preset::SimpleBp, &InitStrategy::Uniform, settings).unwrap();
    let mut b = GbpState::from_preset(m.network.clone(), &Preset::SimpleBp, &InitStrategy::Uniform, a.settings.clone()).unwrap();
    b.set_messages(&identity_messages(&b, 2)).unwrap();
    assert!(a.run().converged() && b.run().converged());
    for (x, y) in a.messages().entries.values().zip(b.messages().entries.values()) {
        assert!(overlap_metric(&x.materialize(), &y.materialize()) < 1e-16);
    }
}
