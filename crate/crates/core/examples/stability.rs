//! Closed-form fixed points and their linear stability: the Villain BP
//! threshold, the AKLT BP regimes and the plaquette GBP solution.
//!
//! cargo run --release --example stability

use tn_gbp::models::{aklt_norm_network, villain_network, Boundary, Representation};
use tn_gbp::oracles::aklt::{aklt_bp_analytic, aklt_bp_fixed_point, aklt_bp_messages};
use tn_gbp::oracles::villain::{villain_bp_analytic, villain_bp_beta_c, villain_gbp_analytic};
use tn_gbp::{build_preset, EngineSettings, GbpState, InitStrategy, Preset};

fn main() {
    let undamped = EngineSettings { damping: 1.0, ..Default::default() };
    let bc = villain_bp_beta_c();
    println!("Villain BP threshold beta_c = {bc:.9}");
    for beta in [0.5, bc - 1e-3, bc + 1e-3, 0.8] {
        let model = villain_network(beta, (2, 2), Representation::FactorGraph, Boundary::Periodic);
        let mut st =
            GbpState::from_preset(model.network, &Preset::SimpleBp, &InitStrategy::Uniform, undamped.clone()).unwrap();
        let s = st.linear_stability().unwrap();
        let an = villain_bp_analytic(beta);
        println!(
            "  beta {beta:.6}: engine radius {:.6} (unstable {}), reduced map radius {:.6}",
            s.spectral_radius, s.unstable, an.spectrum[0]
        );
    }
    for beta in [0.5, 1.0, 2.0] {
        let an = villain_gbp_analytic(beta);
        println!("Villain plaquette GBP beta {beta}: c* = {:.9}, stable {:?}, residual {:.1e}", an.components[0].1, an.stable, an.residual);
    }
    for a in [0.5, 1.0, 1.5, 5f64.sqrt(), 3.0] {
        let model = aklt_norm_network(a, (2, 2));
        let g = build_preset(&model.network, &Preset::SimpleBp).unwrap();
        let (mu, c) = aklt_bp_fixed_point(a, 1.0);
        let mut st = GbpState::new(model.network.clone(), g.clone(), aklt_bp_messages(&g, mu, c), undamped.clone()).unwrap();
        let s = st.linear_stability().unwrap();
        let an = aklt_bp_analytic(a).unwrap();
        println!("AKLT a = {a:.4}: mu = {mu:.6}, c = {c:.6}, engine radius {:.6}, reduced map radius {:.6}", s.spectral_radius, an.spectrum[0]);
    }
}
