//! Nearest-neighbour spin correlators of the deformed AKLT state on the
//! honeycomb lattice, simple BP against GBP with hexagon regions.
//!
//! cargo run --release --example aklt -- 0.5 1.7320508

use std::time::Instant;

use tn_gbp::models::aklt_norm_network;
use tn_gbp::observables::{expectation, spin_operators};
use tn_gbp::oracles::aklt::aklt_bp_analytic;
use tn_gbp::{EngineSettings, GbpState, InitStrategy, Preset};

fn main() {
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|s| s.parse().ok()).collect();
    let values = if args.is_empty() { vec![0.5, 3f64.sqrt(), 3.0] } else { args };
    let ops = spin_operators(3);
    for a in values {
        let model = aklt_norm_network(a, (4, 4));
        let (v, w) = model.neighbours[0];
        let oracle = aklt_bp_analytic(a).unwrap();
        for preset in [Preset::SimpleBp, Preset::R1Plaquettes] {
            let t = Instant::now();
            let settings = EngineSettings { epsilon: 1e-24, ..Default::default() };
            let init = if a > 5f64.sqrt() { InitStrategy::Noisy { c: 0.1, seed: 1 } } else { InitStrategy::Uniform };
            let mut st = GbpState::from_preset(model.network.clone(), &preset, &init, settings).unwrap();
            let outcome = st.run();
            let corr: Vec<f64> =
                ops.iter().map(|o| expectation(&st, &model, &[(v, o), (w, o)]).unwrap().re).collect();
            println!(
                "a={a:.4} {:<14} {:?} xx={:+.9} yy={:+.9} zz={:+.9} xx-yy={:+.2e} ({:.2?})",
                preset.name(),
                outcome,
                corr[0],
                corr[1],
                corr[2],
                corr[0] - corr[1],
                t.elapsed()
            );
        }
        println!(
            "a={a:.4} bp oracle      xx={:+.9} yy={:+.9} zz={:+.9}",
            oracle.get("xx").unwrap(),
            oracle.get("yy").unwrap(),
            oracle.get("zz").unwrap()
        );
    }
}
