//! Free energy, energy and entropy per spin of the fully frustrated Villain
//! model: simple BP and plaquette GBP against the exact integral.
//!
//! cargo run --release --example villain -- 0.3 1 5

use tn_gbp::models::{villain_network, Boundary, Representation};
use tn_gbp::observables::villain_densities;
use tn_gbp::oracles::villain::{villain_exact_thermo, villain_gbp_analytic};
use tn_gbp::{EngineSettings, GbpState, InitStrategy, Preset};

fn main() {
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|s| s.parse().ok()).collect();
    let betas = if args.is_empty() { vec![0.3, 0.6, 1.0, 2.0, 5.0] } else { args };
    println!("{:>5} {:<24} {:>12} {:>12} {:>10}", "beta", "method", "f", "e", "s");
    for beta in betas {
        let model = villain_network(beta, (4, 4), Representation::FactorGraph, Boundary::Periodic);
        for preset in [Preset::SimpleBp, Preset::FactorGraphPlaquettes] {
            let settings = EngineSettings { epsilon: 1e-20, ..Default::default() };
            let mut st = GbpState::from_preset(model.network.clone(), &preset, &InitStrategy::Uniform, settings).unwrap();
            let out = st.run();
            let th = villain_densities(&st, &model, beta).unwrap();
            let tag = if out.converged() { preset.name().to_string() } else { format!("{} (unconverged)", preset.name()) };
            println!("{beta:>5} {tag:<24} {:>12.8} {:>12.8} {:>10.6}", th.f, th.e, th.s);
        }
        let an = villain_gbp_analytic(beta);
        let (f, e, s) = (an.get("f").unwrap(), an.get("e").unwrap(), an.get("s").unwrap());
        println!("{beta:>5} {:<24} {f:>12.8} {e:>12.8} {s:>10.6}", "plaquette closed form");
        let ex = villain_exact_thermo(beta).unwrap();
        println!("{beta:>5} {:<24} {:>12.8} {:>12.8} {:>10.6}", "exact", ex.f, ex.e, ex.s);
    }
}
