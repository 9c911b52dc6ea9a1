//! Random PEPS norm networks with entries drawn from U(-alpha, 1 - alpha):
//! convergence of BP and R1 GBP, free-energy error and the error of the
//! central tensor's environment against exact contraction.
//!
//! cargo run --release --example random_norm -- 0.1 3

use tn_gbp::models::random::negative_fraction;
use tn_gbp::models::random_norm_network;
use tn_gbp::observables::network_derivative;
use tn_gbp::oracles::exact::grid_environment;
use tn_gbp::sweep::{environment_error, split_seed};
use tn_gbp::tensor::contract;
use tn_gbp::{EngineSettings, GbpState, InitStrategy, Preset};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let alpha: f64 = args.first().and_then(|s| s.parse().ok()).unwrap_or(0.1);
    let count: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let n = 6;
    for k in 0..count {
        let seed = split_seed(7, k);
        let model = random_norm_network(n, 3, alpha, seed);
        let ts = &model.network.tensors;
        let centre = (n / 2) * n + n / 2;
        let exact = grid_environment(ts, n, centre, 2e8).unwrap();
        let sites = model.site_count as f64;
        let f_exact = -contract(&exact, &ts[centre]).unwrap().log_total().unwrap().re / sites;
        println!("seed {seed}: negative entries {:.3}, exact f = {f_exact:.9}", negative_fraction(&model));
        let order: Vec<u32> = ts[centre].label_ids();
        for preset in [Preset::SimpleBp, Preset::R1Plaquettes] {
            let settings = EngineSettings { max_iters: 500, ..Default::default() };
            let init = InitStrategy::Noisy { c: 0.1, seed };
            let mut st = GbpState::from_preset(model.network.clone(), &preset, &init, settings).unwrap();
            let out = st.run();
            if !out.converged() {
                println!("  {:<14} {out:?}", preset.name());
                continue;
            }
            let f = st.kikuchi_free_energy().unwrap().re / sites;
            let env = network_derivative(&st, &[centre]).unwrap().env.permute(&order).unwrap();
            let err = environment_error(&env.materialize(), &exact.materialize());
            println!("  {:<14} f error {:.2e}  environment error {err:.2e}", preset.name(), (f - f_exact).abs());
        }
    }
}
