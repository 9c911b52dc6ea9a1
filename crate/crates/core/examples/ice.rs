//! Residual entropy e^{s0} of ice on the square, diamond and hexagonal
//! lattices for BP and for plaquette and voxel regions.
//!
//! cargo run --release --example ice

use std::time::Instant;

use tn_gbp::models::{ice_network, IceLattice};
use tn_gbp::oracles::ice::{ice_gbp_analytic, IceKind};
use tn_gbp::{EngineSettings, GbpState, InitStrategy, Preset};

fn main() {
    let cases = [
        (IceLattice::Square, vec![4, 4], IceKind::Square, vec![Preset::SimpleBp, Preset::R1Plaquettes]),
        (IceLattice::DiamondCubic, vec![2], IceKind::Diamond, vec![Preset::SimpleBp, Preset::R1Plaquettes, Preset::R1Voxels]),
        (IceLattice::HexagonalIce, vec![4, 4, 2], IceKind::Hexagonal, vec![Preset::SimpleBp, Preset::R1Plaquettes]),
    ];
    for (lattice, extents, kind, presets) in cases {
        let model = ice_network(lattice, &extents);
        for preset in presets {
            let t = Instant::now();
            let mut st =
                GbpState::from_preset(model.network.clone(), &preset, &InitStrategy::Uniform, EngineSettings::default())
                    .unwrap();
            let out = st.run();
            let f = st.kikuchi_free_energy().unwrap();
            let w = (-f.re / model.site_count as f64).exp();
            println!("{:<10} {:<14} e^s0 = {w:.7}  {:?} ({:.2?})", format!("{kind:?}"), preset.name(), out, t.elapsed());
        }
        let oracle = ice_gbp_analytic(kind);
        for key in ["bp_exp_s0", "exp_s0", "exact_exp_s0"] {
            if let Some(v) = oracle.get(key) {
                println!("{:<10} oracle {key:<12} {v:.7}", format!("{kind:?}"));
            }
        }
    }
}
