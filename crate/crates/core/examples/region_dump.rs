//! Region graphs of the built-in presets: counts per level, counting
//! numbers, and the JSON dump of one graph.
//!
//! cargo run --release --example region_dump -- out.json

use std::collections::BTreeMap;

use tn_gbp::models::{ice_network, villain_network, Boundary, IceLattice, Representation};
use tn_gbp::{build_preset, Preset};

fn main() {
    let villain = villain_network(1.0, (2, 2), Representation::FactorGraph, Boundary::Periodic);
    let square = ice_network(IceLattice::Square, &[4, 4]);
    let diamond = ice_network(IceLattice::DiamondCubic, &[2]);
    let cases = [
        ("villain", &villain.network, Preset::FactorGraphPlaquettes),
        ("square ice", &square.network, Preset::R1Plaquettes),
        ("square ice", &square.network, Preset::R2Plaquettes),
        ("diamond ice", &diamond.network, Preset::R1Plaquettes),
        ("diamond ice", &diamond.network, Preset::R1Voxels),
    ];
    for (name, net, preset) in &cases {
        let g = build_preset(net, preset).unwrap();
        let mut census: BTreeMap<(usize, i64), usize> = BTreeMap::new();
        for r in &g.regions {
            *census.entry((r.level, r.counting_number)).or_default() += 1;
        }
        println!("{name} / {}: {} regions, {} zero-count children dropped", preset.name(), g.regions.len(), g.dropped);
        for ((level, c), k) in census {
            println!("  level {level}, c = {c:>3}: {k}");
        }
    }
    if let Some(path) = std::env::args().nth(1) {
        let g = build_preset(&villain.network, &Preset::FactorGraphPlaquettes).unwrap();
        std::fs::write(&path, serde_json::to_string_pretty(&g.to_json()).unwrap()).unwrap();
        println!("wrote {path}");
    }
}
