//! Round trip of a network through the JSON interchange format, then BP and
//! exact contraction of the file's contents.
//!
//! cargo run --release --example contract_json -- network.json

use tn_gbp::models::json::{network_from_json, network_to_json};
use tn_gbp::models::{random_loopy_network, random_tree_network};
use tn_gbp::oracles::exact::exact_log_z;
use tn_gbp::{EngineSettings, GbpState, InitStrategy, Preset};

fn main() {
    let text = match std::env::args().nth(1) {
        Some(path) => std::fs::read_to_string(path).expect("readable file"),
        None => {
            let tree = random_tree_network(8, 3, false, 1);
            serde_json::to_string_pretty(&network_to_json(&tree)).unwrap()
        }
    };
    let net = network_from_json(&text).expect("valid network file");
    println!("{} tensors, {} labels", net.tensors.len(), net.labels().len());
    let mut st = GbpState::from_preset(net.clone(), &Preset::SimpleBp, &InitStrategy::Uniform, EngineSettings::default())
        .expect("simple BP regions");
    println!("simple BP: {:?}, F = {}", st.run(), st.kikuchi_free_energy().unwrap());
    println!("exact:     -ln Z = {}", -exact_log_z(&net.tensors).unwrap());

    let loopy = random_loopy_network(8, 3, 3, false, 2);
    let back = network_from_json(&network_to_json(&loopy).to_string()).unwrap();
    let same = loopy.tensors.iter().zip(&back.tensors).all(|(a, b)| a.materialize() == b.materialize());
    println!("loopy network survives a JSON round trip: {same}");
}
