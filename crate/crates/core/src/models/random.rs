//! Random networks. All draws come from `ChaCha8Rng::seed_from_u64(seed)`
//! through `gen::<f64>()`, consumed in the documented order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::lattice::{square_open, Graph};
use super::{plaquette_cell, Boundary, Ket, LatticeKind, LatticeSpec, ModelInstance};
use crate::network::{Geometry, Network};
use crate::tensor::{IndexLabel, LabeledTensor, C64};

/// n x n open square lattice of kets with entries U(-alpha, 1-alpha), drawn
/// site by site (row-major), each ket row-major over (legs..., s).
pub fn random_norm_network(n: usize, chi: usize, alpha: f64, seed: u64) -> ModelInstance {
    assert!(n >= 2 && chi >= 1 && (0.0..=1.0).contains(&alpha));
    let g = square_open(n);
    let labels: Vec<IndexLabel> = (0..g.edges.len()).map(|e| IndexLabel::new(e as u32, chi * chi)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kets = Vec::new();
    let mut tensors = Vec::new();
    for v in 0..g.n {
        let legs: Vec<IndexLabel> = g.adj[v].iter().map(|&(_, e)| labels[e]).collect();
        let size = chi.pow(legs.len() as u32) * 2;
        let data = (0..size).map(|_| C64::new(rng.gen::<f64>() - alpha, 0.0)).collect();
        let ket = Ket { tensor: v, legs, chi, phys: 2, data };
        tensors.push(ket.double_factor(None));
        kets.push(ket);
    }
    let plaquettes = g.cycles(4).iter().map(|c| plaquette_cell(&g, c, &labels)).collect();
    ModelInstance {
        name: "random_norm".into(),
        network: Network::new(tensors).with_geometry(Geometry { plaquettes, voxels: vec![] }),
        lattice: LatticeSpec { kind: LatticeKind::Square, extents: vec![n, n], boundary: Boundary::Open, cell_sites: 1 },
        site_count: g.n,
        kets: Some(kets),
        edge_terms: vec![],
        neighbours: g.edges.clone(),
    }
}

/// Fraction of strictly negative real parts among all double-factor entries.
pub fn negative_fraction(m: &ModelInstance) -> f64 {
    let (mut neg, mut all) = (0usize, 0usize);
    for t in &m.network.tensors {
        for v in t.materialize() {
            all += 1;
            neg += (v.re < 0.0) as usize;
        }
    }
    neg as f64 / all as f64
}

fn graph_network(g: &Graph, dims: &[usize], complex: bool, rng: &mut ChaCha8Rng) -> Network {
    let labels: Vec<IndexLabel> = (0..g.edges.len()).map(|e| IndexLabel::new(e as u32, dims[e])).collect();
    let tensors = (0..g.n)
        .map(|v| {
            let ls: Vec<IndexLabel> = g.adj[v].iter().map(|&(_, e)| labels[e]).collect();
            LabeledTensor::from_fn(ls, |_| {
                let re = 0.1 + rng.gen::<f64>();
                let im = if complex { rng.gen::<f64>() - 0.5 } else { 0.0 };
                C64::new(re, im)
            })
        })
        .collect();
    Network::new(tensors)
}

/// Random tree: tensor i > 0 attaches to a uniformly drawn earlier tensor,
/// bond dims uniform in 2..=max_dim. Entries 0.1 + U(0,1), plus an imaginary
/// part U(-0.5, 0.5) when `complex`.
pub fn random_tree_network(n: usize, max_dim: usize, complex: bool, seed: u64) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = Graph::new(n);
    let mut dims = Vec::new();
    for i in 1..n {
        let j = rng.gen_range(0..i);
        g.add_edge(j, i);
        dims.push(rng.gen_range(2..=max_dim));
    }
    graph_network(&g, &dims, complex, &mut rng)
}

/// Random connected graph: a random tree plus `extra` distinct extra edges.
pub fn random_loopy_network(n: usize, extra: usize, max_dim: usize, complex: bool, seed: u64) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = Graph::new(n);
    let mut dims = Vec::new();
    for i in 1..n {
        let j = rng.gen_range(0..i);
        g.add_edge(j, i);
        dims.push(rng.gen_range(2..=max_dim));
    }
    let mut added = 0;
    let mut tries = 0;
    while added < extra && tries < 100 * (extra + 1) {
        tries += 1;
        let (u, v) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if u == v || g.adj[u].iter().any(|&(w, _)| w == v) {
            continue;
        }
        g.add_edge(u.min(v), u.max(v));
        dims.push(rng.gen_range(2..=max_dim));
        added += 1;
    }
    graph_network(&g, &dims, complex, &mut rng)
}

/// Gives every tensor one extra dangling leg of dimension `dim` with entries
/// 0.5 + U(0,1), so that no tensor's label set lies inside another's.
pub fn with_open_legs(net: Network, dim: usize, seed: u64) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let next = net.labels().iter().map(|l| l.id + 1).max().unwrap_or(0);
    let tensors = net
        .tensors
        .iter()
        .enumerate()
        .map(|(k, t)| {
            let leg = LabeledTensor::from_fn(vec![IndexLabel::new(next + k as u32, dim)], |_| {
                C64::new(0.5 + rng.gen::<f64>(), 0.0)
            });
            crate::tensor::hadamard(t, &leg).expect("disjoint labels")
        })
        .collect();
    Network { tensors, geometry: net.geometry }
}
