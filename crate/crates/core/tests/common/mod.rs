#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tn_gbp::engine::reduced_phase;
use tn_gbp::models::{aklt_norm_network, ice_network, random_norm_network, villain_network, IceLattice, ModelInstance};
use tn_gbp::models::{Boundary, Representation};
use tn_gbp::tensor::marginal;
use tn_gbp::{GbpState, Network, Preset, RegionGraph, C64};

/// Largest |sum of c_q over regions q containing r, minus 1|, over all
/// regions r and all tensor label sets.
pub fn counting_defect(net: &Network, g: &RegionGraph) -> i64 {
    let mut worst = 0;
    for r in 0..g.regions.len() {
        worst = worst.max((g.superset_sum(r) - 1).abs());
    }
    for t in &net.tensors {
        let ids = t.label_ids();
        let s: i64 = g
            .regions
            .iter()
            .filter(|q| ids.iter().all(|id| q.labels.iter().any(|l| l.id == *id)))
            .map(|q| q.counting_number)
            .sum();
        worst = worst.max((s - 1).abs());
    }
    worst
}

/// |sum_r c_r ln F_r(x) - sum_v ln T_v(x)| (phase reduced) at random
/// assignments with every tensor nonzero; None when no such draw was found.
pub fn telescoping_gap(net: &Network, g: &RegionGraph, draws: usize, seed: u64) -> Option<f64> {
    let labels = net.labels();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: Option<f64> = None;
    for _ in 0..draws * 20 {
        let x: Vec<(u32, usize)> = labels.iter().map(|l| (l.id, rng.gen_range(0..l.dim))).collect();
        let tv: Vec<C64> = net.tensors.iter().map(|t| t.value(&x).unwrap()).collect();
        if tv.iter().any(|z| z.norm() == 0.0) {
            continue;
        }
        let lhs: C64 = g
            .regions
            .iter()
            .zip(&g.factors)
            .map(|(r, f)| f.value(&x).unwrap().ln() * r.counting_number as f64)
            .sum();
        let rhs: C64 = tv.iter().map(|z| z.ln()).sum();
        let d = lhs - rhs;
        let gap = C64::new(d.re, reduced_phase(d.im)).norm() / (1.0 + rhs.norm());
        worst = Some(worst.map_or(gap, |w: f64| w.max(gap)));
        if worst.is_some() && rng.gen_range(0..draws) == 0 {
            break;
        }
    }
    worst
}

/// Largest L1 distance between a parent belief summed down to one of its
/// children and that child's belief.
pub fn marginal_gap(st: &GbpState) -> f64 {
    let g = &st.graph;
    let mut worst: f64 = 0.0;
    for b in g.children() {
        let (pb, _) = st.child_belief(b).unwrap();
        for &a in &g.parent_links[b] {
            let (pa, _) = st.parent_belief(a).unwrap();
            let m = marginal(&pa, &g.regions[b].labels).unwrap().permute(&g.regions[b].key()).unwrap();
            let d: f64 = m.materialize().iter().zip(pb.materialize()).map(|(x, y)| (x - y).norm()).sum();
            worst = worst.max(d);
        }
    }
    worst
}

/// Every built-in model with every preset it supports, at small sizes.
pub fn model_zoo() -> Vec<(String, ModelInstance, Preset)> {
    let mut out = Vec::new();
    let mut push = |m: ModelInstance, ps: &[Preset]| {
        for p in ps {
            out.push((format!("{} {}", m.name, p.name()), m.clone(), p.clone()));
        }
    };
    let plaq = [Preset::SimpleBp, Preset::R1Plaquettes, Preset::R2Plaquettes];
    let fg = villain_network(0.7, (2, 2), Representation::FactorGraph, Boundary::Periodic);
    push(fg, &[Preset::SimpleBp, Preset::R1Plaquettes, Preset::FactorGraphPlaquettes]);
    let vt = villain_network(0.7, (2, 2), Representation::VertexTensor, Boundary::Periodic);
    push(vt, &[Preset::SimpleBp, Preset::R1Plaquettes]);
    push(ice_network(IceLattice::Square, &[4, 4]), &plaq);
    let vox = [Preset::SimpleBp, Preset::R1Plaquettes, Preset::R1Voxels, Preset::R2Voxels];
    push(ice_network(IceLattice::DiamondCubic, &[2]), &vox);
    push(ice_network(IceLattice::HexagonalIce, &[4, 4, 2]), &vox);
    push(aklt_norm_network(1.2, (2, 2)), &plaq);
    push(random_norm_network(4, 2, 0.2, 1), &plaq);
    out
}
