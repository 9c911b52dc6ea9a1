//! Ice-rule (two-in two-out) vertex models. All three lattices are
//! bipartite, so with bond index 1 meaning "hydrogen near the even-sublattice
//! oxygen" the rule reads: exactly two legs set at every vertex.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::lattice::{self, Graph};
use super::{plaquette_cell, Boundary, LatticeKind, LatticeSpec, ModelInstance};
use crate::network::{Cell, Geometry, Network};
use crate::tensor::{IndexLabel, LabeledTensor, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IceLattice {
    Square,
    HexagonalIce,
    DiamondCubic,
}

/// Sparse tensor with entry 1 wherever exactly half the legs are 1.
pub fn ice_vertex(labels: Vec<IndexLabel>) -> LabeledTensor {
    let k = labels.len();
    let mut entries = BTreeMap::new();
    for bits in 0..1usize << k {
        if bits.count_ones() as usize * 2 == k {
            let idx: Vec<usize> = (0..k).map(|i| bits >> (k - 1 - i) & 1).collect();
            entries.insert(idx, C64::new(1.0, 0.0));
        }
    }
    LabeledTensor::sparse(labels, entries)
}

pub fn ice_graph(kind: IceLattice, extents: &[usize]) -> Graph {
    match kind {
        IceLattice::Square => lattice::square_torus(extents[0], extents[1]),
        IceLattice::DiamondCubic => lattice::diamond(extents[0]),
        IceLattice::HexagonalIce => lattice::wurtzite(extents[0], extents[1], extents[2]),
    }
}

/// Square: extents (lx, ly) in vertices. Diamond: (l) conventional cells.
/// Hexagonal: (lx, ly, lz) hexagonal cells.
pub fn ice_network(kind: IceLattice, extents: &[usize]) -> ModelInstance {
    let g = ice_graph(kind, extents);
    let labels: Vec<IndexLabel> = (0..g.edges.len()).map(|e| IndexLabel::new(e as u32, 2)).collect();
    let tensors: Vec<LabeledTensor> =
        (0..g.n).map(|v| ice_vertex(g.adj[v].iter().map(|&(_, e)| labels[e]).collect())).collect();
    let rings = if kind == IceLattice::Square { lattice::square_torus_faces(extents[0], extents[1]) } else { g.cycles(6) };
    let plaquettes: Vec<Cell> = rings.iter().map(|c| plaquette_cell(&g, c, &labels)).collect();
    let voxels: Vec<Cell> = if kind == IceLattice::Square {
        vec![]
    } else {
        cages(&rings).iter().map(|c| plaquette_cell(&g, c, &labels)).collect()
    };
    let (lk, cell_sites) = match kind {
        IceLattice::Square => (LatticeKind::Square, 1),
        IceLattice::DiamondCubic => (LatticeKind::DiamondCubic, 8),
        IceLattice::HexagonalIce => (LatticeKind::HexagonalIce, 4),
    };
    let neighbours = g.edges.clone();
    ModelInstance {
        name: format!("ice_{}", serde_json::to_value(kind).unwrap().as_str().unwrap()),
        site_count: g.n,
        network: Network::new(tensors).with_geometry(Geometry { plaquettes, voxels }),
        lattice: LatticeSpec { kind: lk, extents: extents.to_vec(), boundary: Boundary::Periodic, cell_sites },
        kets: None,
        edge_terms: vec![],
        neighbours,
    }
}

/// Closed cages of 4 or 5 rings: ring sets in which every edge of the
/// union lies on exactly two rings. Returns the union edge sets, sorted.
pub fn cages(rings: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut by_edge: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, r) in rings.iter().enumerate() {
        for &e in r {
            by_edge.entry(e).or_default().push(i);
        }
    }
    let mut found: BTreeSet<Vec<usize>> = BTreeSet::new();
    for root in 0..rings.len() {
        let mut count = BTreeMap::new();
        for &e in &rings[root] {
            count.insert(e, 1usize);
        }
        close(root, &mut vec![root], &mut count, &by_edge, rings, &mut found);
    }
    found.into_iter().collect()
}

fn close(
    root: usize,
    set: &mut Vec<usize>,
    count: &mut BTreeMap<usize, usize>,
    by_edge: &BTreeMap<usize, Vec<usize>>,
    rings: &[Vec<usize>],
    found: &mut BTreeSet<Vec<usize>>,
) {
    let Some((&open, _)) = count.iter().find(|(_, &c)| c == 1) else {
        if set.len() >= 4 {
            found.insert(count.keys().copied().collect());
        }
        return;
    };
    if set.len() == 5 {
        return;
    }
    for &r in &by_edge[&open] {
        if r <= root || set.contains(&r) || rings[r].iter().any(|e| count.get(e) == Some(&2)) {
            continue;
        }
        set.push(r);
        for &e in &rings[r] {
            *count.entry(e).or_default() += 1;
        }
        close(root, set, count, by_edge, rings, found);
        for &e in &rings[r] {
            let c = count.get_mut(&e).unwrap();
            *c -= 1;
            if *c == 0 {
                count.remove(&e);
            }
        }
        set.pop();
    }
}
