//! Benchmark network generators.

pub mod aklt;
pub mod ice;
pub mod json;
pub mod lattice;
pub mod random;
pub mod villain;

use serde::{Deserialize, Serialize};

use crate::network::{Cell, Network};
use crate::tensor::{IndexLabel, LabeledTensor, C64};

pub use aklt::aklt_norm_network;
pub use ice::{ice_network, IceLattice};
pub use random::{random_loopy_network, random_norm_network, random_tree_network, with_open_legs};
pub use villain::{villain_network, Representation};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatticeKind {
    Square,
    Honeycomb,
    HexagonalIce,
    DiamondCubic,
    Chain,
    Tree,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Open,
    Periodic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub kind: LatticeKind,
    pub extents: Vec<usize>,
    pub boundary: Boundary,
    /// Sites per unit cell.
    pub cell_sites: usize,
}

/// Single-layer ket tensor of a norm network. `data` is row-major over the
/// virtual legs (in `legs` order, each of dim `chi`) followed by the physical leg.
#[derive(Clone, Debug)]
pub struct Ket {
    /// Index of the double factor in the network.
    pub tensor: usize,
    /// Combined bra-ket labels of the double factor, one per virtual leg.
    pub legs: Vec<IndexLabel>,
    pub chi: usize,
    pub phys: usize,
    pub data: Vec<C64>,
}

impl Ket {
    pub fn entry(&self, z: &[usize], s: usize) -> C64 {
        let mut off = 0;
        for &zi in z {
            off = off * self.chi + zi;
        }
        self.data[off * self.phys + s]
    }

    /// Double factor with `op` (row-major phys x phys) sandwiched on the
    /// physical leg: sum_{s,s'} psi(z,s) op(s,s') conj(psi(z',s')).
    /// Combined index is z*chi + z'.
    pub fn double_factor(&self, op: Option<&[C64]>) -> LabeledTensor {
        let k = self.legs.len();
        let chi = self.chi;
        LabeledTensor::from_fn(self.legs.clone(), |x| {
            let z: Vec<usize> = x.iter().map(|&v| v / chi).collect();
            let zp: Vec<usize> = x.iter().map(|&v| v % chi).collect();
            let mut acc = C64::new(0.0, 0.0);
            for s in 0..self.phys {
                let a = self.entry(&z, s);
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                match op {
                    None => acc += a * self.entry(&zp, s).conj(),
                    Some(o) => {
                        for sp in 0..self.phys {
                            acc += a * o[s * self.phys + sp] * self.entry(&zp, sp).conj();
                        }
                    }
                }
            }
            debug_assert_eq!(z.len(), k);
            acc
        })
    }
}

/// A local energy term: `energy` over the labels that carry the two spins.
#[derive(Clone, Debug)]
pub struct EdgeTerm {
    pub sites: (usize, usize),
    pub energy: LabeledTensor,
    /// Tensor carrying both labels.
    pub tensor: usize,
}

#[derive(Clone, Debug)]
pub struct ModelInstance {
    pub name: String,
    pub network: Network,
    pub lattice: LatticeSpec,
    pub site_count: usize,
    pub kets: Option<Vec<Ket>>,
    pub edge_terms: Vec<EdgeTerm>,
    /// Nearest-neighbour pairs of network tensors, for two-site observables.
    pub neighbours: Vec<(usize, usize)>,
}

impl ModelInstance {
    /// Every label on at most two tensors, and every double factor PSD.
    pub fn check(&self) -> crate::Result<()> {
        self.network.validate()?;
        for l in self.network.labels() {
            if self.network.multiplicity(l.id) > 2 && self.name != "villain_factor_graph" {
                return Err(crate::Error::LabelMismatch(format!("label {} on more than two tensors", l.id)));
            }
        }
        if let Some(kets) = &self.kets {
            for k in kets {
                let t = &self.network.tensors[k.tensor];
                let data = t.materialize();
                let min = crate::engine::psd_min_eigenvalue(&t.labels, &data).unwrap_or(f64::NAN);
                if !(min >= -1e-10) {
                    return Err(crate::Error::OutsideDomain(format!("double factor {} has eigenvalue {min}", k.tensor)));
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn plaquette_cell(g: &lattice::Graph, cycle: &[usize], labels: &[IndexLabel]) -> Cell {
    Cell {
        interior: cycle.iter().map(|&e| labels[e]).collect(),
        exterior: g.exterior_of(cycle).iter().map(|&e| labels[e]).collect(),
    }
}
