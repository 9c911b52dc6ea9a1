//! Fully frustrated square-lattice Ising (Villain) model.
//!
//! H = -sum J_ij s_i s_j with J = -1 on horizontal bonds of odd rows and +1
//! elsewhere. Spin index 0 is s = +1, index 1 is s = -1.

use serde::{Deserialize, Serialize};

use super::{Boundary, EdgeTerm, LatticeKind, LatticeSpec, ModelInstance};
use crate::network::{Cell, Geometry, Network};
use crate::tensor::{IndexLabel, LabeledTensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    VertexTensor,
    #[default]
    FactorGraph,
}

pub fn spin(i: usize) -> f64 {
    if i == 0 {
        1.0
    } else {
        -1.0
    }
}

pub fn coupling(row: usize, horizontal: bool) -> f64 {
    if horizontal && row % 2 == 1 {
        -1.0
    } else {
        1.0
    }
}

fn boltzmann(beta: f64, j: f64) -> [f64; 4] {
    let w = |a: usize, b: usize| (beta * j * spin(a) * spin(b)).exp();
    [w(0, 0), w(0, 1), w(1, 0), w(1, 1)]
}

fn bond_energy(labels: Vec<IndexLabel>, j: f64) -> LabeledTensor {
    LabeledTensor::from_fn(labels, |x| (-j * spin(x[0]) * spin(x[1])).into())
}

/// `cells` = (columns, rows) of 2x2 unit cells. The vertex representation
/// is only built on the torus.
pub fn villain_network(beta: f64, cells: (usize, usize), repr: Representation, boundary: Boundary) -> ModelInstance {
    assert!(beta >= 0.0);
    let (w, h) = (2 * cells.0, 2 * cells.1);
    let lattice = LatticeSpec {
        kind: LatticeKind::Square,
        extents: vec![cells.0, cells.1],
        boundary,
        cell_sites: 4,
    };
    match repr {
        Representation::FactorGraph => factor_graph(beta, w, h, boundary, lattice),
        Representation::VertexTensor => {
            assert_eq!(boundary, Boundary::Periodic, "vertex representation is periodic only");
            vertex_tensor(beta, w, h, lattice)
        }
    }
}

fn factor_graph(beta: f64, w: usize, h: usize, boundary: Boundary, lattice: LatticeSpec) -> ModelInstance {
    let periodic = boundary == Boundary::Periodic;
    let s = |r: usize, c: usize| IndexLabel::new((r * w + c) as u32, 2);
    let mut tensors = Vec::new();
    let mut edge_terms = Vec::new();
    for r in 0..h {
        for c in 0..w {
            let mut bonds = vec![];
            if periodic || c + 1 < w {
                bonds.push(((r, (c + 1) % w), coupling(r, true)));
            }
            if periodic || r + 1 < h {
                bonds.push((((r + 1) % h, c), coupling(r, false)));
            }
            for ((r2, c2), j) in bonds {
                let labels = vec![s(r, c), s(r2, c2)];
                edge_terms.push(EdgeTerm {
                    sites: (r * w + c, r2 * w + c2),
                    energy: bond_energy(labels.clone(), j),
                    tensor: tensors.len(),
                });
                tensors.push(LabeledTensor::from_real(labels, &boltzmann(beta, j)));
            }
        }
    }
    let mut plaquettes = Vec::new();
    let (pr, pc) = if periodic { (h, w) } else { (h - 1, w - 1) };
    for r in 0..pr {
        for c in 0..pc {
            let (r1, c1) = ((r + 1) % h, (c + 1) % w);
            let interior = vec![s(r, c), s(r, c1), s(r1, c), s(r1, c1)];
            let mut exterior = Vec::new();
            for (a, b) in [(r, c), (r, c1), (r1, c), (r1, c1)] {
                let nb = [
                    (a as i64, b as i64 - 1),
                    (a as i64, b as i64 + 1),
                    (a as i64 - 1, b as i64),
                    (a as i64 + 1, b as i64),
                ];
                for (x, y) in nb {
                    let inside = (0..h as i64).contains(&x) && (0..w as i64).contains(&y);
                    if !inside && !periodic {
                        continue;
                    }
                    let l = s(x.rem_euclid(h as i64) as usize, y.rem_euclid(w as i64) as usize);
                    if !interior.contains(&l) && !exterior.contains(&l) {
                        exterior.push(l);
                    }
                }
            }
            plaquettes.push(Cell { interior, exterior });
        }
    }
    let network = Network::new(tensors).with_geometry(Geometry { plaquettes, voxels: vec![] });
    ModelInstance {
        name: "villain_factor_graph".into(),
        network,
        lattice,
        site_count: w * h,
        kets: None,
        edge_terms,
        neighbours: vec![],
    }
}

fn vertex_tensor(beta: f64, w: usize, h: usize, lattice: LatticeSpec) -> ModelInstance {
    let hb = |r: usize, c: usize| IndexLabel::new((2 * (r * w + c)) as u32, 2);
    let vb = |r: usize, c: usize| IndexLabel::new((2 * (r * w + c) + 1) as u32, 2);
    let mut tensors = Vec::new();
    let mut edge_terms = Vec::new();
    let mut neighbours = Vec::new();
    for r in 0..h {
        for c in 0..w {
            let v = r * w + c;
            let left = hb(r, (c + w - 1) % w);
            let up = vb((r + h - 1) % h, c);
            let (jh, jv) = (coupling(r, true), coupling(r, false));
            let (wh, wv) = (boltzmann(beta, jh), boltzmann(beta, jv));
            let t = LabeledTensor::from_fn(vec![left, up, hb(r, c), vb(r, c)], |x| {
                if x[0] != x[1] {
                    return 0.0.into();
                }
                (wh[2 * x[0] + x[2]] * wv[2 * x[0] + x[3]]).into()
            });
            tensors.push(t);
            let right = r * w + (c + 1) % w;
            let down = ((r + 1) % h) * w + c;
            edge_terms.push(EdgeTerm { sites: (v, right), energy: bond_energy(vec![left, hb(r, c)], jh), tensor: v });
            edge_terms.push(EdgeTerm { sites: (v, down), energy: bond_energy(vec![left, vb(r, c)], jv), tensor: v });
            neighbours.push((v, right));
            neighbours.push((v, down));
        }
    }
    let mut plaquettes = Vec::new();
    for r in 0..h {
        for c in 0..w {
            let (r1, c1) = ((r + 1) % h, (c + 1) % w);
            let interior = vec![hb(r, c), hb(r1, c), vb(r, c), vb(r, c1)];
            let mut exterior = Vec::new();
            for v in [r * w + c, r * w + c1, r1 * w + c, r1 * w + c1] {
                for l in &tensors[v].labels {
                    if !interior.contains(l) && !exterior.contains(l) {
                        exterior.push(*l);
                    }
                }
            }
            plaquettes.push(Cell { interior, exterior });
        }
    }
    let network = Network::new(tensors).with_geometry(Geometry { plaquettes, voxels: vec![] });
    ModelInstance {
        name: "villain_vertex".into(),
        network,
        lattice,
        site_count: w * h,
        kets: None,
        edge_terms,
        neighbours,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::exact::{brute_force_log_z, exact_log_z};

    fn energy(w: usize, h: usize, periodic: bool, bits: usize) -> f64 {
        let s = |r: usize, c: usize| if bits >> (r * w + c) & 1 == 0 { 1.0 } else { -1.0 };
        let mut e = 0.0;
        for r in 0..h {
            for c in 0..w {
                if periodic || c + 1 < w {
                    e -= coupling(r, true) * s(r, c) * s(r, (c + 1) % w);
                }
                if periodic || r + 1 < h {
                    e -= coupling(r, false) * s(r, c) * s((r + 1) % h, c);
                }
            }
        }
        e
    }

    #[test]
    fn beta_zero_is_all_ones() {
        let m = villain_network(0.0, (2, 2), Representation::FactorGraph, Boundary::Periodic);
        assert!(m.network.tensors.iter().all(|t| t.materialize().iter().all(|&x| x == 1.0.into())));
        m.check().unwrap();
    }

    #[test]
    fn open_plaquette_ground_states() {
        // 4 ways to leave one bond unsatisfied, times a global flip
        let energies: Vec<f64> = (0..16).map(|b| energy(2, 2, false, b)).collect();
        let min = energies.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(min, -2.0);
        assert_eq!(energies.iter().filter(|&&e| e == min).count(), 8);
        // and the network agrees: Z e^{-beta E0} -> degeneracy
        let beta = 30.0;
        let m = villain_network(beta, (1, 1), Representation::FactorGraph, Boundary::Open);
        let lz = brute_force_log_z(&m.network.tensors).unwrap().re;
        assert!((lz - 2.0 * beta - 8f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn representations_agree_on_torus() {
        let beta = 0.7;
        let direct = {
            let zs: Vec<f64> = (0..1usize << 16).map(|b| -beta * energy(4, 4, true, b)).collect();
            let m = zs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            m + zs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
        };
        let fg = villain_network(beta, (2, 2), Representation::FactorGraph, Boundary::Periodic);
        let vt = villain_network(beta, (2, 2), Representation::VertexTensor, Boundary::Periodic);
        fg.check().unwrap();
        vt.check().unwrap();
        let a = brute_force_log_z(&fg.network.tensors).unwrap().re;
        let b = exact_log_z(&vt.network.tensors).unwrap().re;
        assert!((a - direct).abs() < 1e-10, "{a} {direct}");
        assert!((b - direct).abs() < 1e-10, "{b} {direct}");
    }

    #[test]
    fn plaquette_metadata() {
        let vt = villain_network(0.3, (2, 2), Representation::VertexTensor, Boundary::Periodic);
        let g = vt.network.geometry.as_ref().unwrap();
        assert_eq!(g.plaquettes.len(), 16);
        assert!(g.plaquettes.iter().all(|p| p.interior.len() == 4 && p.exterior.len() == 8));
        let fg = villain_network(0.3, (1, 1), Representation::FactorGraph, Boundary::Open);
        assert_eq!(fg.network.geometry.as_ref().unwrap().plaquettes.len(), 1);
        assert_eq!(fg.network.tensors.len(), 4);
    }
}
