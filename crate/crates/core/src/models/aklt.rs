//! Norm network of the deformed spin-3/2 AKLT state on the honeycomb lattice.
//! Physical basis order: 3/2, 1/2, -1/2, -3/2.

use super::lattice::{honeycomb_torus, honeycomb_torus_faces};
use super::{plaquette_cell, Boundary, Ket, LatticeKind, LatticeSpec, ModelInstance};
use crate::network::{Geometry, Network};
use crate::tensor::{IndexLabel, C64};

/// Ket tensor of sublattice A (`b = false`) or B, row-major over (z1, z2, z3, s).
pub fn aklt_ket(a: f64, b: bool) -> Vec<C64> {
    let mut data = vec![C64::new(0.0, 0.0); 8 * 4];
    for z in 0..8usize {
        let w = z.count_ones();
        let (s, v) = match (w, b) {
            (0, false) => (0, a),
            (1, false) => (1, 1.0),
            (2, false) => (2, 1.0),
            (3, false) => (3, a),
            (0, true) => (3, -a),
            (2, true) => (1, -1.0),
            (1, true) => (2, 1.0),
            (3, true) => (0, a),
            _ => unreachable!(),
        };
        data[z * 4 + s] = v.into();
    }
    data
}

/// Closed form of the double factor, identical on both sublattices.
pub fn aklt_double_factor_closed(a: f64, z: [usize; 3], zp: [usize; 3]) -> f64 {
    let (w, wp) = (z.iter().sum::<usize>(), zp.iter().sum::<usize>());
    if (w == 0 && wp == 0) || (w == 3 && wp == 3) {
        a * a
    } else if w == wp && (w == 1 || w == 2) {
        1.0
    } else {
        0.0
    }
}

/// `cells` = (lx, ly) two-site unit cells on the torus.
pub fn aklt_norm_network(a: f64, cells: (usize, usize)) -> ModelInstance {
    assert!(a > 0.0);
    let g = honeycomb_torus(cells.0, cells.1);
    let labels: Vec<IndexLabel> = (0..g.edges.len()).map(|e| IndexLabel::new(e as u32, 4)).collect();
    let mut kets = Vec::new();
    let mut tensors = Vec::new();
    for v in 0..g.n {
        let ket = Ket {
            tensor: v,
            legs: g.adj[v].iter().map(|&(_, e)| labels[e]).collect(),
            chi: 2,
            phys: 4,
            data: aklt_ket(a, v % 2 == 1),
        };
        tensors.push(ket.double_factor(None));
        kets.push(ket);
    }
    let plaquettes = honeycomb_torus_faces(cells.0, cells.1).iter().map(|c| plaquette_cell(&g, c, &labels)).collect();
    ModelInstance {
        name: "aklt".into(),
        network: Network::new(tensors).with_geometry(Geometry { plaquettes, voxels: vec![] }),
        lattice: LatticeSpec {
            kind: LatticeKind::Honeycomb,
            extents: vec![cells.0, cells.1],
            boundary: Boundary::Periodic,
            cell_sites: 2,
        },
        site_count: g.n,
        kets: Some(kets),
        edge_terms: vec![],
        neighbours: g.edges.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_closed_form(a: f64) {
        let m = aklt_norm_network(a, (2, 2));
        for t in &m.network.tensors {
            let d = t.materialize();
            for (off, v) in d.iter().enumerate() {
                let x = [off / 16, (off / 4) % 4, off % 4];
                let want = aklt_double_factor_closed(a, x.map(|v| v / 2), x.map(|v| v % 2));
                assert!((v - C64::new(want, 0.0)).norm() <= 1e-14);
            }
        }
    }

    #[test]
    fn double_factor_matches_closed_form() {
        for a in [0.2, 1.0, 3f64.sqrt(), 3.0] {
            check_closed_form(a);
        }
    }

    #[test]
    fn double_factors_are_psd_and_nonnegative() {
        for a in [0.2, 3f64.sqrt(), 3.0] {
            let m = aklt_norm_network(a, (2, 2));
            m.check().unwrap();
            for t in &m.network.tensors {
                assert!(t.materialize().iter().all(|v| v.re >= 0.0 && v.im == 0.0));
                let min = crate::engine::psd_min_eigenvalue(&t.labels, &t.materialize()).unwrap();
                assert!(min >= -1e-12);
            }
        }
    }

    #[test]
    fn hexagon_metadata() {
        let m = aklt_norm_network(1.0, (4, 4));
        let g = m.network.geometry.as_ref().unwrap();
        assert_eq!(g.plaquettes.len(), 16);
        assert!(g.plaquettes.iter().all(|p| p.interior.len() == 6 && p.exterior.len() == 6));
    }
}
