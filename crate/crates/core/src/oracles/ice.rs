//! Residual entropy references for ice models.

use std::collections::BTreeMap;

use super::{bisect, jacobian, spectrum, AnalyticFixedPoint};

pub const PAULING: f64 = 1.5;
/// Exact square ice value 8 sqrt(3) / 9.
pub fn lieb_square() -> f64 {
    8.0 * 3f64.sqrt() / 9.0
}
/// Quoted R1-plaquette value for hexagonal ice.
pub const HEXAGONAL_R1: f64 = 1.504_262_7;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IceKind {
    Square,
    Diamond,
    Hexagonal,
}

/// Square lattice update (c_v, c_p) -> (c_p^3, -(3 c_v^2 + 1)/(3 + c_v^2)).
pub fn square_map(x: &[f64]) -> Vec<f64> {
    let (cv, cp) = (x[0], x[1]);
    vec![cp.powi(3), -(3.0 * cv * cv + 1.0) / (3.0 + cv * cv)]
}

/// Diamond update (c_v, c_p).
pub fn diamond_map(x: &[f64]) -> Vec<f64> {
    let (cv, cp) = (x[0], x[1]);
    vec![
        2.0 * cp.powi(5) / (1.0 + cp.powi(10)),
        -(1.0 + 3.0 * cv - cp.powi(5) * (3.0 + cv)) / (3.0 + cv - cp.powi(5) * (1.0 + 3.0 * cv)),
    ]
}

pub fn ice_gbp_analytic(kind: IceKind) -> AnalyticFixedPoint {
    let mut derived = BTreeMap::new();
    derived.insert("bp_exp_s0".into(), PAULING);
    let (components, exp_s0, residual, spec) = match kind {
        IceKind::Square => {
            let cp = bisect(-0.5, 0.0, |c| c + (3.0 * c.powi(6) + 1.0) / (3.0 + c.powi(6)));
            let c3 = cp.powi(3);
            let v = (1.0 - c3).powi(2) * (3.0 + 2.0 * c3 + 3.0 * c3 * c3) / (2.0 * (1.0 + cp.powi(4)).powi(3));
            let x = [c3, cp];
            let r = square_map(&x).iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            derived.insert("exact_exp_s0".into(), lieb_square());
            (vec![("c_v".to_string(), c3), ("c_p".to_string(), cp)], v, r, spectrum(&jacobian(&x, 1e-7, square_map)))
        }
        IceKind::Diamond => {
            let cp = bisect(-1.0, 0.0, |c| c + (3.0 * c.powi(5) + 1.0) / (3.0 + c.powi(5)));
            let c5 = cp.powi(5);
            let v = 1.5 * (1.0 + c5).powi(4) * (1.0 - c5).powi(8) / (1.0 + cp.powi(6)).powi(10);
            let cv = 2.0 * c5 / (1.0 + c5 * c5);
            let x = [cv, cp];
            let r = diamond_map(&x).iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            (vec![("c_v".to_string(), cv), ("c_p".to_string(), cp)], v, r, spectrum(&jacobian(&x, 1e-7, diamond_map)))
        }
        IceKind::Hexagonal => (vec![], HEXAGONAL_R1, 0.0, vec![]),
    };
    derived.insert("exp_s0".into(), exp_s0);
    AnalyticFixedPoint {
        model: format!("ice_{kind:?}").to_lowercase(),
        parameter: 0.0,
        components,
        stable: spec.first().map(|&r| r < 1.0),
        spectrum: spec,
        derived,
        residual,
    }
}

/// Number of ice configurations on an l x l square torus, Tr T^l with the
/// 2^l row transfer matrix over vertical bond states.
pub fn square_ice_count(l: usize) -> u128 {
    let n = 1usize << l;
    let bit = |s: usize, c: usize| (s >> c) & 1;
    let mut t = vec![vec![0u128; n]; n];
    for (u, row) in t.iter_mut().enumerate() {
        for (d, entry) in row.iter_mut().enumerate() {
            for h in 0..n {
                let ok = (0..l).all(|c| bit(h, (c + l - 1) % l) + bit(u, c) + bit(h, c) + bit(d, c) == 2);
                *entry += ok as u128;
            }
        }
    }
    let mul = |a: &Vec<Vec<u128>>, b: &Vec<Vec<u128>>| {
        let mut c = vec![vec![0u128; n]; n];
        for i in 0..n {
            for k in 0..n {
                if a[i][k] != 0 {
                    for j in 0..n {
                        c[i][j] += a[i][k] * b[k][j];
                    }
                }
            }
        }
        c
    };
    let mut p = t.clone();
    for _ in 1..l {
        p = mul(&p, &t);
    }
    (0..n).map(|i| p[i][i]).sum()
}
