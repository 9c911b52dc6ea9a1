//! Closed-form simple BP solution of the deformed AKLT norm network.

use std::collections::BTreeMap;

use super::{jacobian, spectrum, AnalyticFixedPoint};
use crate::engine::MessageSet;
use crate::error::{Error, Result};
use crate::models::aklt::aklt_double_factor_closed;
use crate::region::RegionGraph;
use crate::tensor::{LabeledTensor, C64};

/// m(z, z') = ((1 + (-1)^z mu)(1 + (-1)^z' mu) - c (-1)^{delta(z,z')}) / 4.
pub fn aklt_message(mu: f64, c: f64) -> [f64; 4] {
    let sg = |z: usize| if z == 0 { 1.0 } else { -1.0 };
    let mut m = [0.0; 4];
    for z in 0..2 {
        for zp in 0..2 {
            let d = if z == zp { -1.0 } else { 1.0 };
            m[z * 2 + zp] = ((1.0 + sg(z) * mu) * (1.0 + sg(zp) * mu) - c * d) / 4.0;
        }
    }
    m
}

/// Inverse of `aklt_message` for a symmetric, sum-normalized message.
pub fn aklt_params(m: &[f64; 4]) -> (f64, f64) {
    let mu = m[0] - m[3];
    (mu, m[0] + m[3] - m[1] - m[2] - mu * mu)
}

/// One BP update on the (mu, c) parameters.
pub fn aklt_bp_map(x: &[f64], a: f64) -> Vec<f64> {
    let m = aklt_message(x[0], x[1]);
    let mut out = [0.0; 4];
    for x1 in 0..4 {
        for x2 in 0..4 {
            for (x3, o) in out.iter_mut().enumerate() {
                let t = aklt_double_factor_closed(a, [x1 / 2, x2 / 2, x3 / 2], [x1 % 2, x2 % 2, x3 % 2]);
                *o += t * m[x1] * m[x2];
            }
        }
    }
    let s: f64 = out.iter().sum();
    let (mu, c) = aklt_params(&out.map(|v| v / s));
    vec![mu, c]
}

/// The stable physical fixed point for `a`; `sign` picks the Neel branch.
pub fn aklt_bp_fixed_point(a: f64, sign: f64) -> (f64, f64) {
    let a2 = a * a;
    if a < 1.0 {
        (0.0, (3.0 - a2 - 2.0 * (2.0 * (1.0 - a2)).sqrt()) / (1.0 + a2))
    } else if a <= 5f64.sqrt() {
        (0.0, 1.0)
    } else {
        (sign * ((a2 - 5.0) / (a2 - 1.0)).sqrt(), 4.0 / (a2 - 1.0))
    }
}

pub fn aklt_bp_analytic(a: f64) -> Result<AnalyticFixedPoint> {
    if !(a > 0.0) {
        return Err(Error::OutsideDomain(format!("a = {a}")));
    }
    let (mu, c) = aklt_bp_fixed_point(a, 1.0);
    let s3 = 3f64.sqrt();
    let a2 = a * a;
    let sx = if a < 1.0 { 3.0 * (a2 - 2.0 * a * s3 - 5.0) * (2.0 * (1.0 - a2)).sqrt() / (8.0 * (a2 - 3.0)) } else { 0.0 };
    let sz = if a <= 5f64.sqrt() { 0.0 } else { 3.0 * ((a2 - 5.0) * (a2 - 1.0)).sqrt() / (a2 - 3.0) };
    let xx = if a <= 1.0 {
        (81.0 + 60.0 * a * s3 - a2 * (38.0 + 44.0 * a * s3 + 15.0 * a2)) / (32.0 * (a2 - 3.0))
    } else if a < 5f64.sqrt() {
        -(4.0 + 4.0 * s3 * a + 3.0 * a2) / (3.0 + a2).powi(2)
    } else {
        -(16.0 + a * (a2 - 3.0) * (8.0 * s3 - 9.0 * a + 3.0 * a2 * a)) / (2.0 * (a2 - 3.0) * (a2 - 1.0).powi(3))
    };
    let yy = if a < 1.0 { -(25.0 + a * (20.0 * s3 + a * (2.0 - 4.0 * a * s3 + a2))) / (32.0 * (3.0 - a2)) } else { xx };
    let zz = if a <= 1.0 {
        -(1.0 + a2).powi(2) / (8.0 * (3.0 - a2))
    } else if a < 5f64.sqrt() {
        -((1.0 + 3.0 * a2) / (2.0 * (3.0 + a2))).powi(2)
    } else {
        -(9.0 * a2.powi(3) - 45.0 * a2 * a2 + 31.0 * a2 - 27.0) / (4.0 * (a2 - 3.0) * (a2 - 1.0).powi(2))
    };
    // magnitude of xx - yy; the difference itself is negative
    let diff = if a < 1.0 { (1.0 - a2) * (2.0 * a2 + 5.0 * a * s3 + 7.0) / (4.0 * (3.0 - a2)) } else { 0.0 };
    let x = [mu, c];
    let spec = spectrum(&jacobian(&x, 1e-7, |v| aklt_bp_map(v, a)));
    let residual = aklt_bp_map(&x, a).iter().zip(&x).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
    let mut derived = BTreeMap::new();
    for (k, v) in [("sx_a", sx), ("sy_a", 0.0), ("sz_a", sz), ("xx", xx), ("yy", yy), ("zz", zz), ("xx_minus_yy", diff)] {
        derived.insert(k.to_string(), v);
    }
    Ok(AnalyticFixedPoint {
        model: "aklt_bp".into(),
        parameter: a,
        components: vec![("mu".into(), mu), ("c".into(), c)],
        stable: Some(spec[0] < 1.0),
        spectrum: spec,
        derived,
        residual,
    })
}

/// Engine messages for simple BP: the same (mu, c) message on every bond.
pub fn aklt_bp_messages(graph: &RegionGraph, mu: f64, c: f64) -> MessageSet {
    let m = aklt_message(mu, c);
    let mut entries = BTreeMap::new();
    for b in graph.children() {
        let t = LabeledTensor::from_fn(graph.regions[b].labels.clone(), |x| C64::new(m[x[0]], 0.0));
        for &a in &graph.parent_links[b] {
            entries.insert((a, b), t.clone());
        }
    }
    MessageSet { entries }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameterization_round_trip() {
        let m = aklt_message(0.3, -0.2);
        assert!((m.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        let (mu, c) = aklt_params(&m);
        assert!((mu - 0.3).abs() < 1e-15 && (c + 0.2).abs() < 1e-15);
    }

    #[test]
    fn fixed_points_solve_the_map() {
        for a in [0.2, 0.5, 0.9, 1.5, 3f64.sqrt(), 2.0, 3.0, 5.0] {
            let fp = aklt_bp_analytic(a).unwrap();
            assert!(fp.residual < 1e-12, "a={a} residual {}", fp.residual);
            assert!(fp.stable.unwrap(), "a={a} spectrum {:?}", fp.spectrum);
        }
    }

    #[test]
    fn su2_point_and_limits() {
        let fp = aklt_bp_analytic(3f64.sqrt()).unwrap();
        for k in ["xx", "yy", "zz"] {
            assert!((fp.get(k).unwrap() + 25.0 / 36.0).abs() < 1e-12);
        }
        let big = aklt_bp_analytic(1e4).unwrap();
        assert!((big.get("zz").unwrap() + 2.25).abs() < 1e-3);
        assert!(big.get("xx").unwrap().abs() < 1e-3);
        let small = aklt_bp_analytic(0.5).unwrap();
        let d = small.get("xx").unwrap() - small.get("yy").unwrap();
        assert!((d.abs() - small.get("xx_minus_yy").unwrap()).abs() < 1e-12);
        // correlators are continuous across both regime boundaries
        for a in [1.0, 5f64.sqrt()] {
            let (lo, hi) = (aklt_bp_analytic(a - 1e-9).unwrap(), aklt_bp_analytic(a + 1e-9).unwrap());
            for k in ["xx", "yy", "zz"] {
                assert!((lo.get(k).unwrap() - hi.get(k).unwrap()).abs() < 1e-6, "{k} at {a}");
            }
        }
        assert!(matches!(aklt_bp_analytic(0.0), Err(Error::OutsideDomain(_))));
    }

    #[test]
    fn marginal_at_regime_boundaries() {
        for a in [1.0, 5f64.sqrt()] {
            let (mu, c) = aklt_bp_fixed_point(a, 1.0);
            let s = spectrum(&jacobian(&[mu, c], 1e-6, |v| aklt_bp_map(v, a)));
            assert!((s[0] - 1.0).abs() < 1e-4, "a={a} {:?}", s);
        }
    }
}
