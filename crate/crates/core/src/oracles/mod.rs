//! Independent reference computations: exact contraction, closed-form
//! fixed points and the exact Villain free energy.

pub mod aklt;
pub mod exact;
pub mod ice;
pub mod reference_bp;
pub mod villain;

use std::collections::BTreeMap;

use serde::Serialize;

pub use exact::{brute_force_log_z, exact_contract, exact_log_z, sequential_contract};

/// A closed-form fixed point and the quantities derived from it.
#[derive(Clone, Debug, Serialize)]
pub struct AnalyticFixedPoint {
    pub model: String,
    pub parameter: f64,
    /// Named solution components.
    pub components: Vec<(String, f64)>,
    pub stable: Option<bool>,
    /// Moduli of the linearized-map eigenvalues, descending.
    pub spectrum: Vec<f64>,
    pub derived: BTreeMap<String, f64>,
    /// Residual of the defining fixed-point equation.
    pub residual: f64,
}

impl AnalyticFixedPoint {
    pub fn get(&self, key: &str) -> Option<f64> {
        self.derived.get(key).copied().or_else(|| self.components.iter().find(|(k, _)| k == key).map(|c| c.1))
    }
}

/// Bisection for a sign change of `h` on [lo, hi], to full precision.
pub fn bisect(mut lo: f64, mut hi: f64, h: impl Fn(f64) -> f64) -> f64 {
    let mut hl = h(lo);
    assert!(hl * h(hi) <= 0.0, "no sign change on [{lo}, {hi}]");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        let hm = h(mid);
        if hm == 0.0 {
            return mid;
        }
        if (hm < 0.0) == (hl < 0.0) {
            lo = mid;
            hl = hm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Central-difference Jacobian of a map R^n -> R^n.
pub(crate) fn jacobian(x: &[f64], h: f64, f: impl Fn(&[f64]) -> Vec<f64>) -> nalgebra::DMatrix<f64> {
    let n = x.len();
    let mut j = nalgebra::DMatrix::zeros(n, n);
    for k in 0..n {
        let mut xp = x.to_vec();
        xp[k] += h;
        let fp = f(&xp);
        xp[k] = x[k] - h;
        let fm = f(&xp);
        for i in 0..n {
            j[(i, k)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    j
}

pub(crate) fn spectrum(j: &nalgebra::DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = j.complex_eigenvalues().iter().map(|z| z.norm()).collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    s
}
