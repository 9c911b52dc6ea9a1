//! Villain model references: the exact free energy integral and the closed
//! forms of the paramagnetic BP and plaquette GBP fixed points.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{bisect, jacobian, spectrum, AnalyticFixedPoint};
use crate::engine::MessageSet;
use crate::error::{Error, Result};
use crate::models::ModelInstance;
use crate::region::RegionGraph;
use crate::tensor::{LabeledTensor, C64};

/// Target absolute error of the quadratures.
pub const QUAD_TOL: f64 = 1e-12;
/// Step of the five-point energy difference.
pub const FD_STEP: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct Thermo {
    pub f: f64,
    pub e: f64,
    pub s: f64,
}

fn ln_2cosh(beta: f64) -> f64 {
    let b = beta.abs();
    b + (-2.0 * b).exp().ln_1p()
}

fn check(q: quadrature::Output, scale: f64) -> Result<Quadrature> {
    let error = q.error_estimate * scale;
    if !(error <= 1e-9) || !q.integral.is_finite() {
        return Err(Error::QuadratureNonConvergence);
    }
    Ok(Quadrature { value: q.integral * scale, error })
}

/// Per-spin f = -ln Z / N. The theta integral is done in closed form,
/// int_0^pi ln(A - B cos t) dt = pi ln((A + sqrt(A^2 - B^2)) / 2).
pub fn villain_exact_f(beta: f64) -> Result<Quadrature> {
    if beta < 0.0 || beta.is_nan() {
        return Err(Error::OutsideDomain(format!("beta = {beta}")));
    }
    let z2 = beta.tanh().powi(2);
    let b = 2.0 * z2;
    let inner = |phi: f64| {
        let a = (1.0 + z2).powi(2) - 2.0 * z2 * phi.cos();
        PI * ((a + (a * a - b * b).max(0.0).sqrt()) / 2.0).ln()
    };
    let q = check(quadrature::integrate(inner, 0.0, PI, QUAD_TOL), 1.0 / (4.0 * PI * PI))?;
    Ok(Quadrature { value: -(ln_2cosh(beta) + q.value), error: q.error })
}

/// The same integral done as a nested two-dimensional quadrature.
pub fn villain_exact_f_2d(beta: f64) -> Result<Quadrature> {
    let z2 = beta.tanh().powi(2);
    let outer = |phi: f64| {
        quadrature::integrate(
            |theta: f64| ((1.0 + z2).powi(2) - 2.0 * z2 * (phi.cos() + theta.cos())).ln(),
            0.0,
            PI,
            QUAD_TOL,
        )
        .integral
    };
    let q = check(quadrature::integrate(outer, 0.0, PI, 1e-10), 1.0 / (4.0 * PI * PI))?;
    Ok(Quadrature { value: -(ln_2cosh(beta) + q.value), error: q.error })
}

/// f, e = df/dbeta by a five-point difference, and s = beta e - f.
pub fn villain_exact_thermo(beta: f64) -> Result<Thermo> {
    let f = |b: f64| villain_exact_f(b.abs()).map(|q| q.value);
    let h = FD_STEP;
    let e = (-f(beta + 2.0 * h)? + 8.0 * f(beta + h)? - 8.0 * f(beta - h)? + f(beta - 2.0 * h)?) / (12.0 * h);
    let f0 = f(beta)?;
    Ok(Thermo { f: f0, e, s: beta * e - f0 })
}

pub const CATALAN: f64 = 0.915_965_594_177_219;

// ---- simple BP ----

fn bp_f(x: f64, y: f64) -> f64 {
    (2.0 * x + y + x * x * y) / (1.0 + 2.0 * x * y + x * x)
}

/// BP update of (mu_pp, mu_mp, mu_pm, mu_mm).
pub fn villain_bp_map(mu: &[f64], beta: f64) -> Vec<f64> {
    let t = beta.tanh();
    let (pp, mp, pm, mm) = (mu[0], mu[1], mu[2], mu[3]);
    vec![t * bp_f(mp, pp), t * bp_f(mm, pm), t * bp_f(pp, mp), -t * bp_f(pm, mm)]
}

/// Physical (|mu| <= 1) fixed points found by Newton from `starts` random points.
pub fn villain_bp_roots(beta: f64, starts: usize, seed: u64) -> Vec<[f64; 4]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut roots: Vec<[f64; 4]> = Vec::new();
    let g = |x: &[f64]| villain_bp_map(x, beta).iter().zip(x).map(|(a, b)| a - b).collect::<Vec<_>>();
    for _ in 0..starts {
        let mut x: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for _ in 0..100 {
            let r = nalgebra::DVector::from_vec(g(&x));
            if r.norm() < 1e-14 {
                break;
            }
            let j = jacobian(&x, 1e-7, g);
            let Some(dx) = j.lu().solve(&r) else { break };
            for k in 0..4 {
                x[k] -= dx[k];
            }
            if x.iter().any(|v| !v.is_finite() || v.abs() > 10.0) {
                break;
            }
        }
        let res: f64 = g(&x).iter().map(|v| v.abs()).fold(0.0, f64::max);
        if res < 1e-12 && x.iter().all(|v| v.abs() <= 1.0 + 1e-9) {
            let r = [x[0], x[1], x[2], x[3]];
            if !roots.iter().any(|q| q.iter().zip(&r).all(|(a, b)| (a - b).abs() < 1e-6)) {
                roots.push(r);
            }
        }
    }
    roots
}

/// tanh(beta_c) = 1/sqrt(3).
pub fn villain_bp_beta_c() -> f64 {
    (1.0 / 3f64.sqrt()).atanh()
}

/// The paramagnetic fixed point mu = 0, its spectrum and Bethe thermodynamics.
pub fn villain_bp_analytic(beta: f64) -> AnalyticFixedPoint {
    let zero = [0.0; 4];
    let spec = spectrum(&jacobian(&zero, 1e-6, |x| villain_bp_map(x, beta)));
    let t = beta.tanh();
    let f = -(2f64.ln()) - 2.0 * (ln_2cosh(beta) - 2f64.ln());
    let e = -2.0 * t;
    let mut derived = BTreeMap::new();
    derived.insert("f".into(), f);
    derived.insert("e".into(), e);
    derived.insert("s".into(), beta * e - f);
    derived.insert("beta_c".into(), villain_bp_beta_c());
    AnalyticFixedPoint {
        model: "villain_bp".into(),
        parameter: beta,
        components: ["mu_pp", "mu_mp", "mu_pm", "mu_mm"].iter().map(|k| (k.to_string(), 0.0)).collect(),
        stable: Some(spec[0] < 1.0),
        spectrum: spec,
        derived,
        residual: villain_bp_map(&zero, beta).iter().map(|v| v.abs()).sum(),
    }
}

// ---- plaquette GBP ----

pub fn g(x: f64, t: f64) -> f64 {
    (x + t) / (1.0 + x * t)
}

/// GBP update of (c_pp, c_pm, c_mm).
pub fn villain_gbp_map(c: &[f64], beta: f64) -> Vec<f64> {
    let t = beta.tanh();
    let (pp, pm, mm) = (c[0], c[1], c[2]);
    vec![
        -g(-mm, t) * g(pm, t).powi(2),
        -g(pp, t) * g(pm, t) * g(-mm, t),
        g(pp, t) * g(pm, t).powi(2),
    ]
}

/// c* on [-1, 0] with c* = -g(c*)^3.
pub fn villain_c_star(beta: f64) -> f64 {
    let t = beta.tanh();
    if t == 0.0 {
        return 0.0;
    }
    bisect(-1.0, 0.0, |c| c + g(c, t).powi(3))
}

/// Plaquette belief with trivial site marginals: prod over edges of
/// (1 + J g(c*) x x'), spins ordered (top-left, top-right, bottom-left,
/// bottom-right); top edge J = +1, bottom J = -1, verticals J = +1.
fn plaquette_belief(gs: f64) -> [f64; 16] {
    let edges = [(0, 1, 1.0), (2, 3, -1.0), (0, 2, 1.0), (1, 3, 1.0)];
    let mut b = [0.0; 16];
    for (s, v) in b.iter_mut().enumerate() {
        let x = |i: usize| if s >> (3 - i) & 1 == 0 { 1.0 } else { -1.0 };
        *v = edges.iter().map(|&(i, j, jj)| 1.0 + jj * gs * x(i) * x(j)).product();
    }
    let z: f64 = b.iter().sum();
    b.map(|v| v / z)
}

fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&v| v > 0.0).map(|v| v * v.ln()).sum::<f64>()
}

/// Kikuchi thermodynamics per spin of the plaquette region graph at c*:
/// plaquettes count +1, edges -1 and sites +1 (one plaquette, two bonds
/// and one site per spin).
pub fn villain_gbp_thermo(beta: f64) -> Thermo {
    let c = villain_c_star(beta);
    let b = plaquette_belief(g(c, beta.tanh()));
    let edges = [(0, 1, 1.0), (2, 3, -1.0), (0, 2, 1.0), (1, 3, 1.0)];
    let mut e_edge = [0.0; 4];
    let mut h_edge = [0.0; 4];
    for (k, &(i, j, jj)) in edges.iter().enumerate() {
        let mut corr = 0.0;
        for (s, p) in b.iter().enumerate() {
            let x = |i: usize| if s >> (3 - i) & 1 == 0 { 1.0 } else { -1.0 };
            corr += p * x(i) * x(j);
        }
        e_edge[k] = -jj * corr;
        let m = [(1.0 + corr) / 4.0, (1.0 - corr) / 4.0, (1.0 - corr) / 4.0, (1.0 + corr) / 4.0];
        h_edge[k] = entropy(&m);
    }
    // each plaquette owns half of its two horizontal and two vertical bonds
    let per_spin = |v: [f64; 4]| 0.5 * (v[0] + v[1] + v[2] + v[3]);
    let e = per_spin(e_edge);
    let s = entropy(&b) - per_spin(h_edge) + 2f64.ln();
    Thermo { f: beta * e - s, e, s }
}

pub fn villain_gbp_analytic(beta: f64) -> AnalyticFixedPoint {
    let c = villain_c_star(beta);
    let x = [c, c, -c];
    let spec = spectrum(&jacobian(&x, 1e-7, |v| villain_gbp_map(v, beta)));
    let th = villain_gbp_thermo(beta);
    let mut derived = BTreeMap::new();
    derived.insert("f".into(), th.f);
    derived.insert("e".into(), th.e);
    derived.insert("s".into(), th.s);
    derived.insert("s_zero_temperature".into(), (3.0 * 3f64.sqrt() / 4.0).ln());
    derived.insert("weak_instability_beta".into(), 1.092);
    let residual = villain_gbp_map(&x, beta).iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    AnalyticFixedPoint {
        model: "villain_gbp".into(),
        parameter: beta,
        components: vec![("c_pp".into(), c), ("c_pm".into(), c), ("c_mm".into(), -c)],
        stable: Some(spec[0] < 1.0),
        spectrum: spec,
        derived,
        residual,
    }
}

/// Engine messages for the plaquette GBP fixed point on a factor-graph
/// Villain model: (1 + J c* x x')/4 into bond children, uniform into sites.
pub fn villain_gbp_messages(model: &ModelInstance, graph: &RegionGraph, beta: f64) -> Result<MessageSet> {
    let c = villain_c_star(beta);
    let mut couplings = BTreeMap::new();
    for t in &model.edge_terms {
        let ids = t.energy.label_ids();
        // energy is -J x x'; at x = x' = +1 it equals -J
        let j = -t.energy.materialize()[0].re;
        couplings.insert((ids[0].min(ids[1]), ids[0].max(ids[1])), j);
    }
    let mut entries = BTreeMap::new();
    for b in graph.children() {
        let labels = graph.regions[b].labels.clone();
        let msg = match labels.len() {
            1 => LabeledTensor::from_fn(labels, |_| C64::new(0.5, 0.0)),
            2 => {
                let j = *couplings
                    .get(&(labels[0].id, labels[1].id))
                    .ok_or_else(|| Error::LabelMismatch("child is not a bond".into()))?;
                LabeledTensor::from_fn(labels, |x| {
                    let xx = if x[0] == x[1] { 1.0 } else { -1.0 };
                    C64::new((1.0 + j * c * xx) / 4.0, 0.0)
                })
            }
            _ => return Err(Error::LabelMismatch("unexpected child region".into())),
        };
        for &a in &graph.parent_links[b] {
            entries.insert((a, b), msg.clone());
        }
    }
    Ok(MessageSet { entries })
}
