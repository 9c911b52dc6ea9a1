//! Beliefs of tensor subsets, network derivatives and expectation values.

use crate::engine::GbpState;
use crate::error::{Error, Result};
use crate::models::ModelInstance;
use crate::oracles::villain::Thermo;
use crate::region::{counting_numbers, label_subset};
use crate::tensor::{embed_strides, hadamard, is_zero, marginal, sum_over, IndexLabel, LabeledTensor, C64};

/// Belief on a label set together with the regions used to build it.
#[derive(Clone, Debug)]
pub struct Stitched {
    pub belief: LabeledTensor,
    /// (region, restricted counting number); a single entry with weight 1
    /// when one region already contains the whole set.
    pub weights: Vec<(usize, i64)>,
    /// Entries where a zero belief was raised to a negative power.
    pub degeneracies: usize,
}

#[derive(Clone, Debug)]
pub struct Derivative {
    /// Environment on the boundary labels of the subset.
    pub env: LabeledTensor,
    /// Labels summed inside the subset.
    pub interior: Vec<IndexLabel>,
    /// Nonzero belief mass found on zero factor entries.
    pub degeneracies: usize,
}

fn dedup(labels: &[IndexLabel]) -> Vec<IndexLabel> {
    let mut out: Vec<IndexLabel> = Vec::new();
    for l in labels {
        if !out.iter().any(|x| x.id == l.id) {
            out.push(*l);
        }
    }
    out
}

/// Product of powers of tensors broadcast over `labels`, with 0^c treated as 0
/// for either sign of c.
fn broadcast_product(labels: &[IndexLabel], parts: &[(LabeledTensor, f64)]) -> (Vec<C64>, usize) {
    let dims: Vec<usize> = labels.iter().map(|l| l.dim).collect();
    let total: usize = dims.iter().product();
    let data: Vec<Vec<C64>> = parts.iter().map(|(t, _)| t.materialize()).collect();
    let strides: Vec<Vec<usize>> = parts.iter().map(|(t, _)| embed_strides(&t.labels, labels)).collect();
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; dims.len()];
    let mut off = vec![0usize; parts.len()];
    let mut degenerate = 0;
    for _ in 0..total {
        let mut acc = C64::new(1.0, 0.0);
        let (mut zero, mut inverse_zero) = (false, false);
        for (k, (_, c)) in parts.iter().enumerate() {
            let v = data[k][off[k]];
            if is_zero(v) {
                zero |= *c > 0.0;
                inverse_zero |= *c < 0.0;
            } else if *c == 1.0 {
                acc *= v;
            } else {
                acc *= v.powf(*c);
            }
        }
        if inverse_zero && !zero {
            degenerate += 1;
        }
        out.push(if zero || inverse_zero { C64::default() } else { acc });
        let mut k = dims.len();
        while k > 0 {
            k -= 1;
            idx[k] += 1;
            for (o, s) in off.iter_mut().zip(&strides) {
                *o += s[k];
            }
            if idx[k] < dims[k] {
                break;
            }
            for (o, s) in off.iter_mut().zip(&strides) {
                *o -= s[k] * dims[k];
            }
            idx[k] = 0;
        }
    }
    (out, degenerate)
}

/// Approximate marginal on `labels` (returned in that order). A single region
/// containing every label is marginalized directly; otherwise the beliefs of
/// all regions inside the set are multiplied with counting numbers recomputed
/// on that sub-poset.
pub fn stitched_belief(st: &GbpState, labels: &[IndexLabel]) -> Result<Stitched> {
    let labels = dedup(labels);
    let g = &st.graph;
    let cover = (0..g.regions.len())
        .filter(|&r| label_subset(&labels, &g.regions[r].labels))
        .min_by_key(|&r| (g.regions[r].size(), r));
    if let Some(r) = cover {
        let (b, _) = st.belief(r)?;
        return Ok(Stitched { belief: marginal(&b, &labels)?, weights: vec![(r, 1)], degeneracies: 0 });
    }
    let weights = sub_poset(st, &labels)?;
    let parts =
        weights.iter().map(|&(r, c)| Ok((st.belief(r)?.0, c as f64))).collect::<Result<Vec<(LabeledTensor, f64)>>>()?;
    let (mut data, degeneracies) = broadcast_product(&labels, &parts);
    let s: C64 = data.iter().sum();
    if is_zero(s) {
        return Err(Error::DegenerateNormalizer);
    }
    for z in data.iter_mut() {
        *z /= s;
    }
    Ok(Stitched { belief: LabeledTensor::dense(labels, data), weights, degeneracies })
}

/// Regions inside `labels` with counting numbers recomputed on that
/// sub-poset; checks that every label carries total weight 1.
fn sub_poset(st: &GbpState, labels: &[IndexLabel]) -> Result<Vec<(usize, i64)>> {
    let g = &st.graph;
    let inside: Vec<usize> = (0..g.regions.len()).filter(|&r| label_subset(&g.regions[r].labels, labels)).collect();
    for l in labels {
        if !inside.iter().any(|&r| g.regions[r].labels.iter().any(|x| x.id == l.id)) {
            return Err(Error::UncoveredIndex(l.id));
        }
    }
    let sets: Vec<Vec<IndexLabel>> = inside.iter().map(|&r| g.regions[r].labels.clone()).collect();
    let maximal: Vec<usize> = (0..sets.len())
        .filter(|&i| !(0..sets.len()).any(|j| sets[j].len() > sets[i].len() && label_subset(&sets[i], &sets[j])))
        .collect();
    let mut order = maximal.clone();
    order.extend((0..sets.len()).filter(|i| !maximal.contains(i)));
    let ordered: Vec<Vec<IndexLabel>> = order.iter().map(|&i| sets[i].clone()).collect();
    let c = counting_numbers(&ordered, maximal.len());
    for l in labels {
        let s: i64 = ordered.iter().zip(&c).filter(|(r, _)| r.iter().any(|x| x.id == l.id)).map(|(_, c)| c).sum();
        if s != 1 {
            return Err(Error::LabelMismatch(format!("label {} carries total counting weight {s} in the subset", l.id)));
        }
    }
    Ok(order.iter().zip(&c).filter(|(_, &c)| c != 0).map(|(&i, &c)| (inside[i], c)).collect())
}

/// Derivative of the contracted network with respect to the tensors in
/// `subset`, on the labels those tensors share with the rest of the network.
/// Each region's belief divided by its factor is a product of messages, so
/// the environment is built from messages directly; tensors inside the
/// subset's labels but outside the subset stay as factors. Normalized to unit
/// sum.
pub fn network_derivative(st: &GbpState, subset: &[usize]) -> Result<Derivative> {
    let tensors = &st.network.tensors;
    let labels = dedup(&subset.iter().flat_map(|&v| tensors[v].labels.iter().copied()).collect::<Vec<_>>());
    let outside = |id: u32| tensors.iter().enumerate().any(|(k, t)| !subset.contains(&k) && t.position(id).is_some());
    let (exterior, interior): (Vec<IndexLabel>, Vec<IndexLabel>) = labels.iter().partition(|l| outside(l.id));
    let g = &st.graph;
    let cover = (0..g.regions.len())
        .filter(|&r| label_subset(&labels, &g.regions[r].labels))
        .min_by_key(|&r| (g.regions[r].size(), r));
    let (scope, weights) = match cover {
        Some(r) => (g.regions[r].labels.clone(), vec![(r, 1)]),
        None => (labels.clone(), sub_poset(st, &labels)?),
    };
    let mut parts: Vec<(LabeledTensor, f64)> = Vec::new();
    for &(r, c) in &weights {
        for (m, e) in st.region_messages(r)? {
            parts.push((m, e * c as f64));
        }
    }
    for (k, t) in tensors.iter().enumerate() {
        if !subset.contains(&k) && label_subset(&t.labels, &scope) {
            parts.push((t.clone(), 1.0));
        }
    }
    let (data, degeneracies) = broadcast_product(&scope, &parts);
    let inner: Vec<IndexLabel> = scope.iter().filter(|l| !exterior.iter().any(|x| x.id == l.id)).copied().collect();
    let env = sum_over(&LabeledTensor::dense(scope, data), &inner)?;
    let env = env.permute(&exterior.iter().map(|l| l.id).collect::<Vec<_>>())?;
    let s: C64 = env.stored_sum();
    let env = if is_zero(s) { env } else { env.map_entries(|z| z / s) };
    Ok(Derivative { env, interior, degeneracies })
}

/// Spin-S matrices (S^x, S^y, S^z) for `two_s` = 2S, row-major, in the
/// basis m = S, S-1, ..., -S, built from the ladder operators.
pub fn spin_operators(two_s: usize) -> [Vec<C64>; 3] {
    let d = two_s + 1;
    let s = two_s as f64 / 2.0;
    let mut plus = vec![C64::default(); d * d];
    for i in 1..d {
        let m = s - i as f64;
        plus[(i - 1) * d + i] = C64::new((s * (s + 1.0) - m * (m + 1.0)).sqrt(), 0.0);
    }
    let minus: Vec<C64> = (0..d * d).map(|k| plus[(k % d) * d + k / d].conj()).collect();
    let sx = plus.iter().zip(&minus).map(|(p, m)| (p + m) / 2.0).collect();
    let sy = plus.iter().zip(&minus).map(|(p, m)| (p - m) / C64::new(0.0, 2.0)).collect();
    let sz = (0..d * d).map(|k| if k / d == k % d { C64::new(s - (k / d) as f64, 0.0) } else { C64::default() }).collect();
    [sx, sy, sz]
}

pub fn identity(d: usize) -> Vec<C64> {
    (0..d * d).map(|k| if k / d == k % d { C64::new(1.0, 0.0) } else { C64::default() }).collect()
}

fn transpose(op: &[C64], d: usize) -> Vec<C64> {
    (0..d * d).map(|k| op[(k % d) * d + k / d]).collect()
}

/// <psi| prod_i O_i |psi> / <psi|psi> for operators on the listed sites of a
/// norm network, from the environment of those sites.
pub fn expectation(st: &GbpState, model: &ModelInstance, ops: &[(usize, &[C64])]) -> Result<C64> {
    let kets = model.kets.as_ref().ok_or_else(|| Error::InvalidSetting(format!("{} has no kets", model.name)))?;
    let subset: Vec<usize> = ops.iter().map(|&(site, _)| kets[site].tensor).collect();
    let der = network_derivative(st, &subset)?;
    let mut plain = der.env.clone();
    let mut sandwiched = der.env;
    for &(site, op) in ops {
        let ket = &kets[site];
        if op.len() != ket.phys * ket.phys {
            return Err(Error::InvalidSetting(format!("operator on site {site} has {} entries", op.len())));
        }
        plain = hadamard(&plain, &ket.double_factor(None))?;
        sandwiched = hadamard(&sandwiched, &ket.double_factor(Some(&transpose(op, ket.phys))))?;
    }
    let den = plain.stored_sum();
    if is_zero(den) {
        return Err(Error::DegenerateNormalizer);
    }
    Ok(sandwiched.stored_sum() / den)
}

/// Per-spin free energy, energy and entropy of a converged Villain state.
pub fn villain_densities(st: &GbpState, model: &ModelInstance, beta: f64) -> Result<Thermo> {
    let n = model.site_count as f64;
    let f = st.kikuchi_free_energy()?.re / n;
    let mut u = 0.0;
    for term in &model.edge_terms {
        let p = stitched_belief(st, &term.energy.labels)?.belief;
        u += hadamard(&p, &term.energy)?.stored_sum().re;
    }
    let e = u / n;
    Ok(Thermo { f, e, s: beta * e - f })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{EngineSettings, InitStrategy};
    use crate::region::Preset;

    fn commutator(a: &[C64], b: &[C64], d: usize) -> Vec<C64> {
        let mul = |x: &[C64], y: &[C64]| -> Vec<C64> {
            (0..d * d).map(|k| (0..d).map(|j| x[(k / d) * d + j] * y[j * d + k % d]).sum()).collect()
        };
        mul(a, b).iter().zip(mul(b, a)).map(|(p, q)| p - q).collect()
    }

    #[test]
    fn spin_algebra() {
        for two_s in 1..=3 {
            let d = two_s + 1;
            let [sx, sy, sz] = spin_operators(two_s);
            let c = commutator(&sx, &sy, d);
            for (x, z) in c.iter().zip(&sz) {
                assert!((x - C64::new(0.0, 1.0) * z).norm() < 1e-14);
            }
            let s = two_s as f64 / 2.0;
            let casimir: f64 = (0..d)
                .map(|i| {
                    (0..d).map(|j| sx[i * d + j] * sx[j * d + i] + sy[i * d + j] * sy[j * d + i]).sum::<C64>().re
                        + sz[i * d + i].re.powi(2)
                })
                .sum::<f64>()
                / d as f64;
            assert!((casimir - s * (s + 1.0)).abs() < 1e-13);
        }
        let [sx, _, _] = spin_operators(3);
        assert!((sx[1] - C64::new(3f64.sqrt() / 2.0, 0.0)).norm() < 1e-15);
        assert!((sx[6] - C64::new(1.0, 0.0)).norm() < 1e-15);
    }

    fn chain() -> crate::network::Network {
        let l = |i| IndexLabel::new(i, 2);
        crate::network::Network::new(vec![
            LabeledTensor::from_real(vec![l(0), l(3)], &[1.0, 2.0, 0.5, 1.0]),
            LabeledTensor::from_real(vec![l(0), l(1), l(4)], &[1.0, 0.5, 0.3, 2.0, 0.7, 1.1, 0.2, 0.9]),
            LabeledTensor::from_real(vec![l(1), l(5)], &[0.7, 1.1, 0.4, 0.6]),
        ])
    }

    fn converged(net: crate::network::Network) -> GbpState {
        let mut st =
            GbpState::from_preset(net, &Preset::SimpleBp, &InitStrategy::Uniform, EngineSettings { epsilon: 1e-28, ..Default::default() }).unwrap();
        assert!(st.run().converged());
        st
    }

    #[test]
    fn single_region_and_pair_stitching() {
        let st = converged(chain());
        let a = st.graph.find(&st.network.tensors[0].labels).unwrap();
        let s = stitched_belief(&st, &st.network.tensors[0].labels).unwrap();
        assert_eq!(s.weights, vec![(a, 1)]);
        assert_eq!(s.belief.materialize(), st.belief(a).unwrap().0.materialize());

        let labels: Vec<IndexLabel> = [0, 3, 1, 4].iter().map(|&i| IndexLabel::new(i, 2)).collect();
        let s = stitched_belief(&st, &labels).unwrap();
        let mut w: Vec<i64> = s.weights.iter().map(|w| w.1).collect();
        w.sort();
        assert_eq!(w, vec![-1, 1, 1]);
        let exact = crate::oracles::exact::exact_contract(&st.network.tensors, &labels, crate::oracles::exact::DEFAULT_BUDGET)
            .unwrap()
            .permute(&[0, 3, 1, 4])
            .unwrap();
        let e = exact.materialize();
        let z: C64 = e.iter().sum();
        for (x, y) in s.belief.materialize().iter().zip(&e) {
            assert!((x - y / z).norm() < 1e-12);
        }
    }

    #[test]
    fn uncovered_label_is_reported() {
        let st = converged(chain());
        let labels = [IndexLabel::new(3, 2), IndexLabel::new(5, 2)];
        assert!(matches!(stitched_belief(&st, &labels), Err(Error::UncoveredIndex(_))));
    }

    #[test]
    fn single_tensor_derivative_is_message_product() {
        let st = converged(chain());
        let d = network_derivative(&st, &[1]).unwrap();
        assert_eq!(d.env.label_ids(), vec![0, 1]);
        let a = st.graph.find(&st.network.tensors[1].labels).unwrap();
        let msgs: Vec<LabeledTensor> = st.graph.child_links[a].iter().map(|&b| st.message(a, b).unwrap()).collect();
        let outer = hadamard(&msgs[0], &msgs[1]).unwrap().permute(&[0, 1]).unwrap();
        let s = outer.stored_sum();
        for (x, y) in d.env.materialize().iter().zip(outer.materialize()) {
            assert!((x - y / s).norm() < 1e-12);
        }
        assert_eq!(d.degeneracies, 0);
    }
}
