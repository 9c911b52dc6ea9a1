//! Labeled dense and sparse tensors.
//!
//! Entries are addressed by label, never by axis position. Every tensor
//! carries a real `log_scale` so the represented tensor is `exp(log_scale)`
//! times the stored entries.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Magnitudes below this count as exact zeros in ratios and powers.
pub const ZERO_THRESHOLD: f64 = 1e-300;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IndexLabel {
    pub id: u32,
    pub dim: usize,
}

impl IndexLabel {
    pub fn new(id: u32, dim: usize) -> Self {
        assert!(dim >= 1, "label dim must be positive");
        IndexLabel { id, dim }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Storage {
    Dense(Vec<C64>),
    Sparse(BTreeMap<Vec<usize>, C64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledTensor {
    pub labels: Vec<IndexLabel>,
    pub storage: Storage,
    pub log_scale: f64,
}

#[inline]
pub fn is_zero(z: C64) -> bool {
    z.norm() < ZERO_THRESHOLD
}

/// Principal-branch power of a single entry.
pub fn pow_entry(z: C64, p: f64) -> Result<C64> {
    if p == 1.0 {
        return Ok(z);
    }
    if p == 0.0 {
        return Ok(C64::new(1.0, 0.0));
    }
    if is_zero(z) {
        return if p > 0.0 {
            Ok(C64::new(0.0, 0.0))
        } else {
            Err(Error::ZeroToNegativePower(p))
        };
    }
    if z.im == 0.0 {
        if z.re > 0.0 {
            return Ok(C64::new(z.re.powf(p), 0.0));
        }
        if p == -1.0 {
            return Ok(C64::new(1.0 / z.re, 0.0));
        }
        // -0.0 imaginary parts would select the lower branch
        let r = (-z.re).powf(p);
        let th = std::f64::consts::PI * p;
        return Ok(C64::new(r * th.cos(), r * th.sin()));
    }
    if p == -1.0 {
        return Ok(z.inv());
    }
    Ok(z.powf(p))
}

pub fn row_major_strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * dims[k + 1];
    }
    s
}

/// For each label of `out`, the stride of that label inside `src` (0 if absent).
pub fn embed_strides(src: &[IndexLabel], out: &[IndexLabel]) -> Vec<usize> {
    let dims: Vec<usize> = src.iter().map(|l| l.dim).collect();
    let st = row_major_strides(&dims);
    out.iter()
        .map(|l| src.iter().position(|s| s.id == l.id).map_or(0, |k| st[k]))
        .collect()
}

/// Walk all multi-indices of `dims` in row-major order, calling `f` with the
/// running offsets into each of the stride sets.
pub fn for_each_offset<const N: usize>(
    dims: &[usize],
    strides: [&[usize]; N],
    mut f: impl FnMut([usize; N]),
) {
    let total: usize = dims.iter().product();
    if total == 0 {
        return;
    }
    let r = dims.len();
    let mut idx = vec![0usize; r];
    let mut off = [0usize; N];
    for _ in 0..total {
        f(off);
        let mut k = r;
        while k > 0 {
            k -= 1;
            idx[k] += 1;
            for n in 0..N {
                off[n] += strides[n][k];
            }
            if idx[k] < dims[k] {
                break;
            }
            for n in 0..N {
                off[n] -= strides[n][k] * dims[k];
            }
            idx[k] = 0;
        }
    }
}

fn check_dims(a: &[IndexLabel], b: &[IndexLabel]) -> Result<()> {
    for la in a {
        if let Some(lb) = b.iter().find(|l| l.id == la.id) {
            if lb.dim != la.dim {
                return Err(Error::DimMismatch { id: la.id, left: la.dim, right: lb.dim });
            }
        }
    }
    Ok(())
}

fn union_labels(a: &[IndexLabel], b: &[IndexLabel]) -> Vec<IndexLabel> {
    let mut out = a.to_vec();
    for l in b {
        if !a.iter().any(|x| x.id == l.id) {
            out.push(*l);
        }
    }
    out
}

fn unflatten(mut flat: usize, dims: &[usize], out: &mut [usize]) {
    for k in (0..dims.len()).rev() {
        out[k] = flat % dims[k];
        flat /= dims[k];
    }
}

impl LabeledTensor {
    pub fn dense(labels: Vec<IndexLabel>, data: Vec<C64>) -> Self {
        let n: usize = labels.iter().map(|l| l.dim).product();
        assert_eq!(n, data.len(), "dense storage length must match label dims");
        LabeledTensor { labels, storage: Storage::Dense(data), log_scale: 0.0 }
    }

    pub fn from_real(labels: Vec<IndexLabel>, data: &[f64]) -> Self {
        Self::dense(labels, data.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn from_fn(labels: Vec<IndexLabel>, mut f: impl FnMut(&[usize]) -> C64) -> Self {
        let dims: Vec<usize> = labels.iter().map(|l| l.dim).collect();
        let n: usize = dims.iter().product();
        let mut idx = vec![0; dims.len()];
        let data = (0..n)
            .map(|k| {
                unflatten(k, &dims, &mut idx);
                f(&idx)
            })
            .collect();
        Self::dense(labels, data)
    }

    pub fn ones(labels: Vec<IndexLabel>) -> Self {
        let n: usize = labels.iter().map(|l| l.dim).product();
        Self::dense(labels, vec![C64::new(1.0, 0.0); n])
    }

    pub fn scalar(v: C64) -> Self {
        Self::dense(vec![], vec![v])
    }

    pub fn sparse(labels: Vec<IndexLabel>, entries: BTreeMap<Vec<usize>, C64>) -> Self {
        let entries = entries.into_iter().filter(|(_, v)| !is_zero(*v)).collect();
        LabeledTensor { labels, storage: Storage::Sparse(entries), log_scale: 0.0 }
    }

    pub fn with_log_scale(mut self, r: f64) -> Self {
        self.log_scale = r;
        self
    }

    pub fn dims(&self) -> Vec<usize> {
        self.labels.iter().map(|l| l.dim).collect()
    }

    pub fn size(&self) -> usize {
        self.labels.iter().map(|l| l.dim).product()
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.storage, Storage::Sparse(_))
    }

    pub fn nnz(&self) -> usize {
        match &self.storage {
            Storage::Dense(d) => d.iter().filter(|z| !is_zero(**z)).count(),
            Storage::Sparse(m) => m.len(),
        }
    }

    pub fn label_ids(&self) -> Vec<u32> {
        self.labels.iter().map(|l| l.id).collect()
    }

    pub fn position(&self, id: u32) -> Option<usize> {
        self.labels.iter().position(|l| l.id == id)
    }

    /// Stored entry at an index tuple in this tensor's own axis order.
    pub fn get_stored(&self, idx: &[usize]) -> C64 {
        match &self.storage {
            Storage::Dense(d) => {
                let mut off = 0;
                for (k, l) in self.labels.iter().enumerate() {
                    off = off * l.dim + idx[k];
                }
                d[off]
            }
            Storage::Sparse(m) => m.get(idx).copied().unwrap_or_default(),
        }
    }

    /// Represented entry (log_scale folded in) addressed by `(label id, value)` pairs.
    pub fn value(&self, assignment: &[(u32, usize)]) -> Result<C64> {
        let mut idx = vec![0; self.labels.len()];
        for (k, l) in self.labels.iter().enumerate() {
            let v = assignment
                .iter()
                .find(|(id, _)| *id == l.id)
                .ok_or(Error::UnknownLabel(l.id))?
                .1;
            idx[k] = v;
        }
        Ok(self.get_stored(&idx) * self.log_scale.exp())
    }

    /// Dense entries with log_scale folded in.
    pub fn materialize(&self) -> Vec<C64> {
        let s = self.log_scale.exp();
        match &self.to_dense().storage {
            Storage::Dense(d) => d.iter().map(|z| z * s).collect(),
            Storage::Sparse(_) => unreachable!(),
        }
    }

    pub fn dense_data(&self) -> Option<&[C64]> {
        match &self.storage {
            Storage::Dense(d) => Some(d),
            Storage::Sparse(_) => None,
        }
    }

    pub fn to_dense(&self) -> LabeledTensor {
        match &self.storage {
            Storage::Dense(_) => self.clone(),
            Storage::Sparse(m) => {
                let n = self.size();
                let mut data = vec![C64::default(); n];
                for (idx, v) in m {
                    let mut off = 0;
                    for (k, l) in self.labels.iter().enumerate() {
                        off = off * l.dim + idx[k];
                    }
                    data[off] = *v;
                }
                LabeledTensor { labels: self.labels.clone(), storage: Storage::Dense(data), log_scale: self.log_scale }
            }
        }
    }

    pub fn to_sparse(&self) -> LabeledTensor {
        match &self.storage {
            Storage::Sparse(_) => self.clone(),
            Storage::Dense(d) => {
                let dims = self.dims();
                let mut m = BTreeMap::new();
                let mut idx = vec![0; dims.len()];
                for (k, v) in d.iter().enumerate() {
                    if !is_zero(*v) {
                        unflatten(k, &dims, &mut idx);
                        m.insert(idx.clone(), *v);
                    }
                }
                LabeledTensor { labels: self.labels.clone(), storage: Storage::Sparse(m), log_scale: self.log_scale }
            }
        }
    }

    /// Reorder axes; entries addressed by label are unchanged.
    pub fn permute(&self, order: &[u32]) -> Result<LabeledTensor> {
        if order.len() != self.labels.len() {
            return Err(Error::LabelMismatch("permutation must list every label once".into()));
        }
        let mut labels = Vec::with_capacity(order.len());
        for id in order {
            let l = self.labels.iter().find(|l| l.id == *id).ok_or(Error::UnknownLabel(*id))?;
            if labels.iter().any(|x: &IndexLabel| x.id == *id) {
                return Err(Error::LabelMismatch(format!("label {id} repeated")));
            }
            labels.push(*l);
        }
        let storage = match &self.storage {
            Storage::Dense(d) => {
                let st = embed_strides(&self.labels, &labels);
                let dims: Vec<usize> = labels.iter().map(|l| l.dim).collect();
                let mut out = Vec::with_capacity(d.len());
                for_each_offset(&dims, [&st], |[o]| out.push(d[o]));
                Storage::Dense(out)
            }
            Storage::Sparse(m) => {
                let pos: Vec<usize> = labels.iter().map(|l| self.position(l.id).unwrap()).collect();
                Storage::Sparse(m.iter().map(|(idx, v)| (pos.iter().map(|&p| idx[p]).collect(), *v)).collect())
            }
        };
        Ok(LabeledTensor { labels, storage, log_scale: self.log_scale })
    }

    pub fn map_entries(&self, mut f: impl FnMut(C64) -> C64) -> LabeledTensor {
        let storage = match &self.storage {
            Storage::Dense(d) => Storage::Dense(d.iter().map(|z| f(*z)).collect()),
            Storage::Sparse(m) => Storage::Sparse(
                m.iter().map(|(k, v)| (k.clone(), f(*v))).filter(|(_, v)| !is_zero(*v)).collect(),
            ),
        };
        LabeledTensor { labels: self.labels.clone(), storage, log_scale: self.log_scale }
    }

    /// Sum of stored entries (without log_scale).
    pub fn stored_sum(&self) -> C64 {
        match &self.storage {
            Storage::Dense(d) => d.iter().sum(),
            Storage::Sparse(m) => m.values().sum(),
        }
    }

    pub fn stored_abs_sum(&self) -> f64 {
        match &self.storage {
            Storage::Dense(d) => d.iter().map(|z| z.norm()).sum(),
            Storage::Sparse(m) => m.values().map(|z| z.norm()).sum(),
        }
    }

    /// Full sum as a complex logarithm.
    pub fn log_total(&self) -> Result<C64> {
        let s = self.stored_sum();
        if is_zero(s) || s.norm() < 1e-13 * self.stored_abs_sum() {
            return Err(Error::DegenerateNormalizer);
        }
        Ok(s.ln() + self.log_scale)
    }

    /// Move the largest stored magnitude into log_scale.
    pub fn rescaled(&self) -> LabeledTensor {
        let mx = match &self.storage {
            Storage::Dense(d) => d.iter().map(|z| z.norm()).fold(0.0, f64::max),
            Storage::Sparse(m) => m.values().map(|z| z.norm()).fold(0.0, f64::max),
        };
        if mx == 0.0 || !mx.is_finite() {
            return self.clone();
        }
        let mut t = self.map_entries(|z| z / mx);
        t.log_scale += mx.ln();
        t
    }
}

pub fn hadamard(a: &LabeledTensor, b: &LabeledTensor) -> Result<LabeledTensor> {
    check_dims(&a.labels, &b.labels)?;
    let out = union_labels(&a.labels, &b.labels);
    let log_scale = a.log_scale + b.log_scale;
    match (&a.storage, &b.storage) {
        (Storage::Dense(da), Storage::Dense(db)) => {
            let dims: Vec<usize> = out.iter().map(|l| l.dim).collect();
            let sa = embed_strides(&a.labels, &out);
            let sb = embed_strides(&b.labels, &out);
            let mut data = Vec::with_capacity(dims.iter().product());
            for_each_offset(&dims, [&sa, &sb], |[oa, ob]| data.push(da[oa] * db[ob]));
            Ok(LabeledTensor { labels: out, storage: Storage::Dense(data), log_scale })
        }
        (Storage::Sparse(_), _) => sparse_hadamard(a, b, &out, log_scale),
        (_, Storage::Sparse(_)) => {
            let t = sparse_hadamard(b, a, &union_labels(&b.labels, &a.labels), log_scale)?;
            t.permute(&out.iter().map(|l| l.id).collect::<Vec<_>>())
        }
    }
}

/// `s` is sparse; iterate its nonzeros times every assignment of the other
/// tensor's extra labels.
fn sparse_hadamard(
    s: &LabeledTensor,
    o: &LabeledTensor,
    out: &[IndexLabel],
    log_scale: f64,
) -> Result<LabeledTensor> {
    let Storage::Sparse(ms) = &s.storage else { unreachable!() };
    let extra: Vec<IndexLabel> = out[s.labels.len()..].to_vec();
    let extra_dims: Vec<usize> = extra.iter().map(|l| l.dim).collect();
    let n_extra: usize = extra_dims.iter().product();
    // position of each label of o within out
    let opos: Vec<usize> = o.labels.iter().map(|l| out.iter().position(|x| x.id == l.id).unwrap()).collect();
    let mut m = BTreeMap::new();
    let mut full = vec![0; out.len()];
    let mut oidx = vec![0; o.labels.len()];
    let mut eidx = vec![0; extra.len()];
    for (idx, v) in ms {
        full[..idx.len()].copy_from_slice(idx);
        for k in 0..n_extra {
            unflatten(k, &extra_dims, &mut eidx);
            full[idx.len()..].copy_from_slice(&eidx);
            for (j, &p) in opos.iter().enumerate() {
                oidx[j] = full[p];
            }
            let w = v * o.get_stored(&oidx);
            if !is_zero(w) {
                m.insert(full.clone(), w);
            }
        }
    }
    Ok(LabeledTensor { labels: out.to_vec(), storage: Storage::Sparse(m), log_scale })
}

pub fn sum_over(t: &LabeledTensor, drop: &[IndexLabel]) -> Result<LabeledTensor> {
    for d in drop {
        if t.position(d.id).is_none() {
            return Err(Error::UnknownLabel(d.id));
        }
    }
    let keep: Vec<IndexLabel> = t.labels.iter().filter(|l| !drop.iter().any(|d| d.id == l.id)).copied().collect();
    match &t.storage {
        Storage::Dense(d) => {
            let n: usize = keep.iter().map(|l| l.dim).product();
            let mut data = vec![C64::default(); n];
            let st = embed_strides(&keep, &t.labels);
            let dims = t.dims();
            let mut k = 0;
            for_each_offset(&dims, [&st], |[o]| {
                data[o] += d[k];
                k += 1;
            });
            Ok(LabeledTensor { labels: keep, storage: Storage::Dense(data), log_scale: t.log_scale })
        }
        Storage::Sparse(m) => {
            let pos: Vec<usize> = keep.iter().map(|l| t.position(l.id).unwrap()).collect();
            let mut acc: BTreeMap<Vec<usize>, C64> = BTreeMap::new();
            for (idx, v) in m {
                *acc.entry(pos.iter().map(|&p| idx[p]).collect()).or_default() += v;
            }
            acc.retain(|_, v| !is_zero(*v));
            Ok(LabeledTensor { labels: keep, storage: Storage::Sparse(acc), log_scale: t.log_scale })
        }
    }
}

/// Sum out everything except `keep`, which is returned in the given order.
pub fn marginal(t: &LabeledTensor, keep: &[IndexLabel]) -> Result<LabeledTensor> {
    let drop: Vec<IndexLabel> = t.labels.iter().filter(|l| !keep.iter().any(|k| k.id == l.id)).copied().collect();
    let s = sum_over(t, &drop)?;
    s.permute(&keep.iter().map(|l| l.id).collect::<Vec<_>>())
}

pub fn elem_pow(t: &LabeledTensor, p: f64) -> Result<LabeledTensor> {
    let storage = match &t.storage {
        Storage::Dense(d) => Storage::Dense(d.iter().map(|z| pow_entry(*z, p)).collect::<Result<_>>()?),
        Storage::Sparse(m) => {
            if p <= 0.0 && m.len() < t.size() {
                if p == 0.0 {
                    return elem_pow(&t.to_dense(), p);
                }
                return Err(Error::ZeroToNegativePower(p));
            }
            let mut out = BTreeMap::new();
            for (k, v) in m {
                out.insert(k.clone(), pow_entry(*v, p)?);
            }
            Storage::Sparse(out)
        }
    };
    Ok(LabeledTensor { labels: t.labels.clone(), storage, log_scale: t.log_scale * p })
}

pub fn normalize(t: &LabeledTensor) -> Result<(LabeledTensor, C64)> {
    let log_z = t.log_total()?;
    let s = t.stored_sum();
    let mut out = t.map_entries(|z| z / s);
    out.log_scale = 0.0;
    Ok((out, log_z))
}

pub fn contract(a: &LabeledTensor, b: &LabeledTensor) -> Result<LabeledTensor> {
    check_dims(&a.labels, &b.labels)?;
    let shared: Vec<IndexLabel> = a.labels.iter().filter(|l| b.position(l.id).is_some()).copied().collect();
    if a.is_sparse() || b.is_sparse() {
        return sum_over(&hadamard(a, b)?, &shared);
    }
    let (Storage::Dense(da), Storage::Dense(db)) = (&a.storage, &b.storage) else { unreachable!() };
    let mut out: Vec<IndexLabel> = a.labels.iter().filter(|l| b.position(l.id).is_none()).copied().collect();
    out.extend(b.labels.iter().filter(|l| a.position(l.id).is_none()));
    let od: Vec<usize> = out.iter().map(|l| l.dim).collect();
    let sd: Vec<usize> = shared.iter().map(|l| l.dim).collect();
    let (oa, ob) = (embed_strides(&a.labels, &out), embed_strides(&b.labels, &out));
    let (sa, sb) = (embed_strides(&a.labels, &shared), embed_strides(&b.labels, &shared));
    let mut data = Vec::with_capacity(od.iter().product());
    for_each_offset(&od, [&oa, &ob], |[pa, pb]| {
        let mut acc = C64::default();
        for_each_offset(&sd, [&sa, &sb], |[qa, qb]| acc += da[pa + qa] * db[pb + qb]);
        data.push(acc);
    });
    Ok(LabeledTensor { labels: out, storage: Storage::Dense(data), log_scale: a.log_scale + b.log_scale })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x() -> IndexLabel {
        IndexLabel::new(0, 2)
    }
    fn y() -> IndexLabel {
        IndexLabel::new(1, 2)
    }
    fn re(t: &LabeledTensor) -> Vec<f64> {
        t.materialize().iter().map(|z| z.re).collect()
    }

    #[test]
    fn hadamard_examples() {
        let a = LabeledTensor::from_real(vec![x()], &[1.0, 2.0]);
        let b = LabeledTensor::from_real(vec![x()], &[3.0, 4.0]);
        assert_eq!(re(&hadamard(&a, &b).unwrap()), vec![3.0, 8.0]);
        assert_eq!(re(&hadamard(&a, &LabeledTensor::ones(vec![x()])).unwrap()), vec![1.0, 2.0]);
        let c = LabeledTensor::from_real(vec![y()], &[1.0, 10.0]);
        let h = hadamard(&a, &c).unwrap();
        assert_eq!(h.label_ids(), vec![0, 1]);
        assert_eq!(re(&h), vec![1.0, 10.0, 2.0, 20.0]);
        let bad = LabeledTensor::from_real(vec![IndexLabel::new(0, 3)], &[1.0, 1.0, 1.0]);
        assert!(matches!(hadamard(&a, &bad), Err(Error::DimMismatch { .. })));
    }

    #[test]
    fn sum_over_examples() {
        let m = LabeledTensor::from_real(vec![x(), y()], &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(re(&sum_over(&m, &[y()]).unwrap()), vec![3.0, 7.0]);
        assert_eq!(sum_over(&m, &[]).unwrap(), m);
        assert_eq!(re(&sum_over(&m, &[x(), y()]).unwrap()), vec![10.0]);
        assert!(matches!(sum_over(&m, &[IndexLabel::new(9, 2)]), Err(Error::UnknownLabel(9))));
    }

    #[test]
    fn elem_pow_examples() {
        let t = LabeledTensor::from_real(vec![x()], &[4.0, 9.0]);
        assert_eq!(re(&elem_pow(&t, 0.5).unwrap()), vec![2.0, 3.0]);
        assert_eq!(elem_pow(&t, 1.0).unwrap(), t);
        let n = LabeledTensor::from_real(vec![IndexLabel::new(0, 1)], &[-1.0]);
        let r = elem_pow(&n, 0.5).unwrap().materialize()[0];
        assert!((r - C64::new(0.0, 1.0)).norm() < 1e-15);
        let z = LabeledTensor::from_real(vec![x()], &[0.0, 2.0]);
        assert_eq!(re(&elem_pow(&z, 2.0).unwrap()), vec![0.0, 4.0]);
        assert!(matches!(elem_pow(&z, -1.0), Err(Error::ZeroToNegativePower(_))));
    }

    #[test]
    fn normalize_examples() {
        let (t, lz) = normalize(&LabeledTensor::from_real(vec![x()], &[1.0, 3.0])).unwrap();
        assert_eq!(re(&t), vec![0.25, 0.75]);
        assert!((lz - C64::new(4f64.ln(), 0.0)).norm() < 1e-15);
        let (t2, lz2) = normalize(&t).unwrap();
        assert_eq!(t2, t);
        assert_eq!(lz2, C64::new(0.0, 0.0));
        let s = LabeledTensor::from_real(vec![x()], &[2.0, 2.0]).with_log_scale(3f64.ln());
        let (t3, lz3) = normalize(&s).unwrap();
        assert_eq!(re(&t3), vec![0.5, 0.5]);
        assert!((lz3.re - 12f64.ln()).abs() < 1e-14);
        let d = LabeledTensor::from_real(vec![x()], &[1.0, -1.0]);
        assert!(matches!(normalize(&d), Err(Error::DegenerateNormalizer)));
    }

    #[test]
    fn contract_examples() {
        let id = LabeledTensor::from_real(vec![x(), y()], &[1.0, 0.0, 0.0, 1.0]);
        let v = LabeledTensor::from_real(vec![y()], &[5.0, 7.0]);
        let r = contract(&id, &v).unwrap();
        assert_eq!(r.label_ids(), vec![0]);
        assert_eq!(re(&r), vec![5.0, 7.0]);
        let a = LabeledTensor::from_real(vec![x()], &[2.0, 3.0]);
        let b = LabeledTensor::from_real(vec![x()], &[4.0, 5.0]);
        assert_eq!(re(&contract(&a, &b).unwrap()), vec![23.0]);
    }

    #[test]
    fn ice_vertex_is_sparse_with_six_nonzeros() {
        let labels: Vec<IndexLabel> = (0..4).map(|i| IndexLabel::new(i, 2)).collect();
        let t = LabeledTensor::from_fn(labels, |x| {
            C64::new(if x.iter().sum::<usize>() == 2 { 1.0 } else { 0.0 }, 0.0)
        });
        let s = t.to_sparse();
        assert_eq!(s.nnz(), 6);
        assert_eq!(s.to_dense(), t);
        let z = LabeledTensor::from_real(vec![x(), y()], &[0.0; 4]).to_sparse();
        assert_eq!(z.nnz(), 0);
    }

    #[test]
    fn permute_keeps_labeled_entries() {
        let m = LabeledTensor::from_real(vec![x(), y()], &[1.0, 2.0, 3.0, 4.0]);
        let p = m.permute(&[1, 0]).unwrap();
        assert_eq!(re(&p), vec![1.0, 3.0, 2.0, 4.0]);
        for i in 0..2 {
            for j in 0..2 {
                let a = [(0, i), (1, j)];
                assert_eq!(m.value(&a).unwrap(), p.value(&a).unwrap());
            }
        }
    }
}
