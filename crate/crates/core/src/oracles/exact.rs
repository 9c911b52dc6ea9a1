//! Exact contraction: greedy pairwise with GEMM kernels, plus a brute-force
//! enumerator and a sequential absorption path for cross-checks.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::tensor::{embed_strides, for_each_offset, IndexLabel, LabeledTensor, C64};

pub const DEFAULT_BUDGET: f64 = 1e8;

#[derive(Clone)]
enum Data {
    Real(Vec<f64>),
    Complex(Vec<C64>),
}

#[derive(Clone)]
struct Item {
    labels: Vec<IndexLabel>,
    data: Data,
    log_scale: f64,
}

fn size_of(ls: &[IndexLabel]) -> f64 {
    ls.iter().map(|l| l.dim as f64).product()
}

fn permuted<T: Copy + Default>(src: &[T], from: &[IndexLabel], to: &[IndexLabel]) -> Vec<T> {
    let st = embed_strides(from, to);
    let dims: Vec<usize> = to.iter().map(|l| l.dim).collect();
    let mut out = Vec::with_capacity(src.len());
    for_each_offset(&dims, [&st], |[o]| out.push(src[o]));
    out
}

fn rescale_real(v: &mut [f64]) -> f64 {
    let mx = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if mx > 0.0 && mx.is_finite() {
        v.iter_mut().for_each(|x| *x /= mx);
        mx.ln()
    } else {
        0.0
    }
}

fn rescale_complex(v: &mut [C64]) -> f64 {
    let mx = v.iter().fold(0.0f64, |m, x| m.max(x.norm()));
    if mx > 0.0 && mx.is_finite() {
        v.iter_mut().for_each(|x| *x /= mx);
        mx.ln()
    } else {
        0.0
    }
}

fn to_complex(d: &Data) -> Vec<C64> {
    match d {
        Data::Real(v) => v.iter().map(|&x| C64::new(x, 0.0)).collect(),
        Data::Complex(v) => v.clone(),
    }
}

/// Contract two items, summing `summed` and keeping `batch` (shared but still needed).
fn pair(a: &Item, b: &Item, summed: &[IndexLabel], batch: &[IndexLabel]) -> Item {
    let has = |ls: &[IndexLabel], l: &IndexLabel| ls.iter().any(|x| x.id == l.id);
    let fa: Vec<IndexLabel> = a.labels.iter().filter(|l| !has(summed, l) && !has(batch, l)).copied().collect();
    let fb: Vec<IndexLabel> = b.labels.iter().filter(|l| !has(summed, l) && !has(batch, l)).copied().collect();
    let la: Vec<IndexLabel> = batch.iter().chain(&fa).chain(summed).copied().collect();
    let lb: Vec<IndexLabel> = batch.iter().chain(summed).chain(&fb).copied().collect();
    let (nb, m, k, n) = (size_of(batch) as usize, size_of(&fa) as usize, size_of(summed) as usize, size_of(&fb) as usize);
    let out_labels: Vec<IndexLabel> = batch.iter().chain(&fa).chain(&fb).copied().collect();
    let data = match (&a.data, &b.data) {
        (Data::Real(x), Data::Real(y)) => {
            let pa = permuted(x, &a.labels, &la);
            let pb = permuted(y, &b.labels, &lb);
            let mut c = vec![0.0; nb * m * n];
            for t in 0..nb {
                unsafe {
                    matrixmultiply::dgemm(
                        m,
                        k,
                        n,
                        1.0,
                        pa.as_ptr().add(t * m * k),
                        k as isize,
                        1,
                        pb.as_ptr().add(t * k * n),
                        n as isize,
                        1,
                        0.0,
                        c.as_mut_ptr().add(t * m * n),
                        n as isize,
                        1,
                    );
                }
            }
            Data::Real(c)
        }
        _ => {
            let pa = permuted(&to_complex(&a.data), &a.labels, &la);
            let pb = permuted(&to_complex(&b.data), &b.labels, &lb);
            let mut c = vec![C64::default(); nb * m * n];
            for t in 0..nb {
                unsafe {
                    matrixmultiply::zgemm(
                        matrixmultiply::CGemmOption::Standard,
                        matrixmultiply::CGemmOption::Standard,
                        m,
                        k,
                        n,
                        [1.0, 0.0],
                        pa.as_ptr().add(t * m * k) as *const [f64; 2],
                        k as isize,
                        1,
                        pb.as_ptr().add(t * k * n) as *const [f64; 2],
                        n as isize,
                        1,
                        [0.0, 0.0],
                        c.as_mut_ptr().add(t * m * n) as *mut [f64; 2],
                        n as isize,
                        1,
                    );
                }
            }
            Data::Complex(c)
        }
    };
    let mut it = Item { labels: out_labels, data, log_scale: a.log_scale + b.log_scale };
    it.log_scale += match &mut it.data {
        Data::Real(v) => rescale_real(v),
        Data::Complex(v) => rescale_complex(v),
    };
    it
}

/// Sum a single item over labels no longer needed anywhere.
fn reduce(it: &Item, drop: &[IndexLabel]) -> Item {
    if drop.is_empty() {
        return it.clone();
    }
    let ones = Item {
        labels: drop.to_vec(),
        data: Data::Real(vec![1.0; size_of(drop) as usize]),
        log_scale: 0.0,
    };
    pair(it, &ones, drop, &[])
}

fn to_item(t: &LabeledTensor) -> Item {
    let d = t.to_dense();
    let v = d.dense_data().unwrap();
    let data = if v.iter().all(|z| z.im == 0.0) {
        Data::Real(v.iter().map(|z| z.re).collect())
    } else {
        Data::Complex(v.to_vec())
    };
    let mut it = Item { labels: t.labels.clone(), data, log_scale: t.log_scale };
    it.log_scale += match &mut it.data {
        Data::Real(v) => rescale_real(v),
        Data::Complex(v) => rescale_complex(v),
    };
    it
}

/// Contract the whole network, leaving `keep` open. Labels shared by more
/// than two tensors are summed once their last holder is absorbed.
pub fn exact_contract(tensors: &[LabeledTensor], keep: &[IndexLabel], budget: f64) -> Result<LabeledTensor> {
    let mut items: Vec<Item> = tensors.iter().map(to_item).collect();
    let mut count: BTreeMap<u32, usize> = BTreeMap::new();
    for it in &items {
        for l in &it.labels {
            *count.entry(l.id).or_default() += 1;
        }
    }
    for l in keep {
        *count.entry(l.id).or_default() += 1;
    }
    // labels only a single item needs can go right away
    for it in items.iter_mut() {
        let drop: Vec<IndexLabel> = it.labels.iter().filter(|l| count[&l.id] == 1).copied().collect();
        for l in &drop {
            count.remove(&l.id);
        }
        *it = reduce(it, &drop);
    }
    while items.len() > 1 {
        let mut best: Option<(f64, Vec<u32>, usize, usize)> = None;
        for i in 0..items.len() {
            for j in i + 1..items.len() {
                let shared = items[i].labels.iter().any(|l| items[j].labels.iter().any(|x| x.id == l.id));
                if !shared {
                    continue;
                }
                let cost = result_labels(&items[i], &items[j], &count).iter().map(|l| l.dim as f64).product::<f64>();
                let mut key: Vec<u32> = items[i].labels.iter().chain(&items[j].labels).map(|l| l.id).collect();
                key.sort();
                if best.as_ref().is_none_or(|(c, k, _, _)| cost < *c || (cost == *c && key < *k)) {
                    best = Some((cost, key, i, j));
                }
            }
        }
        let (i, j) = match best {
            Some((_, _, i, j)) => (i, j),
            None => {
                let mut idx: Vec<usize> = (0..items.len()).collect();
                idx.sort_by(|&x, &y| size_of(&items[x].labels).partial_cmp(&size_of(&items[y].labels)).unwrap());
                (idx[0].min(idx[1]), idx[0].max(idx[1]))
            }
        };
        let out = result_labels(&items[i], &items[j], &count);
        let need = size_of(&out);
        if need > budget {
            return Err(Error::BudgetExceeded { needed: need, budget });
        }
        let b = items.remove(j);
        let a = items.remove(i);
        let mut summed = Vec::new();
        let mut batch = Vec::new();
        for l in &a.labels {
            if b.labels.iter().any(|x| x.id == l.id) {
                let c = count.get_mut(&l.id).unwrap();
                if *c == 2 {
                    summed.push(*l);
                    count.remove(&l.id);
                } else {
                    *c -= 1;
                    batch.push(*l);
                }
            }
        }
        items.push(pair(&a, &b, &summed, &batch));
    }
    let last = items.pop().unwrap_or(Item { labels: vec![], data: Data::Real(vec![1.0]), log_scale: 0.0 });
    let data: Vec<C64> = to_complex(&last.data);
    let t = LabeledTensor::dense(last.labels.clone(), data).with_log_scale(last.log_scale);
    if keep.is_empty() {
        return Ok(t);
    }
    for l in keep {
        if t.position(l.id).is_none() {
            return Err(Error::UnknownLabel(l.id));
        }
    }
    t.permute(&keep.iter().map(|l| l.id).collect::<Vec<_>>())
}

fn result_labels(a: &Item, b: &Item, count: &BTreeMap<u32, usize>) -> Vec<IndexLabel> {
    let mut out = Vec::new();
    for l in &a.labels {
        let shared = b.labels.iter().any(|x| x.id == l.id);
        if !shared || count[&l.id] > 2 {
            out.push(*l);
        }
    }
    for l in &b.labels {
        if !a.labels.iter().any(|x| x.id == l.id) {
            out.push(*l);
        }
    }
    out
}

/// log of the full sum of the network.
pub fn exact_log_z(tensors: &[LabeledTensor]) -> Result<C64> {
    exact_contract(tensors, &[], DEFAULT_BUDGET)?.log_total()
}

/// Sum over every assignment of every label; tiny networks only.
pub fn brute_force_log_z(tensors: &[LabeledTensor]) -> Result<C64> {
    let mut labels: Vec<IndexLabel> = tensors.iter().flat_map(|t| t.labels.iter().copied()).collect();
    labels.sort();
    labels.dedup();
    let total = size_of(&labels);
    if total > 1e8 {
        return Err(Error::BudgetExceeded { needed: total, budget: 1e8 });
    }
    let dense: Vec<LabeledTensor> = tensors.iter().map(|t| t.to_dense()).collect();
    let strides: Vec<Vec<usize>> = dense.iter().map(|t| embed_strides(&t.labels, &labels)).collect();
    let dims: Vec<usize> = labels.iter().map(|l| l.dim).collect();
    let datas: Vec<&[C64]> = dense.iter().map(|t| t.dense_data().unwrap()).collect();
    let mut sum = C64::default();
    let n = labels.len();
    let mut idx = vec![0usize; n];
    let mut off = vec![0usize; dense.len()];
    loop {
        let mut p = C64::new(1.0, 0.0);
        for (t, d) in datas.iter().enumerate() {
            p *= d[off[t]];
        }
        sum += p;
        let mut k = n;
        loop {
            if k == 0 {
                let ls: f64 = dense.iter().map(|t| t.log_scale).sum();
                return Ok(sum.ln() + ls);
            }
            k -= 1;
            idx[k] += 1;
            for (t, s) in strides.iter().enumerate() {
                off[t] += s[k];
            }
            if idx[k] < dims[k] {
                break;
            }
            for (t, s) in strides.iter().enumerate() {
                off[t] -= s[k] * dims[k];
            }
            idx[k] = 0;
        }
    }
}

/// Absorb tensors one at a time in the given order; on a grid in row-major
/// order this is the untruncated boundary sweep.
pub fn sequential_contract(tensors: &[LabeledTensor], order: &[usize]) -> Result<C64> {
    sequential_contract_open(tensors, order, &[], DEFAULT_BUDGET)?.log_total()
}

/// Sequential absorption of `order` (which need not cover every tensor)
/// leaving `keep` open, with the same GEMM kernel as `exact_contract`.
pub fn sequential_contract_open(
    tensors: &[LabeledTensor],
    order: &[usize],
    keep: &[IndexLabel],
    budget: f64,
) -> Result<LabeledTensor> {
    let mut count: BTreeMap<u32, usize> = BTreeMap::new();
    for &v in order {
        for l in &tensors[v].labels {
            *count.entry(l.id).or_default() += 1;
        }
    }
    for l in keep {
        *count.entry(l.id).or_default() += 1;
    }
    let mut acc = Item { labels: vec![], data: Data::Real(vec![1.0]), log_scale: 0.0 };
    for &v in order {
        let mut it = to_item(&tensors[v]);
        let alone: Vec<IndexLabel> = it.labels.iter().filter(|l| count[&l.id] == 1).copied().collect();
        it = reduce(&it, &alone);
        let (mut summed, mut batch) = (Vec::new(), Vec::new());
        for l in &it.labels {
            if acc.labels.iter().any(|x| x.id == l.id) {
                let c = count.get_mut(&l.id).unwrap();
                *c -= 1;
                if *c == 1 {
                    summed.push(*l);
                } else {
                    batch.push(*l);
                }
            }
        }
        let need = size_of(&acc.labels) * size_of(&it.labels) / size_of(&summed).powi(2) / size_of(&batch);
        if need > budget {
            return Err(Error::BudgetExceeded { needed: need, budget });
        }
        acc = pair(&acc, &it, &summed, &batch);
    }
    let t = LabeledTensor::dense(acc.labels.clone(), to_complex(&acc.data)).with_log_scale(acc.log_scale);
    if keep.is_empty() {
        return Ok(t);
    }
    for l in keep {
        if t.position(l.id).is_none() {
            return Err(Error::UnknownLabel(l.id));
        }
    }
    t.permute(&keep.iter().map(|l| l.id).collect::<Vec<_>>())
}

/// Exact environment of tensor `v` on an n x n grid whose tensors are
/// numbered row-major: the rows above and below are swept into two
/// boundaries, then the row of `v` is absorbed between them. The result is
/// over the labels of `v`, in its label order.
pub fn grid_environment(tensors: &[LabeledTensor], n: usize, v: usize, budget: f64) -> Result<LabeledTensor> {
    if tensors.len() != n * n || v >= n * n {
        return Err(Error::LabelMismatch(format!("{} tensors do not form a {n} x {n} grid", tensors.len())));
    }
    let (r, c) = (v / n, v % n);
    let boundary = |set: &[usize]| -> Vec<IndexLabel> {
        let mut out = Vec::new();
        for &k in set {
            for l in &tensors[k].labels {
                let outside = (0..tensors.len()).any(|w| !set.contains(&w) && tensors[w].position(l.id).is_some());
                if outside && !out.contains(l) {
                    out.push(*l);
                }
            }
        }
        out
    };
    // rows are swept starting from the outer edge
    let block = |rows: Vec<usize>| -> Result<Option<LabeledTensor>> {
        let set: Vec<usize> = rows.into_iter().flat_map(|i| (0..n).map(move |j| i * n + j)).collect();
        if set.is_empty() {
            return Ok(None);
        }
        sequential_contract_open(tensors, &set, &boundary(&set), budget).map(Some)
    };
    let top = block((0..r).collect())?;
    let bottom = block((r + 1..n).rev().collect())?;
    let mut mid: Vec<LabeledTensor> = top.into_iter().collect();
    mid.extend((0..c).map(|j| tensors[r * n + j].clone()));
    mid.extend(bottom);
    mid.extend((c + 1..n).map(|j| tensors[r * n + j].clone()));
    let order: Vec<usize> = (0..mid.len()).collect();
    sequential_contract_open(&mid, &order, &tensors[v].labels, budget)
}
