//! Message passing on a region graph.
//!
//! Each parent keeps the running product of its factor and all incoming
//! messages over the parent's nonzero factor entries. Marginals onto a child
//! are scatter-adds through precomputed gather maps, and the cavity of a
//! parent is that marginal divided by the parent's own message.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::Network;
use crate::region::RegionGraph;
use crate::tensor::{is_zero, pow_entry, IndexLabel, LabeledTensor, Storage, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    /// Children visited in sorted order, each group seeing earlier updates.
    Sequential,
    /// Every group computed from the state at the start of the sweep.
    Synchronous,
}

#[derive(Clone, Debug)]
pub struct EngineSettings {
    pub damping: f64,
    pub epsilon: f64,
    pub max_iters: usize,
    pub schedule: Schedule,
    /// Record the free energy after every sweep (costs one belief pass).
    pub trace_free_energy: bool,
    /// Record the smallest eigenvalue of messages read as (z; z') matrices.
    pub psd_diagnostic: bool,
}

impl Default for EngineSettings {
    fn default() -> Self {
        EngineSettings {
            damping: 0.3,
            epsilon: 1e-10,
            max_iters: 50_000,
            schedule: Schedule::Sequential,
            trace_free_energy: false,
            psd_diagnostic: false,
        }
    }
}

impl EngineSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidSetting(format!("damping {} outside (0, 1]", self.damping)));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidSetting(format!("epsilon {} must be positive", self.epsilon)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub enum InitStrategy {
    Uniform,
    Noisy { c: f64, seed: u64 },
    Explicit(MessageSet),
}

/// Messages keyed by (parent region, child region).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MessageSet {
    pub entries: BTreeMap<(usize, usize), LabeledTensor>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRecord {
    pub iteration: usize,
    pub metric: f64,
    pub free_energy: Option<(f64, f64)>,
    pub min_eigenvalue: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum RunOutcome {
    Converged { iterations: usize },
    NotConverged { best_metric: f64, error: Option<String> },
}

impl RunOutcome {
    pub fn converged(&self) -> bool {
        matches!(self, RunOutcome::Converged { .. })
    }
}

#[derive(Clone, Debug)]
pub struct Stability {
    /// Largest-magnitude eigenvalues, descending.
    pub eigenvalues: Vec<C64>,
    pub spectral_radius: f64,
    pub unstable: bool,
}

/// Sweeps between full rebuilds of the parent products.
const REFRESH_EVERY: usize = 8;

pub fn init_messages(g: &RegionGraph, strategy: &InitStrategy) -> Result<MessageSet> {
    let mut entries = BTreeMap::new();
    match strategy {
        InitStrategy::Uniform | InitStrategy::Noisy { .. } => {
            let mut rng = match strategy {
                InitStrategy::Noisy { seed, .. } => Some(ChaCha8Rng::seed_from_u64(*seed)),
                _ => None,
            };
            let c = if let InitStrategy::Noisy { c, .. } = strategy { *c } else { 0.0 };
            for b in g.children() {
                for &a in &g.parent_links[b] {
                    let labels = g.regions[b].labels.clone();
                    let t = match rng.as_mut() {
                        Some(rng) => LabeledTensor::from_fn(labels, |_| C64::new(1.0 + c * rng.gen::<f64>(), 0.0)),
                        None => LabeledTensor::ones(labels),
                    };
                    entries.insert((a, b), t);
                }
            }
        }
        InitStrategy::Explicit(ms) => {
            for b in g.children() {
                for &a in &g.parent_links[b] {
                    let m = ms
                        .entries
                        .get(&(a, b))
                        .ok_or_else(|| Error::LabelMismatch(format!("no message for link ({a}, {b})")))?;
                    let key = g.regions[b].key();
                    let mut mk = m.label_ids();
                    mk.sort();
                    if mk != key || m.labels.len() != key.len() {
                        return Err(Error::LabelMismatch(format!("message ({a}, {b}) has labels {:?}", m.label_ids())));
                    }
                    entries.insert((a, b), m.permute(&key)?);
                }
            }
            if ms.entries.len() != entries.len() {
                return Err(Error::LabelMismatch("messages supplied for links that do not exist".into()));
            }
        }
    }
    Ok(MessageSet { entries })
}

#[derive(Clone, Copy)]
struct Pw {
    v: C64,
    /// Nonzero when the base is an exact zero (sign of the power).
    z: i8,
}

fn pw(x: C64, p: f64) -> Pw {
    if p == 0.0 {
        Pw { v: C64::new(1.0, 0.0), z: 0 }
    } else if is_zero(x) {
        Pw { v: C64::default(), z: if p > 0.0 { 1 } else { -1 } }
    } else {
        Pw { v: pow_entry(x, p).unwrap(), z: 0 }
    }
}

/// Product of powers in which an exact zero, raised to any nonzero power,
/// makes the entry a structural zero; `None` if non-finite.
fn pw_product(items: impl Iterator<Item = Pw>) -> Option<C64> {
    let mut acc = C64::new(1.0, 0.0);
    let mut zero = false;
    for p in items {
        match p.z {
            0 => acc *= p.v,
            _ => zero = true,
        }
    }
    if zero {
        Some(C64::default())
    } else if !acc.re.is_finite() || !acc.im.is_finite() {
        None
    } else {
        Some(acc)
    }
}

/// Divide by the entry sum, falling back to the L2 norm when the sum cancels.
fn normalize_in_place(v: &mut [C64]) -> bool {
    let s: C64 = v.iter().sum();
    let a: f64 = v.iter().map(|z| z.norm()).sum();
    let d = if s.norm() > 1e-13 * a && !is_zero(s) {
        s
    } else {
        let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if is_zero(C64::new(n, 0.0)) {
            return false;
        }
        C64::new(n, 0.0)
    };
    let inv = d.inv();
    for z in v.iter_mut() {
        *z *= inv;
    }
    v.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// 1 - |<u,v>|^2 for unit-normalized u, v, evaluated as a projection residual.
pub fn overlap_metric(a: &[C64], b: &[C64]) -> f64 {
    let na = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let nb = b.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 1.0;
    }
    let dot: C64 = a.iter().zip(b).map(|(x, y)| y.conj() * x).sum::<C64>() / (na * nb);
    let r: f64 = a.iter().zip(b).map(|(x, y)| (x / na - dot * y / nb).norm_sqr()).sum();
    r.min(1.0)
}

/// Smallest eigenvalue of the Hermitian part of a message whose labels all
/// have square dims, read as a matrix from (z_1..z_k) to (z'_1..z'_k).
pub fn psd_min_eigenvalue(labels: &[IndexLabel], data: &[C64]) -> Option<f64> {
    let chis: Vec<usize> = labels
        .iter()
        .map(|l| {
            let c = (l.dim as f64).sqrt().round() as usize;
            (c * c == l.dim).then_some(c)
        })
        .collect::<Option<_>>()?;
    let n: usize = chis.iter().product();
    let k = labels.len();
    let mut m = DMatrix::<C64>::zeros(n, n);
    let mut zi = vec![0; k];
    let mut zj = vec![0; k];
    for (flat, v) in data.iter().enumerate() {
        let mut f = flat;
        for a in (0..k).rev() {
            let d = f % labels[a].dim;
            f /= labels[a].dim;
            zi[a] = d / chis[a];
            zj[a] = d % chis[a];
        }
        let (mut r, mut c) = (0, 0);
        for a in 0..k {
            r = r * chis[a] + zi[a];
            c = c * chis[a] + zj[a];
        }
        m[(r, c)] += v * 0.5;
        m[(c, r)] += v.conj() * 0.5;
    }
    let e = m.symmetric_eigen();
    Some(e.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min))
}

#[derive(Clone, Debug)]
struct ParentData {
    /// Flat positions (row-major over the region labels) of nonzero factor entries.
    entries: Vec<u32>,
    factor: Vec<C64>,
    log_scale: f64,
    links: Vec<usize>,
    product: Vec<C64>,
}

#[derive(Clone, Debug)]
struct LinkData {
    parent: usize,
    child: usize,
    gather: Vec<u32>,
}

#[derive(Clone, Debug)]
struct ChildData {
    region: usize,
    c: f64,
    q: f64,
    d: f64,
    links: Vec<usize>,
    /// None when F_b is all ones.
    factor: Option<Vec<C64>>,
    log_scale: f64,
}

/// Factor entries with the largest magnitude moved into the log scale.
fn factor_entries(t: &LabeledTensor) -> (Vec<u32>, Vec<C64>, f64) {
    let (mut pos, mut val) = (Vec::new(), Vec::new());
    match &t.storage {
        Storage::Dense(d) => {
            for (k, v) in d.iter().enumerate() {
                if !is_zero(*v) {
                    pos.push(k as u32);
                    val.push(*v);
                }
            }
        }
        Storage::Sparse(m) => {
            for (idx, v) in m {
                let mut off = 0usize;
                for (k, l) in t.labels.iter().enumerate() {
                    off = off * l.dim + idx[k];
                }
                pos.push(off as u32);
                val.push(*v);
            }
        }
    }
    let mx = val.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut ls = t.log_scale;
    if mx > 0.0 {
        for v in val.iter_mut() {
            *v /= mx;
        }
        ls += mx.ln();
    }
    (pos, val, ls)
}

pub struct GbpState {
    pub network: Network,
    pub graph: RegionGraph,
    pub settings: EngineSettings,
    pub history: Vec<SweepRecord>,
    pub iteration: usize,
    parents: Vec<ParentData>,
    children: Vec<ChildData>,
    links: Vec<LinkData>,
    msgs: Vec<Vec<C64>>,
    /// (parent region, child region) -> link id
    link_index: BTreeMap<(usize, usize), usize>,
}

type Proposal = Vec<Vec<C64>>;

impl GbpState {
    pub fn new(network: Network, graph: RegionGraph, messages: MessageSet, settings: EngineSettings) -> Result<Self> {
        settings.validate()?;
        let np = graph.n_parents();
        let mut parents = Vec::with_capacity(np);
        for a in graph.parents() {
            let (entries, factor, log_scale) = factor_entries(&graph.factors[a]);
            if entries.len() > u32::MAX as usize || graph.regions[a].size() > u32::MAX as usize {
                return Err(Error::InvalidSetting(format!("parent region {a} is too large")));
            }
            parents.push(ParentData { entries, factor, log_scale, links: vec![], product: vec![] });
        }
        let mut children = Vec::new();
        let mut links = Vec::new();
        let mut link_index = BTreeMap::new();
        for b in graph.children() {
            let c = graph.regions[b].counting_number as f64;
            let n = graph.parent_links[b].len() as f64;
            if c + n == 0.0 {
                return Err(Error::SingularUpdate(b));
            }
            let fb = graph.factors[b].to_dense();
            let trivial = fb.dense_data().unwrap().iter().all(|z| *z == C64::new(1.0, 0.0)) && fb.log_scale == 0.0;
            let (factor, log_scale) = if trivial {
                (None, 0.0)
            } else {
                let d = fb.dense_data().unwrap();
                let mx = d.iter().map(|z| z.norm()).fold(0.0, f64::max);
                let mx = if mx > 0.0 { mx } else { 1.0 };
                (Some(d.iter().map(|z| z / mx).collect()), fb.log_scale + mx.ln())
            };
            let ci = children.len();
            let mut cl = Vec::new();
            for &a in &graph.parent_links[b] {
                let pl = &graph.regions[a].labels;
                let cs = crate::tensor::embed_strides(&graph.regions[b].labels, pl);
                let dims: Vec<usize> = pl.iter().map(|l| l.dim).collect();
                let gather = parents[a]
                    .entries
                    .iter()
                    .map(|&e| {
                        let mut f = e as usize;
                        let mut off = 0;
                        for k in (0..dims.len()).rev() {
                            off += (f % dims[k]) * cs[k];
                            f /= dims[k];
                        }
                        off as u32
                    })
                    .collect();
                let id = links.len();
                links.push(LinkData { parent: a, child: ci, gather });
                parents[a].links.push(id);
                link_index.insert((a, b), id);
                cl.push(id);
            }
            children.push(ChildData { region: b, c, q: 1.0 / (c + n), d: c / (c + n), links: cl, factor, log_scale });
        }
        let mut st = GbpState {
            network,
            graph,
            settings,
            history: vec![],
            iteration: 0,
            parents,
            children,
            links,
            msgs: vec![],
            link_index,
        };
        st.set_messages(&messages)?;
        Ok(st)
    }

    /// Build regions from a preset and initialize messages in one step.
    pub fn from_preset(
        network: Network,
        preset: &crate::region::Preset,
        init: &InitStrategy,
        settings: EngineSettings,
    ) -> Result<Self> {
        let g = crate::region::build_preset(&network, preset)?;
        let m = init_messages(&g, init)?;
        GbpState::new(network, g, m, settings)
    }

    pub fn set_messages(&mut self, ms: &MessageSet) -> Result<()> {
        let checked = init_messages(&self.graph, &InitStrategy::Explicit(ms.clone()))?;
        let mut msgs = vec![vec![]; self.links.len()];
        for ((a, b), t) in &checked.entries {
            let id = self.link_index[&(*a, *b)];
            let mut v = t.to_dense().dense_data().unwrap().to_vec();
            if !normalize_in_place(&mut v) {
                return Err(Error::DegenerateNormalizer);
            }
            msgs[id] = v;
        }
        self.msgs = msgs;
        self.refresh_all();
        Ok(())
    }

    pub fn messages(&self) -> MessageSet {
        let mut entries = BTreeMap::new();
        for (&(a, b), &id) in &self.link_index {
            entries.insert((a, b), LabeledTensor::dense(self.graph.regions[b].labels.clone(), self.msgs[id].clone()));
        }
        MessageSet { entries }
    }

    pub fn message(&self, parent: usize, child: usize) -> Option<LabeledTensor> {
        let id = *self.link_index.get(&(parent, child))?;
        Some(LabeledTensor::dense(self.graph.regions[child].labels.clone(), self.msgs[id].clone()))
    }

    pub fn n_messages(&self) -> usize {
        self.links.len()
    }

    fn refresh(&mut self, p: usize) {
        let pd = &self.parents[p];
        let mut prod = pd.factor.clone();
        for &l in &pd.links {
            let m = &self.msgs[l];
            for (x, &g) in prod.iter_mut().zip(&self.links[l].gather) {
                *x *= m[g as usize];
            }
        }
        self.parents[p].product = prod;
    }

    fn refresh_all(&mut self) {
        for p in 0..self.parents.len() {
            self.refresh(p);
        }
    }

    fn child_size(&self, ci: usize) -> usize {
        self.graph.regions[self.children[ci].region].size()
    }

    fn direct_cavity(&self, l: usize, size: usize) -> Vec<C64> {
        let p = &self.parents[self.links[l].parent];
        let mut out = vec![C64::default(); size];
        for (i, &g) in self.links[l].gather.iter().enumerate() {
            let mut v = p.factor[i];
            for &l2 in &p.links {
                if l2 != l {
                    v *= self.msgs[l2][self.links[l2].gather[i] as usize];
                }
            }
            out[g as usize] += v;
        }
        out
    }

    fn cavity(&self, l: usize, size: usize) -> Vec<C64> {
        let m = &self.msgs[l];
        if m.iter().any(|z| is_zero(*z)) {
            return self.direct_cavity(l, size);
        }
        let p = &self.parents[self.links[l].parent];
        let mut out = vec![C64::default(); size];
        for (x, &g) in p.product.iter().zip(&self.links[l].gather) {
            out[g as usize] += x;
        }
        for (o, mi) in out.iter_mut().zip(m) {
            *o /= mi;
        }
        out
    }

    /// Normalized proposals for every message into child `ci`.
    fn proposals(&self, ci: usize) -> Result<Proposal> {
        let ch = &self.children[ci];
        let size = self.child_size(ci);
        let cav: Vec<Vec<C64>> = ch.links.iter().map(|&l| self.cavity(l, size)).collect();
        let r: Vec<Vec<Pw>> = cav.iter().map(|c| c.iter().map(|&x| pw(x, ch.q)).collect()).collect();
        let s: Vec<Vec<Pw>> = cav.iter().map(|c| c.iter().map(|&x| pw(x, ch.q - 1.0)).collect()).collect();
        let fd: Option<Vec<Pw>> = ch.factor.as_ref().map(|f| f.iter().map(|&x| pw(x, ch.d)).collect());
        let n = ch.links.len();
        let mut out = Vec::with_capacity(n);
        for a in 0..n {
            let mut m = Vec::with_capacity(size);
            for x in 0..size {
                let items = (0..n).map(|k| if k == a { s[k][x] } else { r[k][x] });
                let f = fd.as_ref().map(|f| f[x]);
                let v = pw_product(items.chain(f)).ok_or(Error::NonFiniteEntry(ch.region))?;
                m.push(v);
            }
            if !normalize_in_place(&mut m) {
                return Err(Error::NonFiniteEntry(ch.region));
            }
            out.push(m);
        }
        Ok(out)
    }

    /// Damp, normalize and store proposals; returns the summed metric.
    fn apply(&mut self, ci: usize, props: Proposal) -> Result<f64> {
        let lam = self.settings.damping;
        let mut total = 0.0;
        let links = self.children[ci].links.clone();
        for (k, prop) in props.into_iter().enumerate() {
            let l = links[k];
            total += overlap_metric(&prop, &self.msgs[l]);
            let mut new: Vec<C64> = if lam == 1.0 {
                prop
            } else {
                self.msgs[l].iter().zip(&prop).map(|(o, p)| o * (1.0 - lam) + p * lam).collect()
            };
            if !normalize_in_place(&mut new) {
                return Err(Error::NonFiniteEntry(self.children[ci].region));
            }
            let old = std::mem::replace(&mut self.msgs[l], new);
            let p = self.links[l].parent;
            if old.iter().any(|z| is_zero(*z)) {
                self.refresh(p);
            } else {
                let ratio: Vec<C64> = self.msgs[l].iter().zip(&old).map(|(n, o)| n / o).collect();
                let gather = &self.links[l].gather;
                for (x, &g) in self.parents[p].product.iter_mut().zip(gather) {
                    *x *= ratio[g as usize];
                }
            }
        }
        Ok(total)
    }

    /// One sweep over all child groups; returns the averaged metric.
    pub fn sweep(&mut self) -> Result<f64> {
        // parent products are kept current by ratio updates; rebuilding them
        // now and then bounds the rounding drift
        if self.iteration % REFRESH_EVERY == 0 || self.settings.schedule == Schedule::Synchronous {
            self.refresh_all();
        }
        let mut total = 0.0;
        match self.settings.schedule {
            Schedule::Sequential => {
                for ci in 0..self.children.len() {
                    let p = self.proposals(ci)?;
                    total += self.apply(ci, p)?;
                }
            }
            Schedule::Synchronous => {
                let all = (0..self.children.len()).map(|ci| self.proposals(ci)).collect::<Result<Vec<_>>>()?;
                for (ci, p) in all.into_iter().enumerate() {
                    total += self.apply(ci, p)?;
                }
            }
        }
        self.iteration += 1;
        let metric = if self.links.is_empty() { 0.0 } else { total / self.links.len() as f64 };
        let free_energy = if self.settings.trace_free_energy {
            self.kikuchi_free_energy().ok().map(|f| (f.re, f.im))
        } else {
            None
        };
        let min_eigenvalue = if self.settings.psd_diagnostic { self.min_message_eigenvalue() } else { None };
        self.history.push(SweepRecord { iteration: self.iteration, metric, free_energy, min_eigenvalue });
        Ok(metric)
    }

    /// Metric of one synchronous update without changing the state.
    pub fn residual(&mut self) -> Result<f64> {
        self.refresh_all();
        let mut total = 0.0;
        for ci in 0..self.children.len() {
            let props = self.proposals(ci)?;
            for (k, p) in props.iter().enumerate() {
                total += overlap_metric(p, &self.msgs[self.children[ci].links[k]]);
            }
        }
        Ok(if self.links.is_empty() { 0.0 } else { total / self.links.len() as f64 })
    }

    pub fn run(&mut self) -> RunOutcome {
        let (eps, max_iters) = (self.settings.epsilon, self.settings.max_iters);
        self.run_with(eps, max_iters)
    }

    pub fn run_with(&mut self, epsilon: f64, max_iters: usize) -> RunOutcome {
        if max_iters == 0 {
            return match self.residual() {
                Ok(m) if m <= epsilon => RunOutcome::Converged { iterations: 0 },
                Ok(m) => RunOutcome::NotConverged { best_metric: m, error: None },
                Err(e) => RunOutcome::NotConverged { best_metric: f64::INFINITY, error: Some(e.to_string()) },
            };
        }
        let mut best = f64::INFINITY;
        for it in 0..max_iters {
            match self.sweep() {
                Ok(m) => {
                    best = best.min(m);
                    if m <= epsilon {
                        return RunOutcome::Converged { iterations: it + 1 };
                    }
                }
                Err(e) => return RunOutcome::NotConverged { best_metric: best, error: Some(e.to_string()) },
            }
        }
        RunOutcome::NotConverged { best_metric: best, error: None }
    }

    fn fresh_product(&self, p: usize) -> Vec<C64> {
        let pd = &self.parents[p];
        let mut prod = pd.factor.clone();
        for &l in &pd.links {
            for (x, &g) in prod.iter_mut().zip(&self.links[l].gather) {
                *x *= self.msgs[l][g as usize];
            }
        }
        prod
    }

    fn parent_log_z(&self, p: usize) -> Result<C64> {
        let prod = self.fresh_product(p);
        let s: C64 = prod.iter().sum();
        let a: f64 = prod.iter().map(|z| z.norm()).sum();
        if is_zero(s) || s.norm() < 1e-13 * a {
            return Err(Error::DegenerateNormalizer);
        }
        Ok(s.ln() + self.parents[p].log_scale)
    }

    fn child_unnormalized(&self, ci: usize) -> Result<Vec<C64>> {
        let ch = &self.children[ci];
        let size = self.child_size(ci);
        let e = -1.0 / ch.c;
        (0..size)
            .map(|x| {
                let items = ch.links.iter().map(|&l| pw(self.msgs[l][x], e));
                let f = ch.factor.as_ref().map(|f| pw(f[x], 1.0));
                pw_product(items.chain(f)).ok_or(Error::NonFiniteEntry(ch.region))
            })
            .collect()
    }

    fn child_log_z(&self, ci: usize) -> Result<C64> {
        let v = self.child_unnormalized(ci)?;
        let s: C64 = v.iter().sum();
        let a: f64 = v.iter().map(|z| z.norm()).sum();
        if is_zero(s) || s.norm() < 1e-13 * a {
            return Err(Error::DegenerateNormalizer);
        }
        Ok(s.ln() + self.children[ci].log_scale)
    }

    fn child_index(&self, region: usize) -> Option<usize> {
        self.children.iter().position(|c| c.region == region)
    }

    /// Normalized belief of a region (parent or child) and its log partition function.
    pub fn belief(&self, region: usize) -> Result<(LabeledTensor, C64)> {
        let labels = self.graph.regions[region].labels.clone();
        if region < self.parents.len() {
            let prod = self.fresh_product(region);
            let size = self.graph.regions[region].size();
            let log_z = self.parent_log_z(region)?;
            let s: C64 = prod.iter().sum();
            let t = if size <= 1 << 24 {
                let mut d = vec![C64::default(); size];
                for (&e, v) in self.parents[region].entries.iter().zip(&prod) {
                    d[e as usize] = v / s;
                }
                LabeledTensor::dense(labels, d)
            } else {
                let dims: Vec<usize> = labels.iter().map(|l| l.dim).collect();
                let mut m = BTreeMap::new();
                for (&e, v) in self.parents[region].entries.iter().zip(&prod) {
                    let mut idx = vec![0; dims.len()];
                    let mut f = e as usize;
                    for k in (0..dims.len()).rev() {
                        idx[k] = f % dims[k];
                        f /= dims[k];
                    }
                    m.insert(idx, v / s);
                }
                LabeledTensor::sparse(labels, m)
            };
            Ok((t, log_z))
        } else {
            let ci = self.child_index(region).ok_or(Error::LabelMismatch(format!("region {region} unknown")))?;
            let v = self.child_unnormalized(ci)?;
            let log_z = self.child_log_z(ci)?;
            let s: C64 = v.iter().sum();
            Ok((LabeledTensor::dense(labels, v.iter().map(|z| z / s).collect()), log_z))
        }
    }

    pub fn parent_belief(&self, a: usize) -> Result<(LabeledTensor, C64)> {
        if a >= self.parents.len() {
            return Err(Error::LabelMismatch(format!("region {a} is not a parent")));
        }
        self.belief(a)
    }

    pub fn child_belief(&self, b: usize) -> Result<(LabeledTensor, C64)> {
        if b < self.parents.len() {
            return Err(Error::LabelMismatch(format!("region {b} is not a child")));
        }
        self.belief(b)
    }

    /// Incoming messages of region `r` with the powers they carry in its
    /// belief: 1 for a parent, -1/c_r for a child.
    pub fn region_messages(&self, r: usize) -> Result<Vec<(LabeledTensor, f64)>> {
        let links: Vec<(usize, f64)> = if r < self.parents.len() {
            self.parents[r].links.iter().map(|&l| (l, 1.0)).collect()
        } else {
            let ci = self.child_index(r).ok_or(Error::LabelMismatch(format!("region {r} unknown")))?;
            let e = -1.0 / self.children[ci].c;
            self.children[ci].links.iter().map(|&l| (l, e)).collect()
        };
        Ok(links
            .into_iter()
            .map(|(l, e)| (LabeledTensor::dense(self.link_child_labels(l).to_vec(), self.msgs[l].clone()), e))
            .collect())
    }

    pub(crate) fn link_child_labels(&self, l: usize) -> &[IndexLabel] {
        &self.graph.regions[self.children[self.links[l].child].region].labels
    }

    pub fn region_log_z(&self, r: usize) -> Result<C64> {
        if r < self.parents.len() {
            self.parent_log_z(r)
        } else {
            self.child_log_z(self.child_index(r).ok_or(Error::LabelMismatch(format!("region {r} unknown")))?)
        }
    }

    /// -sum_r c_r log Z_r.
    pub fn kikuchi_free_energy(&self) -> Result<C64> {
        let mut f = C64::default();
        for p in 0..self.parents.len() {
            f -= self.parent_log_z(p)?;
        }
        for ci in 0..self.children.len() {
            f -= self.child_log_z(ci)? * self.children[ci].c;
        }
        Ok(f)
    }

    pub fn min_message_eigenvalue(&self) -> Option<f64> {
        let mut mn: Option<f64> = None;
        for (l, m) in self.msgs.iter().enumerate() {
            let e = psd_min_eigenvalue(self.link_child_labels(l), m)?;
            mn = Some(mn.map_or(e, |x: f64| x.min(e)));
        }
        mn
    }

    fn flat_messages(&self) -> Vec<C64> {
        self.msgs.iter().flatten().copied().collect()
    }

    fn load_flat(&mut self, v: &[C64]) {
        let mut k = 0;
        for m in self.msgs.iter_mut() {
            let n = m.len();
            m.copy_from_slice(&v[k..k + n]);
            k += n;
        }
        self.refresh_all();
    }

    /// One damped synchronous sweep as a map on the flattened messages.
    fn sync_map(&mut self, v: &[C64]) -> Result<Vec<C64>> {
        self.load_flat(v);
        let lam = self.settings.damping;
        let mut out = Vec::with_capacity(v.len());
        let all = (0..self.children.len()).map(|ci| self.proposals(ci)).collect::<Result<Vec<_>>>()?;
        let mut by_link: Vec<Vec<C64>> = vec![vec![]; self.links.len()];
        for (ci, props) in all.into_iter().enumerate() {
            for (k, p) in props.into_iter().enumerate() {
                by_link[self.children[ci].links[k]] = p;
            }
        }
        for (l, p) in by_link.into_iter().enumerate() {
            let mut new: Vec<C64> = self.msgs[l].iter().zip(&p).map(|(o, x)| o * (1.0 - lam) + x * lam).collect();
            let s: C64 = new.iter().sum();
            for z in new.iter_mut() {
                *z /= s;
            }
            out.extend(new);
        }
        Ok(out)
    }

    /// Eigenvalues of the Jacobian of one damped synchronous sweep around the
    /// current messages, by central differences.
    pub fn linear_stability(&mut self) -> Result<Stability> {
        let res = self.residual()?;
        if res > 1e-6 {
            return Err(Error::NotAFixedPoint(res));
        }
        let x0 = self.flat_messages();
        let n = x0.len();
        let mut jac = DMatrix::<C64>::zeros(n, n);
        for k in 0..n {
            let h = 1e-6 * x0[k].norm().max(1e-3);
            let mut xp = x0.clone();
            xp[k] += h;
            let fp = self.sync_map(&xp)?;
            xp[k] = x0[k] - h;
            let fm = self.sync_map(&xp)?;
            for i in 0..n {
                jac[(i, k)] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        self.load_flat(&x0);
        let mut ev = jacobian_eigenvalues(jac);
        ev.sort_by(|a, b| b.norm().partial_cmp(&a.norm()).unwrap());
        let spectral_radius = ev.first().map_or(0.0, |z| z.norm());
        ev.truncate(12);
        Ok(Stability { eigenvalues: ev, spectral_radius, unstable: spectral_radius > 1.0 + 1e-8 })
    }

    /// Trace rows: iteration, metric, Re F, Im F, min eigenvalue.
    pub fn write_trace_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["iteration", "metric", "free_energy_re", "free_energy_im", "min_eigenvalue"])?;
        let opt = |x: Option<f64>| x.map(|v| format!("{v:.17e}")).unwrap_or_default();
        for h in &self.history {
            wr.write_record([
                h.iteration.to_string(),
                format!("{:.17e}", h.metric),
                opt(h.free_energy.map(|f| f.0)),
                opt(h.free_energy.map(|f| f.1)),
                opt(h.min_eigenvalue),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Imaginary part of a log-valued quantity reduced into (-pi, pi].
pub fn reduced_phase(im: f64) -> f64 {
    let tau = 2.0 * std::f64::consts::PI;
    let r = im.rem_euclid(tau);
    if r > std::f64::consts::PI {
        r - tau
    } else {
        r
    }
}

/// True when the free energy has a phase that is not a multiple of 2 pi.
pub fn is_nonphysical(f: C64) -> bool {
    reduced_phase(f.im).abs() > 1e-6
}

/// Eigenvalues from a real Schur form when the matrix is real, a complex
/// Schur form otherwise, and a norm-growth estimate of the spectral radius if
/// the iteration never settles.
fn jacobian_eigenvalues(jac: DMatrix<C64>) -> Vec<C64> {
    let n = jac.nrows();
    let cap = 200 * n.max(10);
    let real = jac.iter().all(|z| z.im.abs() < 1e-12);
    // the iteration can stall on exactly degenerate spectra; the transpose and a
    // random orthogonal similarity give it different starting Hessenberg forms
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let q = DMatrix::<f64>::from_fn(n, n, |_, _| rng.gen::<f64>() - 0.5).qr().q().map(|x| C64::new(x, 0.0));
    let candidates = [jac.clone(), jac.transpose(), q.transpose() * &jac * &q];
    for m in candidates {
        let ev = if real {
            nalgebra::Schur::try_new(m.map(|z| z.re), 1e-12, cap).map(|s| quasi_triangular_eigenvalues(&s.unpack().1))
        } else {
            nalgebra::Schur::try_new(m, 1e-12, cap).map(|s| s.unpack().1.diagonal().iter().copied().collect())
        };
        if let Some(ev) = ev {
            return ev;
        }
    }
    vec![C64::new(growth_radius(&jac), 0.0)]
}

fn quasi_triangular_eigenvalues(t: &DMatrix<f64>) -> Vec<C64> {
    let n = t.nrows();
    let mut out = Vec::with_capacity(n);
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)] != 0.0 {
            let (a, b, c, d) = (t[(i, i)], t[(i, i + 1)], t[(i + 1, i)], t[(i + 1, i + 1)]);
            let half = (a + d) / 2.0;
            let disc = C64::new(((a - d) / 2.0).powi(2) + b * c, 0.0).sqrt();
            out.push(C64::new(half, 0.0) + disc);
            out.push(C64::new(half, 0.0) - disc);
            i += 2;
        } else {
            out.push(C64::new(t[(i, i)], 0.0));
            i += 1;
        }
    }
    out
}

/// Geometric-mean growth rate of |J^k v| over many steps.
fn growth_radius(jac: &DMatrix<C64>) -> f64 {
    let n = jac.nrows();
    let mut v = nalgebra::DVector::<C64>::from_fn(n, |i, _| C64::new(1.0 + (i % 7) as f64 * 0.1, (i % 3) as f64 * 0.1));
    v /= C64::new(v.norm(), 0.0);
    let (burn, steps) = (500, 2000);
    let mut log_sum = 0.0;
    for k in 0..burn + steps {
        let w = jac * &v;
        let nrm = w.norm();
        if nrm == 0.0 {
            return 0.0;
        }
        if k >= burn {
            log_sum += nrm.ln();
        }
        v = w / C64::new(nrm, 0.0);
    }
    (log_sum / steps as f64).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{random_tree_network, villain_network, Boundary, Representation};
    use crate::oracles::exact::exact_log_z;
    use crate::region::{build_preset, Preset};

    fn tree_state(seed: u64, settings: EngineSettings) -> GbpState {
        let net = random_tree_network(7, 3, false, seed);
        GbpState::from_preset(net, &Preset::SimpleBp, &InitStrategy::Uniform, settings).unwrap()
    }

    #[test]
    fn settings_are_checked() {
        for d in [0.0, -0.1, 1.5, f64::NAN] {
            let s = EngineSettings { damping: d, ..Default::default() };
            assert!(matches!(s.validate(), Err(Error::InvalidSetting(_))));
        }
        let s = EngineSettings { epsilon: 0.0, ..Default::default() };
        assert!(matches!(s.validate(), Err(Error::InvalidSetting(_))));
        assert!(EngineSettings { damping: 1.0, ..Default::default() }.validate().is_ok());
    }

    #[test]
    fn noisy_init_is_seeded() {
        let net = random_tree_network(6, 3, false, 2);
        let g = build_preset(&net, &Preset::SimpleBp).unwrap();
        let a = init_messages(&g, &InitStrategy::Noisy { c: 0.1, seed: 9 }).unwrap();
        let b = init_messages(&g, &InitStrategy::Noisy { c: 0.1, seed: 9 }).unwrap();
        let c = init_messages(&g, &InitStrategy::Noisy { c: 0.1, seed: 10 }).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        for m in a.entries.values() {
            assert!(m.materialize().iter().all(|z| z.re >= 1.0 && z.re <= 1.1 && z.im == 0.0));
        }
    }

    #[test]
    fn explicit_messages_must_match_links() {
        let net = random_tree_network(6, 3, false, 4);
        let g = build_preset(&net, &Preset::SimpleBp).unwrap();
        let mut ms = init_messages(&g, &InitStrategy::Uniform).unwrap();
        assert!(init_messages(&g, &InitStrategy::Explicit(ms.clone())).is_ok());
        let key = *ms.entries.keys().next().unwrap();
        ms.entries.insert((key.0, key.1 + 1000), LabeledTensor::ones(vec![IndexLabel::new(999, 2)]));
        assert!(matches!(init_messages(&g, &InitStrategy::Explicit(ms.clone())), Err(Error::LabelMismatch(_))));
        ms.entries.remove(&(key.0, key.1 + 1000));
        ms.entries.insert(key, LabeledTensor::ones(vec![IndexLabel::new(999, 2)]));
        assert!(matches!(init_messages(&g, &InitStrategy::Explicit(ms)), Err(Error::LabelMismatch(_))));
    }

    #[test]
    fn simple_bp_is_exact_on_trees() {
        for seed in 0..5 {
            let settings = EngineSettings { epsilon: 1e-24, max_iters: 2000, ..Default::default() };
            let mut st = tree_state(seed, settings);
            assert!(st.run().converged());
            let f = st.kikuchi_free_energy().unwrap();
            let exact = exact_log_z(&st.network.tensors).unwrap();
            assert!((f + exact).norm() < 1e-10, "seed {seed}: {f} vs {}", -exact);
        }
    }

    #[test]
    fn schedules_share_fixed_points() {
        let settings = EngineSettings { epsilon: 1e-24, max_iters: 2000, ..Default::default() };
        let mut a = tree_state(3, settings.clone());
        let mut b = tree_state(3, EngineSettings { schedule: Schedule::Synchronous, ..settings });
        assert!(a.run().converged() && b.run().converged());
        let fa = a.kikuchi_free_energy().unwrap();
        let fb = b.kikuchi_free_energy().unwrap();
        assert!((fa - fb).norm() < 1e-10);
        assert!(a.residual().unwrap() < 1e-20);
    }

    #[test]
    fn history_records_each_sweep() {
        let settings = EngineSettings { epsilon: 1e-12, trace_free_energy: true, ..Default::default() };
        let mut st = tree_state(1, settings);
        let out = st.run();
        let RunOutcome::Converged { iterations } = out else { panic!("{out:?}") };
        assert_eq!(st.history.len(), iterations);
        assert!(st.history.iter().all(|h| h.free_energy.is_some()));
        assert!(st.history.last().unwrap().metric < 1e-12);
    }

    #[test]
    fn stability_needs_a_fixed_point() {
        let net = random_tree_network(6, 3, false, 5);
        let mut st =
            GbpState::from_preset(net, &Preset::SimpleBp, &InitStrategy::Noisy { c: 1.0, seed: 1 }, Default::default())
                .unwrap();
        assert!(matches!(st.linear_stability(), Err(Error::NotAFixedPoint(_))));
    }

    #[test]
    fn villain_uniform_point_changes_stability_at_threshold() {
        let bc = crate::oracles::villain::villain_bp_beta_c();
        let rho = |b: f64| {
            let m = villain_network(b, (2, 2), Representation::FactorGraph, Boundary::Periodic);
            let settings = EngineSettings { damping: 1.0, ..Default::default() };
            let mut st = GbpState::from_preset(m.network, &Preset::SimpleBp, &InitStrategy::Uniform, settings).unwrap();
            st.linear_stability().unwrap()
        };
        assert!(!rho(bc - 1e-3).unstable);
        assert!(rho(bc + 1e-3).unstable);
    }

    #[test]
    fn phase_reduction() {
        assert!((reduced_phase(3.0 * std::f64::consts::PI) - std::f64::consts::PI).abs() < 1e-12);
        assert!(!is_nonphysical(C64::new(-1.0, 2.0 * std::f64::consts::PI)));
        assert!(is_nonphysical(C64::new(-1.0, 1.0)));
    }
}
