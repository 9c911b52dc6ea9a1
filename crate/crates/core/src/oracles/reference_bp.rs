//! Plain tensor-to-tensor belief propagation, written directly from the
//! sum-product rule for networks whose labels each join two tensors.

use std::collections::BTreeMap;

use crate::engine::{EngineSettings, GbpState, InitStrategy, Schedule};
use crate::error::{Error, Result};
use crate::network::Network;
use crate::region::Preset;
use crate::tensor::{hadamard, marginal, IndexLabel, LabeledTensor, C64};

#[derive(Clone, Debug)]
pub struct ReferenceBp {
    pub tensors: Vec<LabeledTensor>,
    /// label id -> (label, tensor a, tensor b)
    edges: BTreeMap<u32, (IndexLabel, usize, usize)>,
    /// (sending tensor, label id) -> message on that label
    pub msgs: BTreeMap<(usize, u32), Vec<C64>>,
    pub damping: f64,
}

fn normalized(mut v: Vec<C64>) -> Result<Vec<C64>> {
    let s: C64 = v.iter().sum();
    if s.norm() == 0.0 {
        return Err(Error::DegenerateNormalizer);
    }
    for x in v.iter_mut() {
        *x /= s;
    }
    Ok(v)
}

impl ReferenceBp {
    pub fn new(tensors: Vec<LabeledTensor>, damping: f64) -> Result<Self> {
        let mut seen: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
        for (k, t) in tensors.iter().enumerate() {
            for l in &t.labels {
                seen.entry(l.id).or_default().push(k);
            }
        }
        let mut edges = BTreeMap::new();
        let mut msgs = BTreeMap::new();
        for (id, ts) in seen {
            if ts.len() > 2 {
                return Err(Error::LabelMismatch(format!("label {id} joins more than two tensors")));
            }
            if ts.len() == 2 {
                let l = *tensors[ts[0]].labels.iter().find(|l| l.id == id).unwrap();
                edges.insert(id, (l, ts[0], ts[1]));
                for &t in &ts {
                    msgs.insert((t, id), vec![C64::new(1.0 / l.dim as f64, 0.0); l.dim]);
                }
            }
        }
        Ok(ReferenceBp { tensors, edges, msgs, damping })
    }

    fn other(&self, id: u32, v: usize) -> usize {
        let (_, a, b) = self.edges[&id];
        if a == v {
            b
        } else {
            a
        }
    }

    fn incoming(&self, v: usize, id: u32) -> LabeledTensor {
        let (l, _, _) = self.edges[&id];
        LabeledTensor::dense(vec![l], self.msgs[&(self.other(id, v), id)].clone())
    }

    /// T_v times every incoming message except the one on `skip`.
    fn dressed(&self, v: usize, skip: Option<u32>) -> Result<LabeledTensor> {
        let mut t = self.tensors[v].to_dense();
        for l in &self.tensors[v].labels {
            if Some(l.id) != skip && self.edges.contains_key(&l.id) {
                t = hadamard(&t, &self.incoming(v, l.id))?;
            }
        }
        Ok(t)
    }

    /// One synchronous sweep; returns the largest entry change.
    pub fn sweep(&mut self) -> Result<f64> {
        let mut new = BTreeMap::new();
        for &(v, id) in self.msgs.keys() {
            let (l, _, _) = self.edges[&id];
            let t = self.dressed(v, Some(id))?;
            let m = marginal(&t, &[l])?;
            let prop = normalized(m.materialize())?;
            let old = &self.msgs[&(v, id)];
            let mixed = old.iter().zip(&prop).map(|(o, p)| o * (1.0 - self.damping) + p * self.damping).collect();
            new.insert((v, id), normalized(mixed)?);
        }
        let mut delta: f64 = 0.0;
        for (k, m) in &new {
            for (a, b) in m.iter().zip(&self.msgs[k]) {
                delta = delta.max((a - b).norm());
            }
        }
        self.msgs = new;
        Ok(delta)
    }

    /// Bethe free energy -sum_v ln Z_v + sum_e ln Z_e.
    pub fn free_energy(&self) -> Result<C64> {
        let mut f = C64::new(0.0, 0.0);
        for v in 0..self.tensors.len() {
            let t = self.dressed(v, None)?;
            let z: C64 = t.materialize().iter().sum();
            f -= z.ln();
        }
        for (&id, &(_, a, b)) in &self.edges {
            let z: C64 = self.msgs[&(a, id)].iter().zip(&self.msgs[&(b, id)]).map(|(x, y)| x * y).sum();
            f += z.ln();
        }
        Ok(f)
    }

    /// Message into tensor `v` along label `id`.
    pub fn message_into(&self, v: usize, id: u32) -> &[C64] {
        &self.msgs[&(self.other(id, v), id)]
    }
}

/// Runs the engine (simple BP, synchronous, uniform start) next to the
/// reference for `sweeps` sweeps and returns the largest entry difference
/// between corresponding messages seen after any sweep.
pub fn trajectory_gap(net: &Network, damping: f64, sweeps: usize) -> Result<f64> {
    let settings = EngineSettings { damping, schedule: Schedule::Synchronous, ..Default::default() };
    let mut st = GbpState::from_preset(net.clone(), &Preset::SimpleBp, &InitStrategy::Uniform, settings)?;
    if st.graph.n_parents() != net.tensors.len() {
        return Err(Error::LabelMismatch("a tensor's labels lie inside another tensor's".into()));
    }
    let mut rb = ReferenceBp::new(net.tensors.clone(), damping)?;
    let parent_of: Vec<usize> = net
        .tensors
        .iter()
        .map(|t| st.graph.find(&t.labels).expect("tensor region"))
        .collect();
    let mut gap: f64 = 0.0;
    for _ in 0..sweeps {
        st.sweep()?;
        rb.sweep()?;
        for (v, &a) in parent_of.iter().enumerate() {
            for &b in &st.graph.child_links[a] {
                let id = st.graph.regions[b].labels[0].id;
                let m = st.message(a, b).expect("link");
                for (x, y) in m.materialize().iter().zip(rb.message_into(v, id)) {
                    gap = gap.max((x - y).norm());
                }
            }
        }
    }
    Ok(gap)
}
