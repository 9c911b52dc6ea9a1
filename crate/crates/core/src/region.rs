//! Region graphs: parent regions, recursively intersected children,
//! counting numbers and region factors.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::Network;
use crate::tensor::{hadamard, IndexLabel, LabeledTensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionKind {
    Parent,
    Child,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    /// Sorted by label id; this is the region's identity.
    pub labels: Vec<IndexLabel>,
    pub counting_number: i64,
    pub kind: RegionKind,
    pub level: usize,
}

impl Region {
    pub fn key(&self) -> Vec<u32> {
        self.labels.iter().map(|l| l.id).collect()
    }

    pub fn size(&self) -> usize {
        self.labels.iter().map(|l| l.dim).product()
    }
}

#[derive(Clone, Debug)]
pub struct RegionGraph {
    /// Parents first, then children; each group sorted by key.
    pub regions: Vec<Region>,
    /// C(a) for each parent (empty for children).
    pub child_links: Vec<Vec<usize>>,
    /// P(b) for each child (empty for parents).
    pub parent_links: Vec<Vec<usize>>,
    pub factors: Vec<LabeledTensor>,
    /// Children dropped because their counting number is zero.
    pub dropped: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Preset {
    SimpleBp,
    /// Blocks of tensor indices.
    BlockBp(Vec<Vec<usize>>),
    R1Plaquettes,
    R2Plaquettes,
    R1Voxels,
    R2Voxels,
    FactorGraphPlaquettes,
}

impl Preset {
    pub fn name(&self) -> &'static str {
        match self {
            Preset::SimpleBp => "simple_bp",
            Preset::BlockBp(_) => "block_bp",
            Preset::R1Plaquettes => "r1_plaquettes",
            Preset::R2Plaquettes => "r2_plaquettes",
            Preset::R1Voxels => "r1_voxels",
            Preset::R2Voxels => "r2_voxels",
            Preset::FactorGraphPlaquettes => "factor_graph_plaquettes",
        }
    }

    /// Parses every preset except `block_bp`, which needs a partition.
    pub fn parse(s: &str) -> Option<Preset> {
        Some(match s {
            "simple_bp" | "bp" => Preset::SimpleBp,
            "r1_plaquettes" | "r1" => Preset::R1Plaquettes,
            "r2_plaquettes" | "r2" => Preset::R2Plaquettes,
            "r1_voxels" => Preset::R1Voxels,
            "r2_voxels" => Preset::R2Voxels,
            "factor_graph_plaquettes" | "fg" => Preset::FactorGraphPlaquettes,
            _ => return None,
        })
    }
}

fn sorted_set(ls: &[IndexLabel]) -> Vec<IndexLabel> {
    let mut v = ls.to_vec();
    v.sort();
    v.dedup_by_key(|l| l.id);
    v
}

fn is_subset(a: &[IndexLabel], b: &[IndexLabel]) -> bool {
    // both sorted by id
    let mut j = 0;
    for l in a {
        while j < b.len() && b[j].id < l.id {
            j += 1;
        }
        if j == b.len() || b[j].id != l.id {
            return false;
        }
        j += 1;
    }
    true
}

fn intersect(a: &[IndexLabel], b: &[IndexLabel]) -> Vec<IndexLabel> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < a.len() && j < b.len() {
        match a[i].id.cmp(&b[j].id) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

fn key(ls: &[IndexLabel]) -> Vec<u32> {
    ls.iter().map(|l| l.id).collect()
}

pub fn preset_regions(network: &Network, preset: &Preset) -> Result<Vec<Vec<IndexLabel>>> {
    let per_tensor = || network.tensors.iter().map(|t| t.labels.clone()).collect::<Vec<_>>();
    let geometry = || network.geometry.as_ref().ok_or_else(|| Error::GeometryMissing(preset.name().into()));
    Ok(match preset {
        Preset::SimpleBp => per_tensor(),
        Preset::BlockBp(blocks) => blocks
            .iter()
            .map(|b| b.iter().flat_map(|&v| network.tensors[v].labels.iter().copied()).collect())
            .collect(),
        Preset::R1Plaquettes | Preset::R1Voxels => {
            let g = geometry()?;
            let cells = if *preset == Preset::R1Plaquettes { &g.plaquettes } else { &g.voxels };
            if cells.is_empty() {
                return Err(Error::GeometryMissing(preset.name().into()));
            }
            let mut out = per_tensor();
            out.extend(cells.iter().map(|c| c.interior.clone()));
            out
        }
        Preset::R2Plaquettes | Preset::R2Voxels => {
            let g = geometry()?;
            let cells = if *preset == Preset::R2Plaquettes { &g.plaquettes } else { &g.voxels };
            if cells.is_empty() {
                return Err(Error::GeometryMissing(preset.name().into()));
            }
            let mut out = per_tensor();
            out.extend(cells.iter().map(|c| c.interior.iter().chain(&c.exterior).copied().collect()));
            out
        }
        Preset::FactorGraphPlaquettes => {
            let g = geometry()?;
            if g.plaquettes.is_empty() {
                return Err(Error::GeometryMissing(preset.name().into()));
            }
            g.plaquettes.iter().map(|c| c.interior.clone()).collect()
        }
    })
}

/// Hadamard product of every tensor whose labels lie inside `labels`,
/// broadcast over the region and returned in the region's label order.
pub fn region_factor(labels: &[IndexLabel], tensors: &[LabeledTensor]) -> Result<LabeledTensor> {
    let sorted = sorted_set(labels);
    let mut acc: Option<LabeledTensor> = None;
    for t in tensors {
        if is_subset(&sorted_set(&t.labels), &sorted) {
            acc = Some(match acc {
                None => t.clone(),
                Some(a) => hadamard(&a, t)?,
            });
        }
    }
    let Some(f) = acc else {
        return Ok(LabeledTensor::ones(labels.to_vec()));
    };
    let f = if f.labels.len() < labels.len() { hadamard(&f, &LabeledTensor::ones(labels.to_vec()))? } else { f };
    f.permute(&key(labels))
}

/// Counting numbers by descending size: c_r = 1 - sum of c over strict supersets.
pub fn counting_numbers(sets: &[Vec<IndexLabel>], n_parents: usize) -> Vec<i64> {
    let mut order: Vec<usize> = (0..sets.len()).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(sets[i].len()));
    let mut c = vec![0i64; sets.len()];
    for (pos, &i) in order.iter().enumerate() {
        if i < n_parents {
            c[i] = 1;
            continue;
        }
        let mut s = 0;
        for &j in &order[..pos] {
            if sets[j].len() > sets[i].len() && is_subset(&sets[i], &sets[j]) {
                s += c[j];
            }
        }
        c[i] = 1 - s;
    }
    c
}

pub fn build_regions(parents: &[Vec<IndexLabel>], tensors: &[LabeledTensor]) -> Result<RegionGraph> {
    let mut ps: Vec<Vec<IndexLabel>> = parents.iter().map(|p| sorted_set(p)).filter(|p| !p.is_empty()).collect();
    ps.sort_by_key(|p| key(p));
    ps.dedup_by_key(|p| key(p));
    // a parent strictly inside another parent is not maximal
    let maximal: Vec<Vec<IndexLabel>> = ps
        .iter()
        .filter(|p| !ps.iter().any(|q| q.len() > p.len() && is_subset(p, q)))
        .cloned()
        .collect();
    for (v, t) in tensors.iter().enumerate() {
        let tl = sorted_set(&t.labels);
        if !maximal.iter().any(|p| is_subset(&tl, p)) {
            return Err(Error::CoverageError(v));
        }
    }

    let mut discovered: BTreeSet<Vec<u32>> = maximal.iter().map(|p| key(p)).collect();
    let mut children: Vec<(Vec<IndexLabel>, usize)> = Vec::new();
    let mut generation = maximal.clone();
    let mut level = 0;
    while !generation.is_empty() {
        level += 1;
        let mut next: Vec<Vec<IndexLabel>> = Vec::new();
        for i in 0..generation.len() {
            for j in i + 1..generation.len() {
                let r = intersect(&generation[i], &generation[j]);
                if !r.is_empty() && discovered.insert(key(&r)) {
                    next.push(r);
                }
            }
        }
        next.sort_by_key(|r| key(r));
        children.extend(next.iter().map(|r| (r.clone(), level)));
        generation = next;
    }

    let n_par = maximal.len();
    let mut sets: Vec<Vec<IndexLabel>> = maximal.clone();
    sets.extend(children.iter().map(|(r, _)| r.clone()));
    let c = counting_numbers(&sets, n_par);

    let mut regions: Vec<Region> = maximal
        .iter()
        .map(|p| Region { labels: p.clone(), counting_number: 1, kind: RegionKind::Parent, level: 0 })
        .collect();
    let mut kept: Vec<(Vec<IndexLabel>, usize, i64)> = Vec::new();
    let mut dropped = 0;
    for (k, (r, lv)) in children.into_iter().enumerate() {
        let ck = c[n_par + k];
        if ck == 0 {
            dropped += 1;
        } else {
            kept.push((r, lv, ck));
        }
    }
    kept.sort_by_key(|(r, _, _)| key(r));
    regions.extend(kept.into_iter().map(|(labels, level, counting_number)| Region {
        labels,
        counting_number,
        kind: RegionKind::Child,
        level,
    }));

    let n = regions.len();
    let mut child_links = vec![Vec::new(); n];
    let mut parent_links = vec![Vec::new(); n];
    for a in 0..n_par {
        for b in n_par..n {
            if is_subset(&regions[b].labels, &regions[a].labels) {
                child_links[a].push(b);
                parent_links[b].push(a);
            }
        }
    }
    let factors = regions.iter().map(|r| region_factor(&r.labels, tensors)).collect::<Result<Vec<_>>>()?;
    Ok(RegionGraph { regions, child_links, parent_links, factors, dropped })
}

pub fn build_preset(network: &Network, preset: &Preset) -> Result<RegionGraph> {
    build_regions(&preset_regions(network, preset)?, &network.tensors)
}

#[derive(Serialize)]
struct RegionDump<'a> {
    index: usize,
    labels: Vec<u32>,
    dims: Vec<usize>,
    counting_number: i64,
    kind: RegionKind,
    level: usize,
    parents: &'a [usize],
    children: &'a [usize],
}

impl RegionGraph {
    pub fn n_parents(&self) -> usize {
        self.regions.iter().take_while(|r| r.kind == RegionKind::Parent).count()
    }

    pub fn parents(&self) -> std::ops::Range<usize> {
        0..self.n_parents()
    }

    pub fn children(&self) -> std::ops::Range<usize> {
        self.n_parents()..self.regions.len()
    }

    pub fn find(&self, labels: &[IndexLabel]) -> Option<usize> {
        let k = key(&sorted_set(labels));
        self.regions.iter().position(|r| r.key() == k)
    }

    /// Sum of counting numbers over every region containing region `r`.
    pub fn superset_sum(&self, r: usize) -> i64 {
        let lr = &self.regions[r].labels;
        self.regions.iter().filter(|q| is_subset(lr, &q.labels)).map(|q| q.counting_number).sum()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let items: Vec<RegionDump> = self
            .regions
            .iter()
            .enumerate()
            .map(|(i, r)| RegionDump {
                index: i,
                labels: r.key(),
                dims: r.labels.iter().map(|l| l.dim).collect(),
                counting_number: r.counting_number,
                kind: r.kind,
                level: r.level,
                parents: &self.parent_links[i],
                children: &self.child_links[i],
            })
            .collect();
        serde_json::json!({ "regions": items, "dropped_zero_count_children": self.dropped })
    }
}

pub(crate) fn label_subset(a: &[IndexLabel], b: &[IndexLabel]) -> bool {
    is_subset(&sorted_set(a), &sorted_set(b))
}
