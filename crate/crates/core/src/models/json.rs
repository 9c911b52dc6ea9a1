//! JSON network format.
//!
//! ```json
//! {
//!   "labels": {"0": 2, "1": 2},
//!   "tensors": [
//!     {"labels": [0, 1], "dense": [1.0, [0.5, -0.5], 0.0, 2.0]},
//!     {"labels": [1], "sparse": [[[0], 1.0]], "log_scale": 0.0}
//!   ],
//!   "geometry": {"plaquettes": [{"interior": [0, 1], "exterior": []}], "voxels": []}
//! }
//! ```
//! Entries are reals or `[re, im]` pairs; dense data is row-major over the
//! tensor's labels.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{Cell, Geometry, Network};
use crate::tensor::{IndexLabel, LabeledTensor, Storage, C64};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Real(f64),
    Complex([f64; 2]),
}

impl From<Entry> for C64 {
    fn from(e: Entry) -> C64 {
        match e {
            Entry::Real(x) => C64::new(x, 0.0),
            Entry::Complex([re, im]) => C64::new(re, im),
        }
    }
}

impl From<C64> for Entry {
    fn from(z: C64) -> Entry {
        if z.im == 0.0 {
            Entry::Real(z.re)
        } else {
            Entry::Complex([z.re, z.im])
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorJson {
    labels: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dense: Option<Vec<Entry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sparse: Option<Vec<(Vec<usize>, Entry)>>,
    #[serde(default)]
    log_scale: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct CellJson {
    interior: Vec<u32>,
    #[serde(default)]
    exterior: Vec<u32>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct GeometryJson {
    #[serde(default)]
    plaquettes: Vec<CellJson>,
    #[serde(default)]
    voxels: Vec<CellJson>,
}

#[derive(Debug, Serialize, Deserialize)]
struct NetworkJson {
    labels: BTreeMap<u32, usize>,
    tensors: Vec<TensorJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    geometry: Option<GeometryJson>,
}

pub fn network_to_json(net: &Network) -> serde_json::Value {
    let labels = net.labels().iter().map(|l| (l.id, l.dim)).collect();
    let tensors = net
        .tensors
        .iter()
        .map(|t| {
            let (dense, sparse) = match &t.storage {
                Storage::Dense(d) => (Some(d.iter().map(|&z| z.into()).collect()), None),
                Storage::Sparse(m) => (None, Some(m.iter().map(|(k, &v)| (k.clone(), v.into())).collect())),
            };
            TensorJson { labels: t.label_ids(), dense, sparse, log_scale: t.log_scale }
        })
        .collect();
    let cells = |cs: &[Cell]| {
        cs.iter()
            .map(|c| CellJson {
                interior: c.interior.iter().map(|l| l.id).collect(),
                exterior: c.exterior.iter().map(|l| l.id).collect(),
            })
            .collect()
    };
    let geometry = net.geometry.as_ref().map(|g| GeometryJson { plaquettes: cells(&g.plaquettes), voxels: cells(&g.voxels) });
    serde_json::to_value(NetworkJson { labels, tensors, geometry }).expect("serializable")
}

pub fn network_from_json(text: &str) -> Result<Network> {
    let nj: NetworkJson = serde_json::from_str(text)?;
    let label = |id: u32| -> Result<IndexLabel> {
        nj.labels.get(&id).map(|&d| IndexLabel::new(id, d)).ok_or(Error::UnknownLabel(id))
    };
    let mut tensors = Vec::new();
    for (k, tj) in nj.tensors.iter().enumerate() {
        let labels = tj.labels.iter().map(|&id| label(id)).collect::<Result<Vec<_>>>()?;
        let size: usize = labels.iter().map(|l| l.dim).product();
        let t = match (&tj.dense, &tj.sparse) {
            (Some(d), None) => {
                if d.len() != size {
                    return Err(Error::Format(format!("tensor {k} has {} entries, expected {size}", d.len())));
                }
                LabeledTensor::dense(labels, d.iter().map(|&e| e.into()).collect())
            }
            (None, Some(s)) => {
                let mut m = BTreeMap::new();
                for (idx, e) in s {
                    if idx.len() != labels.len() || idx.iter().zip(&labels).any(|(&i, l)| i >= l.dim) {
                        return Err(Error::Format(format!("tensor {k} has an out-of-range sparse index")));
                    }
                    m.insert(idx.clone(), C64::from(*e));
                }
                LabeledTensor::sparse(labels, m)
            }
            _ => return Err(Error::Format(format!("tensor {k} needs exactly one of dense or sparse"))),
        };
        tensors.push(t.with_log_scale(tj.log_scale));
    }
    let mut net = Network::new(tensors);
    if let Some(g) = &nj.geometry {
        let cells = |cs: &[CellJson]| -> Result<Vec<Cell>> {
            cs.iter()
                .map(|c| {
                    Ok(Cell {
                        interior: c.interior.iter().map(|&i| label(i)).collect::<Result<_>>()?,
                        exterior: c.exterior.iter().map(|&i| label(i)).collect::<Result<_>>()?,
                    })
                })
                .collect()
        };
        net = net.with_geometry(Geometry { plaquettes: cells(&g.plaquettes)?, voxels: cells(&g.voxels)? });
    }
    net.validate()?;
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{ice_network, villain_network, Boundary, IceLattice, Representation};

    #[test]
    fn round_trip() {
        for m in [
            villain_network(0.4, (1, 1), Representation::FactorGraph, Boundary::Open),
            ice_network(IceLattice::Square, &[2, 2]),
        ] {
            let v = network_to_json(&m.network);
            let back = network_from_json(&v.to_string()).unwrap();
            assert_eq!(back.tensors.len(), m.network.tensors.len());
            for (a, b) in back.tensors.iter().zip(&m.network.tensors) {
                assert_eq!(a.labels, b.labels);
                assert_eq!(a.materialize(), b.materialize());
                assert_eq!(a.is_sparse(), b.is_sparse());
            }
            assert_eq!(back.geometry, m.network.geometry);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let bad = r#"{"labels": {"0": 2}, "tensors": [{"labels": [0], "dense": [1.0]}]}"#;
        assert!(matches!(network_from_json(bad), Err(Error::Format(_))));
        let unknown = r#"{"labels": {}, "tensors": [{"labels": [3], "dense": [1.0]}]}"#;
        assert!(matches!(network_from_json(unknown), Err(Error::UnknownLabel(3))));
        let complex = r#"{"labels": {"0": 2}, "tensors": [{"labels": [0], "dense": [1.0, [0.0, 2.0]]}]}"#;
        let n = network_from_json(complex).unwrap();
        assert_eq!(n.tensors[0].materialize()[1], C64::new(0.0, 2.0));
    }
}
