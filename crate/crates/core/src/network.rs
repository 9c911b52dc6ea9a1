//! A tensor network plus optional lattice geometry used by region presets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{IndexLabel, LabeledTensor};

/// A plaquette or voxel: the indices inside it and those leaving its corner tensors.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub interior: Vec<IndexLabel>,
    pub exterior: Vec<IndexLabel>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub plaquettes: Vec<Cell>,
    pub voxels: Vec<Cell>,
}

#[derive(Clone, Debug, Default)]
pub struct Network {
    pub tensors: Vec<LabeledTensor>,
    pub geometry: Option<Geometry>,
}

impl Network {
    pub fn new(tensors: Vec<LabeledTensor>) -> Self {
        Network { tensors, geometry: None }
    }

    pub fn with_geometry(mut self, g: Geometry) -> Self {
        self.geometry = Some(g);
        self
    }

    /// Every distinct label, sorted by id.
    pub fn labels(&self) -> Vec<IndexLabel> {
        let mut all: Vec<IndexLabel> = self.tensors.iter().flat_map(|t| t.labels.iter().copied()).collect();
        all.sort();
        all.dedup();
        all
    }

    /// Checks dims agree across tensors and no tensor repeats a label.
    pub fn validate(&self) -> Result<()> {
        let mut seen: std::collections::BTreeMap<u32, usize> = Default::default();
        for t in &self.tensors {
            for (k, l) in t.labels.iter().enumerate() {
                if t.labels[..k].iter().any(|x| x.id == l.id) {
                    return Err(Error::LabelMismatch(format!("label {} repeated within a tensor", l.id)));
                }
                if let Some(&d) = seen.get(&l.id) {
                    if d != l.dim {
                        return Err(Error::DimMismatch { id: l.id, left: d, right: l.dim });
                    }
                }
                seen.insert(l.id, l.dim);
            }
        }
        Ok(())
    }

    /// How many tensors carry each label; labels on more than two tensors are hyper-indices.
    pub fn multiplicity(&self, id: u32) -> usize {
        self.tensors.iter().filter(|t| t.position(id).is_some()).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn l(id: u32, dim: usize) -> IndexLabel {
        IndexLabel::new(id, dim)
    }

    #[test]
    fn validate_catches_dim_and_repeat() {
        let a = LabeledTensor::ones(vec![l(0, 2), l(1, 3)]);
        let b = LabeledTensor::ones(vec![l(1, 3), l(2, 2)]);
        assert!(Network::new(vec![a.clone(), b]).validate().is_ok());
        let bad = LabeledTensor::ones(vec![l(1, 2)]);
        assert!(matches!(
            Network::new(vec![a.clone(), bad]).validate(),
            Err(Error::DimMismatch { id: 1, left: 3, right: 2 })
        ));
        let rep = LabeledTensor::ones(vec![l(4, 2), l(4, 2)]);
        assert!(matches!(Network::new(vec![rep]).validate(), Err(Error::LabelMismatch(_))));
    }

    #[test]
    fn labels_and_multiplicity() {
        let net = Network::new(vec![
            LabeledTensor::ones(vec![l(5, 2), l(1, 2)]),
            LabeledTensor::ones(vec![l(1, 2), l(3, 2)]),
            LabeledTensor::ones(vec![l(1, 2)]),
        ]);
        assert_eq!(net.labels().iter().map(|x| x.id).collect::<Vec<_>>(), vec![1, 3, 5]);
        assert_eq!(net.multiplicity(1), 3);
        assert_eq!(net.multiplicity(5), 1);
        assert_eq!(net.multiplicity(9), 0);
    }
}
