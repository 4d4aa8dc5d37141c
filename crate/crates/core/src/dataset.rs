//! Datasets of valued points: stable ids, fixed-dimension features, and
//! binary or real labels.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Stable identifier of a data point; survives any reordering of storage.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct PointId(pub u64);

impl std::fmt::Display for PointId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelKind {
    /// Labels take values in {0, 1}.
    Binary,
    /// Labels are arbitrary finite reals.
    Real,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataPoint {
    pub id: PointId,
    pub features: Vec<f64>,
    pub label: f64,
}

/// An immutable ordered collection of points sharing one feature dimension
/// and one label kind.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    points: Vec<DataPoint>,
    dim: usize,
    label_kind: LabelKind,
    by_id: HashMap<PointId, usize>,
}

impl Dataset {
    pub fn new(points: Vec<DataPoint>, label_kind: LabelKind) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidParameter("dataset must be non-empty".into()));
        }
        let dim = points[0].features.len();
        let mut by_id = HashMap::with_capacity(points.len());
        for (i, p) in points.iter().enumerate() {
            if p.features.len() != dim {
                return Err(Error::InvalidParameter(format!(
                    "point {} has dimension {}, expected {dim}",
                    p.id,
                    p.features.len()
                )));
            }
            if p.features.iter().any(|x| !x.is_finite()) || !p.label.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "point {} contains non-finite values",
                    p.id
                )));
            }
            if label_kind == LabelKind::Binary && p.label != 0.0 && p.label != 1.0 {
                return Err(Error::InvalidParameter(format!(
                    "point {} has label {}, binary labels must be 0 or 1",
                    p.id, p.label
                )));
            }
            if by_id.insert(p.id, i).is_some() {
                return Err(Error::InvalidParameter(format!("duplicate point id {}", p.id)));
            }
        }
        Ok(Self {
            points,
            dim,
            label_kind,
            by_id,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label_kind(&self) -> LabelKind {
        self.label_kind
    }

    pub fn points(&self) -> &[DataPoint] {
        &self.points
    }

    pub fn get(&self, id: PointId) -> Option<&DataPoint> {
        self.by_id.get(&id).map(|&i| &self.points[i])
    }

    pub fn index_of(&self, id: PointId) -> Option<usize> {
        self.by_id.get(&id).copied()
    }

    pub fn contains(&self, id: PointId) -> bool {
        self.by_id.contains_key(&id)
    }

    /// Ids in storage order.
    pub fn ids(&self) -> Vec<PointId> {
        self.points.iter().map(|p| p.id).collect()
    }

    /// Ids in ascending order; the canonical order for seeded sampling, so
    /// that draws depend only on the id set and never on storage order.
    pub fn sorted_ids(&self) -> Vec<PointId> {
        let mut ids = self.ids();
        ids.sort_unstable();
        ids
    }

    /// A copy with one point's binary label inverted.
    pub(crate) fn with_flipped_label(&self, id: PointId) -> Result<Self> {
        if self.label_kind != LabelKind::Binary {
            return Err(Error::InvalidParameter(
                "label flips require binary labels".into(),
            ));
        }
        let idx = self.index_of(id).ok_or(Error::UnknownPoint(id.0))?;
        let mut points = self.points.clone();
        points[idx].label = 1.0 - points[idx].label;
        Dataset::new(points, self.label_kind)
    }
}
