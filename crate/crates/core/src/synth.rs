//! Synthetic dataset generators and label-noise injection.
//!
//! All generators are pure functions of (kind, n, seed). Draw order is
//! pinned so datasets are reproducible across platforms: coefficient normals
//! first (where applicable), then all feature normals row-major, then one
//! label uniform per point for classification or one noise normal per point
//! for regression. Normals come from one Box-Muller stream per dataset (see
//! [`crate::rng`]); the Bernoulli label draw is `uniform < p`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::dataset::{DataPoint, Dataset, LabelKind, PointId};
use crate::error::{Error, Result};
use crate::rng::{partial_shuffle, rng_from_seed, NormalSource};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SyntheticKind {
    /// d = 5, x ~ N(0, I); P(y=1|x) = logistic(x . (2,1,0,0,0)).
    GaussianClassification,
    /// d = 5, x ~ N(0, I); y = x . (2,1,0,0,0) + eps, eps ~ N(0,1).
    GaussianRegression,
    /// d = 10, x ~ N(0, I); y = x . b0 + eps with b0 ~ N(0, I), eps ~ N(0,1).
    SnrRegression,
    /// d = 3, x ~ N(0, I); P(y=1|x) = logistic(x . (5,0,0)).
    SnrClassification,
}

impl SyntheticKind {
    pub fn dim(self) -> usize {
        match self {
            SyntheticKind::GaussianClassification | SyntheticKind::GaussianRegression => 5,
            SyntheticKind::SnrRegression => 10,
            SyntheticKind::SnrClassification => 3,
        }
    }

    pub fn label_kind(self) -> LabelKind {
        match self {
            SyntheticKind::GaussianClassification | SyntheticKind::SnrClassification => {
                LabelKind::Binary
            }
            SyntheticKind::GaussianRegression | SyntheticKind::SnrRegression => LabelKind::Real,
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "gaussian-classification" => Ok(SyntheticKind::GaussianClassification),
            "gaussian-regression" => Ok(SyntheticKind::GaussianRegression),
            "snr-regression" => Ok(SyntheticKind::SnrRegression),
            "snr-classification" => Ok(SyntheticKind::SnrClassification),
            other => Err(Error::InvalidParameter(format!(
                "unknown synthetic kind `{other}`"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SyntheticKind::GaussianClassification => "gaussian-classification",
            SyntheticKind::GaussianRegression => "gaussian-regression",
            SyntheticKind::SnrRegression => "snr-regression",
            SyntheticKind::SnrClassification => "snr-classification",
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    crate::logistic::sigmoid(z)
}

fn classification_dataset(n: usize, seed: u64, coef: &[f64]) -> Dataset {
    let d = coef.len();
    let mut src = NormalSource::new(rng_from_seed(seed));
    let features: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| src.next_normal()).collect())
        .collect();
    let points = features
        .into_iter()
        .enumerate()
        .map(|(i, x)| {
            let z: f64 = x.iter().zip(coef).map(|(a, b)| a * b).sum();
            let label = if src.next_uniform() < sigmoid(z) { 1.0 } else { 0.0 };
            DataPoint {
                id: PointId(i as u64),
                features: x,
                label,
            }
        })
        .collect();
    Dataset::new(points, LabelKind::Binary).expect("generated dataset is valid")
}

fn regression_dataset(n: usize, seed: u64, coef: Coefficients) -> Dataset {
    let mut src = NormalSource::new(rng_from_seed(seed));
    let coef: Vec<f64> = match coef {
        Coefficients::Fixed(c) => c.to_vec(),
        Coefficients::Standard(d) => (0..d).map(|_| src.next_normal()).collect(),
    };
    let d = coef.len();
    let features: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| src.next_normal()).collect())
        .collect();
    let points = features
        .into_iter()
        .enumerate()
        .map(|(i, x)| {
            let signal: f64 = x.iter().zip(&coef).map(|(a, b)| a * b).sum();
            DataPoint {
                id: PointId(i as u64),
                features: x,
                label: signal + src.next_normal(),
            }
        })
        .collect();
    Dataset::new(points, LabelKind::Real).expect("generated dataset is valid")
}

enum Coefficients {
    Fixed(&'static [f64]),
    /// Drawn from N(0, I_d) at the head of the stream.
    Standard(usize),
}

pub fn gen_gaussian_classification(n: usize, seed: u64) -> Dataset {
    classification_dataset(n, seed, &[2.0, 1.0, 0.0, 0.0, 0.0])
}

pub fn gen_gaussian_regression(n: usize, seed: u64) -> Dataset {
    regression_dataset(n, seed, Coefficients::Fixed(&[2.0, 1.0, 0.0, 0.0, 0.0]))
}

pub fn gen_snr_regression(n: usize, seed: u64) -> Dataset {
    regression_dataset(n, seed, Coefficients::Standard(10))
}

pub fn gen_snr_classification(n: usize, seed: u64) -> Dataset {
    classification_dataset(n, seed, &[5.0, 0.0, 0.0])
}

pub fn generate(kind: SyntheticKind, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be positive".into()));
    }
    Ok(match kind {
        SyntheticKind::GaussianClassification => gen_gaussian_classification(n, seed),
        SyntheticKind::GaussianRegression => gen_gaussian_regression(n, seed),
        SyntheticKind::SnrRegression => gen_snr_regression(n, seed),
        SyntheticKind::SnrClassification => gen_snr_classification(n, seed),
    })
}

/// Which points had their labels flipped, for later detection scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseRecord {
    pub fraction: f64,
    pub flipped: BTreeSet<PointId>,
}

impl NoiseRecord {
    pub fn is_flipped(&self, id: PointId) -> bool {
        self.flipped.contains(&id)
    }
}

/// `round(x)` with halves rounding up.
pub fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

/// Invert the binary labels of a uniformly chosen `round(fraction * n)` ids.
/// Sampling runs over ascending ids, so the flipped set depends only on the
/// id set and the seed, never on storage order.
pub fn flip_labels(data: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, NoiseRecord)> {
    if data.label_kind() != LabelKind::Binary {
        return Err(Error::InvalidParameter(
            "label flips require binary labels".into(),
        ));
    }
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::InvalidParameter(format!(
            "flip fraction must be in [0, 1), got {fraction}"
        )));
    }
    let count = round_half_up(fraction * data.len() as f64);
    let mut ids = data.sorted_ids();
    let mut rng = rng_from_seed(seed);
    partial_shuffle(&mut rng, &mut ids, count);
    let flipped: BTreeSet<PointId> = ids[..count].iter().copied().collect();
    let mut flipped_data = data.clone();
    for &id in &flipped {
        flipped_data = flipped_data.with_flipped_label(id)?;
    }
    Ok((
        flipped_data,
        NoiseRecord {
            fraction,
            flipped,
        },
    ))
}
