//! Utility functions U(S): the performance of a model trained on a subset,
//! measured on a fixed validation set.
//!
//! Conventions for degenerate subsets, which keep U total over all 2^n
//! subsets: the empty set, and any subset on which training cannot separate
//! classes (single-class), score the best constant predictor fitted on the
//! validation label marginal: the majority class for accuracy (ties predict
//! class 1), the label mean for negative MSE.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::RwLock;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, LabelKind, PointId};
use crate::error::{Error, Result};
use crate::logistic::{train_logistic, LogisticModel, TrainingConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    LogisticRegression,
    /// Best constant fitted on the subset labels; the trivial baseline model.
    ConstantPredictor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    /// Fraction of validation points classified correctly; binary labels.
    Accuracy,
    /// Negative mean squared error; real labels.
    NegativeMse,
}

impl Metric {
    fn compatible_with(self, labels: LabelKind) -> bool {
        matches!(
            (self, labels),
            (Metric::Accuracy, LabelKind::Binary) | (Metric::NegativeMse, LabelKind::Real)
        )
    }

    fn name(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::NegativeMse => "negative-mse",
        }
    }
}

fn label_name(kind: LabelKind) -> &'static str {
    match kind {
        LabelKind::Binary => "binary",
        LabelKind::Real => "real",
    }
}

/// Everything that defines U(S) except the subset itself.
#[derive(Debug, Clone)]
pub struct UtilitySpec {
    pub model: ModelKind,
    pub metric: Metric,
    pub validation: Dataset,
    pub training: TrainingConfig,
}

impl UtilitySpec {
    pub fn new(
        model: ModelKind,
        metric: Metric,
        validation: Dataset,
        training: TrainingConfig,
    ) -> Result<Self> {
        if validation.is_empty() {
            return Err(Error::InvalidParameter(
                "validation set must be non-empty".into(),
            ));
        }
        if !metric.compatible_with(validation.label_kind()) {
            return Err(Error::IncompatibleMetric {
                metric: metric.name(),
                labels: label_name(validation.label_kind()),
            });
        }
        if model == ModelKind::LogisticRegression && metric != Metric::Accuracy {
            return Err(Error::IncompatibleMetric {
                metric: metric.name(),
                labels: "logistic-regression (binary only)",
            });
        }
        Ok(Self {
            model,
            metric,
            validation,
            training,
        })
    }

    /// Logistic regression + accuracy with default training knobs.
    pub fn logistic_accuracy(validation: Dataset) -> Result<Self> {
        Self::new(
            ModelKind::LogisticRegression,
            Metric::Accuracy,
            validation,
            TrainingConfig::default(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum SubsetKey {
    /// Bitmask over storage indices; only valid for n <= 64.
    Mask(u64),
    /// Sorted point ids; arbitrary n.
    Ids(Box<[u64]>),
}

/// Concurrent memo of subset utilities. Reads are shared, writes serialized;
/// hits return bit-identical values to fresh evaluations because training is
/// deterministic. Inserts stop at the capacity limit and later misses
/// recompute, so memory stays bounded.
pub struct UtilityCache {
    map: RwLock<HashMap<SubsetKey, f64>>,
    capacity: usize,
}

impl UtilityCache {
    pub fn new() -> Self {
        Self::with_capacity_limit(2_000_000)
    }

    pub fn with_capacity_limit(capacity: usize) -> Self {
        Self {
            map: RwLock::new(HashMap::new()),
            capacity,
        }
    }

    /// Sized for a game over `n` points: subset keys are 8-byte masks up to
    /// n = 64 and sorted id lists beyond, so the entry budget shrinks.
    pub fn for_points(n: usize) -> Self {
        if n <= 64 {
            Self::with_capacity_limit(2_000_000)
        } else {
            Self::with_capacity_limit(200_000)
        }
    }

    pub fn len(&self) -> usize {
        self.map.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn get(&self, key: &SubsetKey) -> Option<f64> {
        self.map.read().unwrap().get(key).copied()
    }

    fn insert(&self, key: SubsetKey, value: f64) {
        let mut map = self.map.write().unwrap();
        if map.len() < self.capacity {
            map.insert(key, value);
        }
    }
}

impl Default for UtilityCache {
    fn default() -> Self {
        Self::new()
    }
}

/// Classification accuracy of a trained model on a validation set.
/// Probability exactly 0.5 thresholds to class 1.
pub fn predict_accuracy(model: &LogisticModel, validation: &Dataset) -> f64 {
    let correct = validation
        .points()
        .iter()
        .filter(|p| model.predict(&p.features) == p.label)
        .count();
    correct as f64 / validation.len() as f64
}

fn accuracy_of_constant(class: f64, validation: &Dataset) -> f64 {
    validation.points().iter().filter(|p| p.label == class).count() as f64
        / validation.len() as f64
}

fn negative_mse_of_constant(value: f64, validation: &Dataset) -> f64 {
    let mse = validation
        .points()
        .iter()
        .map(|p| (p.label - value) * (p.label - value))
        .sum::<f64>()
        / validation.len() as f64;
    -mse
}

/// Metric of the best constant predictor fitted on the validation label
/// marginal; the U(empty) convention. Majority ties predict class 1.
fn empty_set_utility(spec: &UtilitySpec) -> f64 {
    match spec.metric {
        Metric::Accuracy => {
            let p1 = spec
                .validation
                .points()
                .iter()
                .map(|p| p.label)
                .sum::<f64>()
                / spec.validation.len() as f64;
            let class = if p1 >= 0.5 { 1.0 } else { 0.0 };
            accuracy_of_constant(class, &spec.validation)
        }
        Metric::NegativeMse => {
            let mean = spec
                .validation
                .points()
                .iter()
                .map(|p| p.label)
                .sum::<f64>()
                / spec.validation.len() as f64;
            negative_mse_of_constant(mean, &spec.validation)
        }
    }
}

fn utility_uncached(spec: &UtilitySpec, data: &Dataset, sorted_idx: &[usize]) -> f64 {
    if sorted_idx.is_empty() {
        return empty_set_utility(spec);
    }
    let points = data.points();
    match (spec.model, spec.metric) {
        (ModelKind::LogisticRegression, _) => {
            let first = points[sorted_idx[0]].label;
            let single_class = sorted_idx.iter().all(|&i| points[i].label == first);
            if single_class {
                return empty_set_utility(spec);
            }
            let xs: Vec<&[f64]> = sorted_idx.iter().map(|&i| points[i].features.as_slice()).collect();
            let ys: Vec<f64> = sorted_idx.iter().map(|&i| points[i].label).collect();
            let model = train_logistic(&xs, &ys, None, &spec.training);
            predict_accuracy(&model, &spec.validation)
        }
        (ModelKind::ConstantPredictor, Metric::Accuracy) => {
            let ones = sorted_idx.iter().filter(|&&i| points[i].label == 1.0).count();
            let class = if 2 * ones >= sorted_idx.len() { 1.0 } else { 0.0 };
            accuracy_of_constant(class, &spec.validation)
        }
        (ModelKind::ConstantPredictor, Metric::NegativeMse) => {
            let mean = sorted_idx.iter().map(|&i| points[i].label).sum::<f64>()
                / sorted_idx.len() as f64;
            negative_mse_of_constant(mean, &spec.validation)
        }
    }
}

/// U(subset): train `spec.model` on the subset, score on the validation set,
/// consulting the cache first. The value depends only on the id set, never
/// on the order of `subset`. A cache belongs to one (spec, data) pair; reuse
/// across different specs or datasets returns stale values.
pub fn evaluate_utility(
    spec: &UtilitySpec,
    subset: &[PointId],
    data: &Dataset,
    cache: &UtilityCache,
) -> Result<f64> {
    if !spec.metric.compatible_with(data.label_kind()) {
        return Err(Error::IncompatibleMetric {
            metric: spec.metric.name(),
            labels: label_name(data.label_kind()),
        });
    }
    let mut sorted_ids: Vec<PointId> = subset.to_vec();
    sorted_ids.sort_unstable();
    sorted_ids.dedup();
    let mut sorted_idx = Vec::with_capacity(sorted_ids.len());
    for id in &sorted_ids {
        sorted_idx.push(data.index_of(*id).ok_or(Error::UnknownPoint(id.0))?);
    }

    let key = if data.len() <= 64 {
        let mut mask = 0u64;
        for &i in &sorted_idx {
            mask |= 1 << i;
        }
        SubsetKey::Mask(mask)
    } else {
        SubsetKey::Ids(sorted_ids.iter().map(|id| id.0).collect())
    };
    if let Some(v) = cache.get(&key) {
        return Ok(v);
    }
    let value = utility_uncached(spec, data, &sorted_idx);
    cache.insert(key, value);
    Ok(value)
}

/// A cooperative game over an ordered set of valued points.
pub trait Utility: Sync {
    /// The valued points, in the order value vectors will follow.
    fn ids(&self) -> &[PointId];

    fn eval(&self, subset: &[PointId]) -> Result<f64>;

    fn n(&self) -> usize {
        self.ids().len()
    }

    /// Number of `eval` calls so far, cache hits included. Zero when the
    /// implementation does not track calls.
    fn evaluations(&self) -> u64 {
        0
    }
}

/// The model-backed game: U(S) trains `spec.model` on S and scores it on the
/// validation set. Points are valued in ascending id order.
pub struct ModelUtility<'a> {
    spec: &'a UtilitySpec,
    data: &'a Dataset,
    cache: UtilityCache,
    ids: Vec<PointId>,
    evals: AtomicU64,
}

impl<'a> ModelUtility<'a> {
    pub fn new(spec: &'a UtilitySpec, data: &'a Dataset) -> Self {
        Self {
            spec,
            data,
            cache: UtilityCache::for_points(data.len()),
            ids: data.sorted_ids(),
            evals: AtomicU64::new(0),
        }
    }

    pub fn cache(&self) -> &UtilityCache {
        &self.cache
    }
}

impl Utility for ModelUtility<'_> {
    fn ids(&self) -> &[PointId] {
        &self.ids
    }

    fn eval(&self, subset: &[PointId]) -> Result<f64> {
        self.evals.fetch_add(1, Ordering::Relaxed);
        evaluate_utility(self.spec, subset, self.data, &self.cache)
    }

    fn evaluations(&self) -> u64 {
        self.evals.load(Ordering::Relaxed)
    }
}

/// A game given by an explicit table over all subsets; n <= 25. Useful for
/// synthetic games where the exact value is known in closed form.
pub struct TableUtility {
    ids: Vec<PointId>,
    table: Vec<f64>,
}

impl TableUtility {
    /// Build from a function of the subset bitmask over positions in `ids`.
    pub fn from_fn(ids: Vec<PointId>, f: impl Fn(u64) -> f64) -> Result<Self> {
        let n = ids.len();
        if n > 25 {
            return Err(Error::SizeLimit { n, max: 25 });
        }
        let mut sorted = ids.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != n {
            return Err(Error::InvalidParameter("duplicate ids in game".into()));
        }
        let table = (0..1u64 << n).map(f).collect();
        Ok(Self { ids, table })
    }

    /// A random utility table with values uniform in [0, 1) and U(empty) = 0.
    pub fn random_game(n: usize, seed: u64) -> Result<Self> {
        let mut rng = crate::rng::rng_from_seed(seed);
        let ids = (0..n as u64).map(PointId).collect();
        let mut table: Vec<f64> = (0..1u64 << n)
            .map(|_| crate::rng::next_f64(&mut rng))
            .collect();
        table[0] = 0.0;
        Ok(Self { ids, table })
    }

    /// Pointwise linear combination `a * self + b * other` (same ids).
    pub fn linear_combination(&self, a: f64, other: &TableUtility, b: f64) -> Result<Self> {
        if self.ids != other.ids {
            return Err(Error::InvalidParameter(
                "linear combination requires identical games".into(),
            ));
        }
        Ok(Self {
            ids: self.ids.clone(),
            table: self
                .table
                .iter()
                .zip(&other.table)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        })
    }

    pub fn value_at_mask(&self, mask: u64) -> f64 {
        self.table[mask as usize]
    }

    fn mask_of(&self, subset: &[PointId]) -> Result<u64> {
        let mut mask = 0u64;
        for id in subset {
            let pos = self
                .ids
                .iter()
                .position(|x| x == id)
                .ok_or(Error::UnknownPoint(id.0))?;
            mask |= 1 << pos;
        }
        Ok(mask)
    }
}

impl Utility for TableUtility {
    fn ids(&self) -> &[PointId] {
        &self.ids
    }

    fn eval(&self, subset: &[PointId]) -> Result<f64> {
        Ok(self.table[self.mask_of(subset)? as usize])
    }
}
